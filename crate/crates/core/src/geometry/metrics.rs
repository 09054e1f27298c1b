//! Quantitative geometry on masks: distances, asymmetry, densities, strip
//! areas and the weighted symmetric difference `dist_ω`.
//!
//! Distances to `∂U` use the cell-interface convention: for a cell outside
//! `U` it is the distance between its center and the nearest occupied
//! center minus `h/2`, and symmetrically inside. Every cell therefore has a
//! distance of at least `h/2` and boundary cells sit exactly at `h/2`.

use serde::Serialize;

use super::edt::squared_distance;
use super::ellipsoid::Ellipsoid;
use super::mask::{DomainMask, Frame};
use crate::error::{Error, Result};
use crate::linalg::Sym2;

/// Signed distance to `∂U` on a lattice-aligned frame, positive outside.
#[derive(Debug, Clone)]
pub struct DistanceField {
    frame: Frame,
    h: f64,
    values: Vec<f64>,
    inside: Vec<bool>,
    /// Centers of the boundary cells of `U`, used off the frame.
    inner_boundary: Vec<[f64; 2]>,
}

impl DistanceField {
    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Signed distance at global cell `(gi, gj)`; cells off the frame are
    /// outside `U` and measured against its boundary cells directly.
    pub fn at_global(&self, gi: i64, gj: i64) -> f64 {
        let (i, j) = (gi - self.frame.gi0, gj - self.frame.gj0);
        if i >= 0 && j >= 0 && (i as usize) < self.frame.nx && (j as usize) < self.frame.ny {
            return self.values[j as usize * self.frame.nx + i as usize];
        }
        let x = [(gi as f64 + 0.5) * self.h, (gj as f64 + 0.5) * self.h];
        let d2 = self
            .inner_boundary
            .iter()
            .map(|c| (c[0] - x[0]).powi(2) + (c[1] - x[1]).powi(2))
            .fold(f64::MAX, f64::min);
        d2.sqrt() - 0.5 * self.h
    }

    pub fn is_inside_global(&self, gi: i64, gj: i64) -> bool {
        let (i, j) = (gi - self.frame.gi0, gj - self.frame.gj0);
        i >= 0
            && j >= 0
            && (i as usize) < self.frame.nx
            && (j as usize) < self.frame.ny
            && self.inside[j as usize * self.frame.nx + i as usize]
    }
}

/// Exact signed distance of `U` on its frame padded by one cell (or on
/// `frame` joined with it).
pub fn signed_distance_on(u: &DomainMask, frame: Option<Frame>) -> Result<DistanceField> {
    if u.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let own = u.frame()?.pad(1);
    let frame = match frame {
        Some(f) => own.union(&f),
        None => own,
    };
    let inside = u.embed(&frame)?;
    let outside: Vec<bool> = inside.iter().map(|&b| !b).collect();
    let d_out = squared_distance(frame.nx, frame.ny, &inside);
    let d_in = squared_distance(frame.nx, frame.ny, &outside);
    let h = u.h();
    let values = (0..frame.len())
        .map(|k| {
            if inside[k] {
                -(d_in[k].sqrt() - 0.5) * h
            } else {
                (d_out[k].sqrt() - 0.5) * h
            }
        })
        .collect();
    let inner_boundary = u
        .boundary_cells()
        .into_iter()
        .map(|(i, j)| u.center(i, j))
        .collect();
    Ok(DistanceField {
        frame,
        h,
        values,
        inside,
        inner_boundary,
    })
}

/// Signed distance `ρ(x, U)`, positive outside, on `U`'s frame padded by one cell.
pub fn signed_distance(u: &DomainMask) -> Result<DistanceField> {
    signed_distance_on(u, None)
}

fn boundary_flags(cells: &[bool], frame: &Frame) -> Vec<bool> {
    let (nx, ny) = (frame.nx as i64, frame.ny as i64);
    let at = |i: i64, j: i64| i >= 0 && j >= 0 && i < nx && j < ny && cells[(j * nx + i) as usize];
    (0..frame.len())
        .map(|k| {
            let (i, j) = ((k % frame.nx) as i64, (k / frame.nx) as i64);
            cells[k] && !(at(i - 1, j) && at(i + 1, j) && at(i, j - 1) && at(i, j + 1))
        })
        .collect()
}

/// Hausdorff distance between the boundary cell-center sets of `U` and `V`.
pub fn hausdorff_boundary(u: &DomainMask, v: &DomainMask) -> Result<f64> {
    if u.is_empty() || v.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let frame = u.common_frame(v)?.pad(1);
    let bu = boundary_flags(&u.embed(&frame)?, &frame);
    let bv = boundary_flags(&v.embed(&frame)?, &frame);
    let du = squared_distance(frame.nx, frame.ny, &bu);
    let dv = squared_distance(frame.nx, frame.ny, &bv);
    let mut worst: f64 = 0.0;
    for k in 0..frame.len() {
        if bu[k] {
            worst = worst.max(dv[k]);
        }
        if bv[k] {
            worst = worst.max(du[k]);
        }
    }
    Ok(worst.sqrt() * u.h())
}

/// `ω(s) = min(γ, |log(2 + 1/s)|^{-p})`, with `ω(0) = 0`.
pub fn omega(s: f64, p: f64, gamma: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    (2.0 + 1.0 / s).ln().powf(-p).min(gamma)
}

/// Checks `p > 6` and `0 < γ < |log 2|^{-p}`.
pub fn check_modulus(p: f64, gamma: f64) -> Result<()> {
    if !(p > 6.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "log exponent p must exceed d + 4 = 6, got {p}"
        )));
    }
    let cap = 2f64.ln().powf(-p);
    if !(gamma > 0.0 && gamma < cap) {
        return Err(Error::InvalidParameter(format!(
            "cap gamma must lie in (0, {cap}), got {gamma}"
        )));
    }
    Ok(())
}

/// `∫_{AΔB} ω(d(x, ∂B)/|B|^{1/2}) dx` by cell-center quadrature.
pub fn dist_omega(a: &DomainMask, b: &DomainMask, p: f64, gamma: f64) -> Result<f64> {
    check_modulus(p, gamma)?;
    Ok(dist_omega_parts(a, b, p, gamma)?.value)
}

/// Pieces of the `dist_ω` computation shared with the bound check.
#[derive(Debug, Clone)]
pub struct DistOmegaParts {
    pub value: f64,
    pub sym_diff: f64,
    /// Unsigned distances to `∂B` of the cells of `AΔB`.
    pub distances: Vec<f64>,
    /// Unsigned distances to `∂B` of every cell in the common frame.
    pub all_distances: Vec<f64>,
    pub volume_b: f64,
}

pub fn dist_omega_parts(a: &DomainMask, b: &DomainMask, p: f64, gamma: f64) -> Result<DistOmegaParts> {
    if b.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let frame = a.common_frame(b)?.pad(1);
    let df = signed_distance_on(b, Some(frame))?;
    let ea = a.embed(&df.frame)?;
    let eb = b.embed(&df.frame)?;
    let vol_b = b.volume();
    let scale = vol_b.sqrt();
    let h2 = a.h() * a.h();
    let mut value = 0.0;
    let mut distances = Vec::new();
    for k in 0..df.frame.len() {
        if ea[k] != eb[k] {
            let d = df.values[k].abs();
            value += h2 * omega(d / scale, p, gamma);
            distances.push(d);
        }
    }
    Ok(DistOmegaParts {
        value,
        sym_diff: h2 * distances.len() as f64,
        distances,
        all_distances: df.values.iter().map(|v| v.abs()).collect(),
        volume_b: vol_b,
    })
}

/// Two-sided strip constant `sup_t |{x : d(x, ∂B) ≤ t}| / (|B|^{1/2} t)`
/// over the given cell distances, evaluated at every distinct distance (the
/// supremum of the step-function ratio is attained there).
pub fn exact_strip_constant(distances: &[f64], h: f64, volume: f64) -> f64 {
    let mut d: Vec<f64> = distances.to_vec();
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let mut best: f64 = 0.0;
    let mut k = 0;
    while k < d.len() {
        let t = d[k];
        while k < d.len() && d[k] <= t {
            k += 1;
        }
        if t > 0.0 {
            best = best.max(k as f64 * h * h / (volume.sqrt() * t));
        }
    }
    best
}

/// Both sides of the `dist_ω` measure bound
/// `|AΔB|/|B| ≤ (dist_ω/|B|)·[1 + γ⁻¹ + |log(2 + P|B|/dist_ω)|^p]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DistOmegaBound {
    pub lhs: f64,
    pub rhs: f64,
    pub strip_p: f64,
    pub dist_omega: f64,
    pub holds: bool,
}

/// Evaluates the bound with `P` the exact two-sided strip constant of `B`
/// over the common frame.
pub fn dist_omega_bound(a: &DomainMask, b: &DomainMask, p: f64, gamma: f64) -> Result<DistOmegaBound> {
    check_modulus(p, gamma)?;
    let parts = dist_omega_parts(a, b, p, gamma)?;
    let vb = parts.volume_b;
    let lhs = parts.sym_diff / vb;
    let strip_p = exact_strip_constant(&parts.all_distances, a.h(), vb);
    let rhs = if parts.value > 0.0 {
        (parts.value / vb)
            * (1.0 + 1.0 / gamma + (2.0 + strip_p * vb / parts.value).ln().abs().powf(p))
    } else {
        0.0
    };
    Ok(DistOmegaBound {
        lhs,
        rhs,
        strip_p,
        dist_omega: parts.value,
        holds: lhs <= rhs * (1.0 + 1e-12),
    })
}

/// Asymmetry `min_E |UΔE|/|U|` over translates of the `ā`-ellipsoid with
/// `|E| = |U|`, and the minimizing ellipsoid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Asymmetry {
    pub value: f64,
    pub ellipsoid: Ellipsoid,
}

struct RasterCounter<'a> {
    u: &'a DomainMask,
    occupied: Vec<[f64; 2]>,
}

impl RasterCounter<'_> {
    /// `|UΔE|` with `E` rasterized on `U`'s lattice.
    fn sym_diff(&self, e: &Ellipsoid) -> f64 {
        let h = self.u.h();
        let inside = self.occupied.iter().filter(|&&c| e.contains(c)).count();
        let total_e = e.lattice_count(h);
        (self.occupied.len() + total_e - 2 * inside) as f64 * h * h
    }
}

fn pattern_search(
    f: &dyn Fn([f64; 2]) -> f64,
    start: [f64; 2],
    step0: f64,
    min_step: f64,
) -> ([f64; 2], f64) {
    let dirs = [
        [1.0, 0.0],
        [-1.0, 0.0],
        [0.0, 1.0],
        [0.0, -1.0],
        [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2],
        [-std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2],
        [std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2],
        [-std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2],
    ];
    let mut x = start;
    let mut fx = f(x);
    let mut step = step0;
    while step >= min_step {
        let mut best = (x, fx);
        for d in dirs {
            let y = [x[0] + step * d[0], x[1] + step * d[1]];
            let fy = f(y);
            if fy < best.1 {
                best = (y, fy);
            }
        }
        if best.1 < fx {
            x = best.0;
            fx = best.1;
        } else {
            step *= 0.5;
        }
    }
    (x, fx)
}

/// Deepest cell of `U` (largest distance to the complement).
fn deepest_point(u: &DomainMask) -> Result<[f64; 2]> {
    let df = signed_distance(u)?;
    let frame = df.frame();
    let (k, _) = df
        .values()
        .iter()
        .enumerate()
        .fold((0, f64::MAX), |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc });
    let (i, j) = ((k % frame.nx) as i64, (k / frame.nx) as i64);
    Ok([
        ((frame.gi0 + i) as f64 + 0.5) * u.h(),
        ((frame.gj0 + j) as f64 + 0.5) * u.h(),
    ])
}

pub fn asymmetry(u: &DomainMask, abar: Sym2) -> Result<Asymmetry> {
    asymmetry_with(u, abar, false)
}

/// With `free_volume` the radius is searched as well (in `[0.5, 1.5]`
/// times the volume-matched radius).
pub fn asymmetry_with(u: &DomainMask, abar: Sym2, free_volume: bool) -> Result<Asymmetry> {
    if u.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let vol = u.volume();
    let base = Ellipsoid::with_volume([0.0, 0.0], abar, vol)?;
    let counter = RasterCounter {
        u,
        occupied: u
            .occupied_cells()
            .into_iter()
            .map(|(i, j)| u.center(i, j))
            .collect(),
    };
    let h = u.h();
    let ext = base.half_extent();
    let step0 = 0.25 * ext[0].min(ext[1]).max(h);
    let starts = [
        u.barycenter().ok_or(Error::EmptyDomain)?,
        deepest_point(u)?,
    ];
    let mut best: Option<([f64; 2], f64, f64)> = None;
    for s in starts {
        let f = |c: [f64; 2]| counter.sym_diff(&base.with_center(c));
        let (c, fc) = pattern_search(&f, s, step0, 0.5 * h);
        if best.is_none_or(|b| fc < b.1) {
            best = Some((c, fc, 1.0));
        }
    }
    let (mut c, mut fc, mut scale) = best.expect("two starts");
    if free_volume {
        for _ in 0..3 {
            let mut s_step = 0.1;
            while s_step > 0.5 * h / base.rho() {
                let mut moved = false;
                for ds in [s_step, -s_step] {
                    let t = (scale + ds).clamp(0.5, 1.5);
                    let e = base.with_center(c).scaled(t)?;
                    let v = counter.sym_diff(&e);
                    if v < fc {
                        fc = v;
                        scale = t;
                        moved = true;
                    }
                }
                if !moved {
                    s_step *= 0.5;
                }
            }
            let e0 = base.scaled(scale)?;
            let f = |p: [f64; 2]| counter.sym_diff(&e0.with_center(p));
            let (c2, f2) = pattern_search(&f, c, 0.25 * step0, 0.5 * h);
            c = c2;
            fc = f2;
        }
    }
    let ellipsoid = base.with_center(c).scaled(scale)?;
    Ok(Asymmetry {
        value: fc / vol,
        ellipsoid,
    })
}

/// Density and strip diagnostics of a mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityReport {
    /// Inner/outer density constant (sampled).
    pub kappa0: f64,
    /// Global density quantity (sampled suprema).
    pub kappa_u: f64,
    /// Boundary strip constant over a dyadic `t`-grid.
    pub strip_p: f64,
    /// Distance to a reference boundary, when one was given.
    pub hausdorff_to: Option<f64>,
}

impl RegularityReport {
    /// `κ_U·κ₀`, the quantity bounded by a dimensional constant.
    pub fn kappa_product(&self) -> f64 {
        self.kappa_u * self.kappa0
    }
}

/// Options for [`density_report_with`].
#[derive(Debug, Clone, Copy)]
pub struct DensityOptions {
    /// Cap on the ball radii (default `|U|^{1/2}`).
    pub max_radius: Option<f64>,
    /// Maximum number of sampled boundary/interior points.
    pub max_samples: usize,
    /// Smallest strip width, in cells.
    pub strip_start_cells: f64,
}

impl Default for DensityOptions {
    fn default() -> Self {
        DensityOptions {
            max_radius: None,
            max_samples: 256,
            strip_start_cells: 2.0,
        }
    }
}

/// Ball counting with row prefix sums over an unbounded lattice.
struct BallCounter<'a> {
    u: &'a DomainMask,
    prefix: Vec<u32>,
}

impl<'a> BallCounter<'a> {
    fn new(u: &'a DomainMask) -> Self {
        let nx = u.nx();
        let mut prefix = vec![0u32; (nx + 1) * u.ny()];
        for j in 0..u.ny() {
            for i in 0..nx {
                prefix[j * (nx + 1) + i + 1] = prefix[j * (nx + 1) + i] + u.get(i, j) as u32;
            }
        }
        BallCounter { u, prefix }
    }

    /// (occupied, total) counts of lattice cells whose centers lie in the
    /// open ball of radius `r` (cells) around `p`, given in window cell
    /// coordinates (cell `(i, j)` has center `(i, j)`).
    fn count(&self, p: [f64; 2], r: f64) -> (usize, usize) {
        let nx = self.u.nx() as i64;
        let ny = self.u.ny() as i64;
        let mut occ = 0usize;
        let mut total = 0usize;
        let j0 = (p[1] - r).floor() as i64;
        let j1 = (p[1] + r).ceil() as i64;
        for j in j0..=j1 {
            let dy = j as f64 - p[1];
            let rem = r * r - dy * dy;
            if rem <= 0.0 {
                continue;
            }
            let half = rem.sqrt();
            let mut lo = (p[0] - half).floor() as i64 + 1;
            let mut hi = (p[0] + half).ceil() as i64 - 1;
            let inside = |i: i64| (i as f64 - p[0]).powi(2) + dy * dy < r * r;
            while !inside(lo) && lo <= hi {
                lo += 1;
            }
            while !inside(hi) && hi >= lo {
                hi -= 1;
            }
            if hi < lo {
                continue;
            }
            total += (hi - lo + 1) as usize;
            if j < 0 || j >= ny {
                continue;
            }
            let a = lo.clamp(0, nx);
            let b = (hi + 1).clamp(0, nx);
            if b > a {
                let row = j as usize * (nx as usize + 1);
                occ += (self.prefix[row + b as usize] - self.prefix[row + a as usize]) as usize;
            }
        }
        (occ, total)
    }
}

/// Midpoints of the faces between occupied and empty cells, in window
/// cell coordinates.
fn boundary_face_points(u: &DomainMask) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for (i, j) in u.boundary_cells() {
        let (ii, jj) = (i as i64, j as i64);
        for (di, dj) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            if !u.get_signed(ii + di, jj + dj) {
                out.push([i as f64 + 0.5 * di as f64, j as f64 + 0.5 * dj as f64]);
            }
        }
    }
    out
}

fn subsample<T: Copy>(items: &[T], max: usize) -> Vec<T> {
    if items.len() <= max {
        return items.to_vec();
    }
    (0..max).map(|k| items[k * items.len() / max]).collect()
}

pub fn density_report(u: &DomainMask) -> Result<RegularityReport> {
    density_report_with(u, DensityOptions::default(), None)
}

/// Computes κ₀, κ_U and the strip constant; with `reference`, also the
/// boundary Hausdorff distance to it.
pub fn density_report_with(
    u: &DomainMask,
    opts: DensityOptions,
    reference: Option<&DomainMask>,
) -> Result<RegularityReport> {
    if u.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let h = u.h();
    let vol = u.volume();
    let r_max = opts.max_radius.unwrap_or(vol.sqrt()).min(vol.sqrt());
    let radii: Vec<f64> = std::iter::successors(Some(2.0), |r| Some(r * 2.0))
        .take_while(|&r| r * h <= r_max * (1.0 + 1e-12))
        .collect();
    let radii = if radii.is_empty() { vec![r_max / h] } else { radii };
    let counter = BallCounter::new(u);
    let boundary = subsample(&boundary_face_points(u), opts.max_samples);
    let interior = subsample(&u.occupied_cells(), opts.max_samples);

    let mut kappa0 = 0.5f64;
    let mut outer_sup = 1.0f64;
    for &p in &boundary {
        for &r in &radii {
            let (occ, total) = counter.count(p, r);
            let inner = occ as f64 / total as f64;
            kappa0 = kappa0.min(inner).min(1.0 - inner);
            let outside = total - occ;
            if outside > 0 {
                outer_sup = outer_sup.max(total as f64 / outside as f64);
            } else {
                outer_sup = f64::INFINITY;
            }
        }
    }
    let mut doubling_sup = 1.0f64;
    for &(i, j) in &interior {
        for &r in &radii {
            let z = [i as f64, j as f64];
            let (big, _) = counter.count(z, r);
            let (small, _) = counter.count(z, 0.5 * r);
            if small > 0 {
                doubling_sup = doubling_sup.max(big as f64 / small as f64);
            }
        }
    }

    let df = signed_distance(u)?;
    let inside_d: Vec<f64> = df
        .values()
        .iter()
        .filter(|&&v| v < 0.0)
        .map(|v| -v)
        .collect();
    let mut strip_p = 0.0f64;
    let mut t = opts.strip_start_cells * h;
    while t <= vol.sqrt() {
        let n = inside_d.iter().filter(|&&d| d <= t).count();
        strip_p = strip_p.max(n as f64 * h * h / (vol.sqrt() * t));
        t *= 2.0;
    }
    let hausdorff_to = match reference {
        Some(r) => Some(hausdorff_boundary(u, r)?),
        None => None,
    };
    Ok(RegularityReport {
        kappa0,
        kappa_u: doubling_sup + outer_sup,
        strip_p,
        hausdorff_to,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(c: [f64; 2], r: f64, h: f64) -> DomainMask {
        DomainMask::around(c, r + 3.0 * h, h, |x| (x[0] - c[0]).hypot(x[1] - c[1]) < r).unwrap()
    }

    #[test]
    fn signed_distance_basics() {
        let h = 0.05;
        let d = disk([0.0, 0.0], 1.0, h);
        let sd = signed_distance(&d).unwrap();
        let center = sd.at_global(0, 0).min(sd.at_global(-1, -1));
        assert!((center + 1.0).abs() < h * 2f64.sqrt());
        for (i, j) in d.boundary_cells() {
            let (gi, gj) = d.global_offset().unwrap();
            assert!(sd.at_global(gi + i as i64, gj + j as i64).abs() <= h * 2f64.sqrt());
        }
        // a point 3 units outside, off the frame
        let far = sd.at_global((4.0 / h) as i64, 0);
        assert!((far - 3.0).abs() < 2.0 * h * 2f64.sqrt());
    }

    #[test]
    fn hausdorff_concentric() {
        let h = 0.02;
        let a = disk([0.0, 0.0], 1.0, h);
        let b = disk([0.0, 0.0], 1.25, h);
        let d = hausdorff_boundary(&a, &b).unwrap();
        assert!((d - 0.25).abs() <= h * 2f64.sqrt(), "{d}");
        assert_eq!(hausdorff_boundary(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn omega_values() {
        assert_eq!(omega(0.0, 7.0, 0.1), 0.0);
        assert_eq!(omega(1e9, 7.0, 0.1), 0.1);
        let s: f64 = 0.01;
        assert!((omega(s, 7.0, 0.1) - (2.0 + 1.0 / s).ln().powf(-7.0)).abs() < 1e-18);
        assert!(check_modulus(7.0, 0.1).is_ok());
        assert!(check_modulus(5.0, 0.1).is_err());
        assert!(check_modulus(7.0, 20.0).is_err());
    }

    #[test]
    fn disk_asymmetry_small_and_translation_invariant() {
        let h = 0.02;
        let d = disk([0.1, -0.3], 1.0, h);
        let a = asymmetry(&d, Sym2::IDENTITY).unwrap();
        assert!(a.value < 4.0 * h, "{}", a.value);
        let t = d.translated_window(7, -3);
        let b = asymmetry(&t, Sym2::IDENTITY).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn disk_density_and_strip() {
        let h = 0.01;
        let d = disk([0.0, 0.0], 1.0, h);
        let rep = density_report_with(
            &d,
            DensityOptions {
                max_radius: Some(1.0),
                ..Default::default()
            },
            None,
        )
        .unwrap();
        assert!(rep.kappa0 >= 0.3 && rep.kappa0 <= 0.5, "{rep:?}");
        let target = 2.0 * std::f64::consts::PI.sqrt();
        assert!((rep.strip_p / target - 1.0).abs() < 0.15, "{rep:?}");
    }
}
