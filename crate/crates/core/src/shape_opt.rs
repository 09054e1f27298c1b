//! Minimization of `J(U) = λ₁(U, a) + ∫_U g` over masks, the volume map
//! `μ ↦ |U_μ|`, multiplier selection and the penalized replacement of a
//! volume-constrained shape.

use std::collections::HashSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cell::HomogenizedTensor;
use crate::coeff::Coefficients;
use crate::config::{EigenOptions, OptOptions};
use crate::eigen::{eigen_with_guess, EigenResult};
use crate::error::{Error, Result};
use crate::geometry::{
    check_modulus, density_report_with, dist_omega, omega, signed_distance_on, DensityOptions,
    DomainMask, Ellipsoid, Frame, RegularityReport,
};
use crate::operator::coefficient_offset;
use crate::special::LAMBDA_UNIT_DISK;

/// A position-dependent volume weight `g = μ*(1 ± ω(d(x, ∂U*)/|U*|^{1/2}))`,
/// with `+` outside `U*` and `−` inside.
#[derive(Debug, Clone)]
pub struct PenaltyField {
    frame: Frame,
    h: f64,
    values: Vec<f64>,
    mu: f64,
    gamma0: f64,
    p: f64,
    reference: DomainMask,
    hypotheses: PenaltyHypotheses,
}

/// Measured status of the three structural hypotheses on `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PenaltyHypotheses {
    /// Smallest `γ` with `(1+γ)⁻¹ ≤ g/μ ≤ 1+γ`.
    pub ellipticity_gamma: f64,
    pub ellipticity_holds: bool,
    /// `g` equals its supremum on the border of its frame and beyond.
    pub localized: bool,
    /// Distance from `∂U*` beyond which the cap is active.
    pub localization_radius: f64,
    /// Smallest `C` with `|g(x) − g(y)| ≤ μ·C·ω(μ^{1/4}|x − y|/ℓ)` over
    /// sampled pairs, `ℓ = μ^{1/4}|U*|^{1/2}`; the modulus is `ω_g = C·ω(·/ℓ)`.
    pub continuity_constant: f64,
    pub continuity_holds: bool,
    /// `ω_g^{1/6}` is a Dini modulus (equivalent to `p > 6`).
    pub dini: bool,
}

impl PenaltyHypotheses {
    pub fn all_hold(&self) -> bool {
        self.ellipticity_holds && self.localized && self.continuity_holds && self.dini
    }
}

impl PenaltyField {
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn reference(&self) -> &DomainMask {
        &self.reference
    }
    pub fn frame(&self) -> Frame {
        self.frame
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn hypotheses(&self) -> &PenaltyHypotheses {
        &self.hypotheses
    }

    /// `sup g = μ(1 + γ₀)`, the value away from `∂U*`.
    pub fn far_value(&self) -> f64 {
        self.mu * (1.0 + self.gamma0)
    }

    pub fn at_global(&self, gi: i64, gj: i64) -> f64 {
        let (i, j) = (gi - self.frame.gi0, gj - self.frame.gj0);
        if i >= 0 && j >= 0 && (i as usize) < self.frame.nx && (j as usize) < self.frame.ny {
            self.values[j as usize * self.frame.nx + i as usize]
        } else {
            self.far_value()
        }
    }

    /// Value at the cell containing `x`.
    pub fn at_point(&self, x: [f64; 2]) -> f64 {
        self.at_global((x[0] / self.h).floor() as i64, (x[1] / self.h).floor() as i64)
    }

    /// `g` on every cell of `mask`'s window.
    pub fn on_window(&self, mask: &DomainMask) -> Result<Vec<f64>> {
        if (mask.h() - self.h).abs() > 1e-12 * self.h {
            return Err(Error::GridMismatch(format!(
                "penalty spacing {} differs from mask spacing {}",
                self.h,
                mask.h()
            )));
        }
        let (gi0, gj0) = mask.global_offset()?;
        let mut w = Vec::with_capacity(mask.nx() * mask.ny());
        for j in 0..mask.ny() as i64 {
            for i in 0..mask.nx() as i64 {
                w.push(self.at_global(gi0 + i, gj0 + j));
            }
        }
        Ok(w)
    }

    /// `∫_Ω g` by cell-center quadrature.
    pub fn integral(&self, omega_mask: &DomainMask) -> Result<f64> {
        let w = self.on_window(omega_mask)?;
        let h2 = self.h * self.h;
        Ok(omega_mask
            .cells()
            .iter()
            .zip(&w)
            .filter(|(&c, _)| c)
            .map(|(_, g)| h2 * g)
            .sum())
    }

    /// `∫_{U*} ω(d(x, ∂U*)/|U*|^{1/2})`.
    pub fn reference_omega_integral(&self) -> Result<f64> {
        let inside = self.integral(&self.reference)?;
        Ok(self.reference.volume() - inside / self.mu)
    }
}

/// Builds `g` from `U*`. Requires `p > 6` and `0 < γ₀ < min(1, |log 2|^{-p})`.
pub fn build_penalty(u_star: &DomainMask, mu_star: f64, p: f64, gamma0: f64) -> Result<PenaltyField> {
    if !(mu_star > 0.0 && mu_star.is_finite()) {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu_star}")));
    }
    check_modulus(p, gamma0)?;
    if gamma0 >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "gamma0 must be below 1 for g to stay positive, got {gamma0}"
        )));
    }
    if u_star.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let h = u_star.h();
    let scale = u_star.volume().sqrt();
    // ω reaches the cap γ₀ once d/|U*|^{1/2} ≥ s_cap
    let s_cap = 1.0 / ((gamma0.powf(-1.0 / p)).exp() - 2.0);
    let reach = s_cap * scale;
    let pad = (reach / h).ceil() as usize + 2;
    let frame = u_star.frame()?.pad(pad);
    let df = signed_distance_on(u_star, Some(frame))?;
    let frame = df.frame();
    let values: Vec<f64> = df
        .values()
        .iter()
        .map(|&d| {
            let w = omega(d.abs() / scale, p, gamma0);
            mu_star * (1.0 + if d > 0.0 { w } else { -w })
        })
        .collect();
    let mut field = PenaltyField {
        frame,
        h,
        values,
        mu: mu_star,
        gamma0,
        p,
        reference: u_star.clone(),
        hypotheses: PenaltyHypotheses {
            ellipticity_gamma: 0.0,
            ellipticity_holds: false,
            localized: false,
            localization_radius: reach,
            continuity_constant: 0.0,
            continuity_holds: false,
            dini: false,
        },
    };
    field.hypotheses = check_hypotheses(&field, scale, reach);
    Ok(field)
}

fn check_hypotheses(g: &PenaltyField, scale: f64, reach: f64) -> PenaltyHypotheses {
    let mu = g.mu;
    let (lo, hi) = g
        .values
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v / mu), hi.max(v / mu)));
    let gamma = (hi - 1.0).max(1.0 / lo - 1.0);
    let ellipticity_holds = lo > 0.0 && gamma <= g.gamma0 / (1.0 - g.gamma0) * (1.0 + 1e-12);

    let far = g.far_value();
    let f = g.frame;
    let localized = (0..f.nx).all(|i| {
        g.values[i] == far && g.values[(f.ny - 1) * f.nx + i] == far
    }) && (0..f.ny).all(|j| g.values[j * f.nx] == far && g.values[j * f.nx + f.nx - 1] == far);

    let ell = mu.powf(0.25) * scale;
    let omega_g = |s: f64| omega(s / ell, g.p, g.gamma0);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    let n = g.values.len();
    for _ in 0..4000 {
        let a = rng.gen_range(0..n);
        // half the pairs are within three cells
        let b = if rng.gen_bool(0.5) {
            rng.gen_range(0..n)
        } else {
            let (ai, aj) = ((a % f.nx) as i64, (a / f.nx) as i64);
            let bi = (ai + rng.gen_range(-3..=3)).clamp(0, f.nx as i64 - 1);
            let bj = (aj + rng.gen_range(-3..=3)).clamp(0, f.ny as i64 - 1);
            bj as usize * f.nx + bi as usize
        };
        if a == b {
            continue;
        }
        let dx = ((a % f.nx) as f64 - (b % f.nx) as f64) * g.h;
        let dy = ((a / f.nx) as f64 - (b / f.nx) as f64) * g.h;
        let bound = mu * omega_g(mu.powf(0.25) * dx.hypot(dy));
        worst = worst.max((g.values[a] - g.values[b]).abs() / bound);
    }
    PenaltyHypotheses {
        ellipticity_gamma: gamma,
        ellipticity_holds,
        localized,
        localization_radius: reach,
        continuity_constant: worst,
        continuity_holds: worst.is_finite(),
        dini: g.p > 6.0,
    }
}

/// The volume term of `J`: a constant multiplier or a penalty field.
#[derive(Debug, Clone, Copy)]
pub enum Penalty<'a> {
    Constant(f64),
    Field(&'a PenaltyField),
}

impl Penalty<'_> {
    fn weights(&self, mask: &DomainMask) -> Result<Vec<f64>> {
        match self {
            Penalty::Constant(mu) => {
                if !(*mu > 0.0 && mu.is_finite()) {
                    return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
                }
                Ok(vec![*mu; mask.nx() * mask.ny()])
            }
            Penalty::Field(g) => g.on_window(mask),
        }
    }

    /// `∫_U g` by cell-center quadrature.
    pub fn volume_term(&self, mask: &DomainMask) -> Result<f64> {
        let w = self.weights(mask)?;
        Ok(weighted_volume(mask.cells(), &w, mask.h()))
    }
}

fn weighted_volume(cells: &[bool], w: &[f64], h: f64) -> f64 {
    h * h * cells.iter().zip(w).filter(|(&c, _)| c).map(|(_, g)| g).sum::<f64>()
}

/// One row of an optimization trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub lambda1: f64,
    pub volume: f64,
    pub accepted_move: String,
}

#[derive(Debug, Clone)]
pub struct OptResult {
    pub mask: DomainMask,
    pub energy: f64,
    pub lambda1: f64,
    pub trace: Vec<TraceRow>,
    /// True when the loop stopped by stalling rather than by `max_outer`.
    pub converged: bool,
    pub eigen: EigenResult,
}

impl OptResult {
    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }

    /// Writes the trace as CSV with header `iter,energy,lambda1,volume,accepted_move`.
    pub fn write_trace(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for row in &self.trace {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Evaluated {
    mask: DomainMask,
    energy: f64,
    eig: EigenResult,
}

fn evaluate<C: Coefficients + ?Sized>(
    a: &C,
    mask: DomainMask,
    weights: &[f64],
    eig: &EigenOptions,
    guess: Option<&[f64]>,
) -> Result<Evaluated> {
    let guess: Option<Vec<f64>> = guess.map(|g| {
        g.iter()
            .zip(mask.cells())
            .map(|(&v, &c)| if c { v } else { 0.0 })
            .collect()
    });
    let guess = guess.filter(|g| g.iter().any(|&v| v > 0.0));
    let res = eigen_with_guess(a, &mask, 1, eig, guess.as_deref())?;
    let energy = res.lambda1 + weighted_volume(mask.cells(), weights, mask.h());
    Ok(Evaluated { mask, energy, eig: res })
}

/// Flux `a_νν(2u/h)²` through the Dirichlet faces, averaged per cell:
/// for empty cells over faces shared with the mask, for boundary cells over
/// faces shared with the exterior.
fn face_fluxes<C: Coefficients + ?Sized>(
    a: &C,
    mask: &DomainMask,
    u: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (gi0, gj0) = coefficient_offset(a, mask)?;
    let (nx, ny) = (mask.nx(), mask.ny());
    let h = mask.h();
    let mut grow = vec![0.0; nx * ny];
    let mut grow_n = vec![0u8; nx * ny];
    let mut shrink = vec![0.0; nx * ny];
    let mut shrink_n = vec![0u8; nx * ny];
    for (i, j) in mask.occupied_cells() {
        let (si, sj) = (i as i64, j as i64);
        let slope = 2.0 * u[j * nx + i] / h;
        let faces = [
            (si - 1, sj, a.x_face(gi0 + si, gj0 + sj).xx),
            (si + 1, sj, a.x_face(gi0 + si + 1, gj0 + sj).xx),
            (si, sj - 1, a.y_face(gi0 + si, gj0 + sj).yy),
            (si, sj + 1, a.y_face(gi0 + si, gj0 + sj + 1).yy),
        ];
        for (ni, nj, coef) in faces {
            if mask.get_signed(ni, nj) {
                continue;
            }
            let flux = coef * slope * slope;
            shrink[j * nx + i] += flux;
            shrink_n[j * nx + i] += 1;
            if ni >= 0 && nj >= 0 && (ni as usize) < nx && (nj as usize) < ny {
                let k = nj as usize * nx + ni as usize;
                grow[k] += flux;
                grow_n[k] += 1;
            }
        }
    }
    for k in 0..nx * ny {
        if grow_n[k] > 0 {
            grow[k] /= grow_n[k] as f64;
        }
        if shrink_n[k] > 0 {
            shrink[k] /= shrink_n[k] as f64;
        }
    }
    Ok((grow, shrink))
}

/// Candidate masks around the current iterate, at refinement `level`.
fn candidates<C: Coefficients + ?Sized>(
    a: &C,
    cur: &Evaluated,
    weights: &[f64],
    opts: &OptOptions,
    level: usize,
) -> Result<Vec<(DomainMask, &'static str)>> {
    let mask = &cur.mask;
    let u = &cur.eig.u;
    let mut out = Vec::new();

    let mut vals: Vec<f64> = mask
        .cells()
        .iter()
        .zip(u)
        .filter(|(&c, _)| c)
        .map(|(_, &v)| v)
        .collect();
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    let refine = 0.5f64.powi(level as i32);
    let q = opts.quantile_levels;
    for k in 1..=q {
        let frac = 0.5 * (k as f64 / q as f64).powi(2) * refine;
        let idx = ((frac * n as f64) as usize).clamp(1, n - 1);
        let t = vals[idx - 1];
        let mut m = mask.clone();
        m.fill(|_| false);
        for (c, (&occ, &v)) in mask.cells().iter().zip(u).enumerate() {
            if occ && v > t {
                m.set(c % mask.nx(), c / mask.nx(), true);
            }
        }
        out.push((m, "threshold"));
    }
    out.push((mask.dilate(), "dilate"));
    out.push((mask.erode(), "erode"));

    let (grow, shrink) = face_fluxes(a, mask, u)?;
    let boundary: HashSet<usize> = mask
        .boundary_cells()
        .into_iter()
        .map(|(i, j)| j * mask.nx() + i)
        .collect();
    let flux_move = |tau: f64, add: bool, remove: bool| {
        let mut m = mask.clone();
        for k in 0..weights.len() {
            let (i, j) = (k % mask.nx(), k / mask.nx());
            if add && !mask.cells()[k] && grow[k] > weights[k] * (1.0 + tau) {
                m.set(i, j, true);
            }
            if remove && boundary.contains(&k) && shrink[k] < weights[k] / (1.0 + tau) {
                m.set(i, j, false);
            }
        }
        m
    };
    out.push((flux_move(0.0, true, false), "flux_grow"));
    out.push((flux_move(0.0, false, true), "flux_shrink"));
    for tau in [0.0, 0.1, 0.25, 0.5] {
        out.push((flux_move(tau * refine, true, true), "flux"));
    }

    for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
        if let Ok(m) = mask.shifted(di, dj) {
            out.push((m, "shift"));
        }
    }

    let comps = mask.components();
    if comps.len() > 1 {
        let peak = u
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        if let Some(c) = comps.into_iter().find(|c| c.cells()[peak]) {
            out.push((c, "component"));
        }
    }
    Ok(out)
}

/// Descent on `J(U) = λ₁(U, a) + ∫_U g` from `init`. Each iteration tries
/// superlevel sets of the eigenfunction, one-cell dilation, erosion and
/// shifts, flux-balance moves, and accepts the best strict improvement. After a
/// non-improving iteration the moves are refined; the loop stops after
/// `stall_iters` consecutive non-improving iterations.
pub fn minimize_j<C: Coefficients + ?Sized>(
    a: &C,
    penalty: Penalty<'_>,
    init: &DomainMask,
    eig: &EigenOptions,
    opts: &OptOptions,
) -> Result<OptResult> {
    if init.is_empty() {
        return Err(Error::EmptyDomain);
    }
    if init.count() < opts.min_cells {
        return Err(Error::DegenerateCollapse(format!(
            "initial mask has {} cells, fewer than {}",
            init.count(),
            opts.min_cells
        )));
    }
    let weights = penalty.weights(init)?;
    let mut cur = evaluate(a, init.clone(), &weights, eig, None)?;
    let mut trace = vec![TraceRow {
        iter: 0,
        energy: cur.energy,
        lambda1: cur.eig.lambda1,
        volume: cur.mask.volume(),
        accepted_move: "init".into(),
    }];
    let mut stall = 0;
    let mut converged = false;
    let mut seen: HashSet<Vec<bool>> = HashSet::new();
    seen.insert(cur.mask.cells().to_vec());
    for iter in 1..=opts.max_outer {
        let mut best: Option<(Evaluated, &'static str)> = None;
        for (cand, name) in candidates(a, &cur, &weights, opts, stall)? {
            if cand.count() < opts.min_cells || seen.contains(cand.cells()) {
                continue;
            }
            seen.insert(cand.cells().to_vec());
            let ev = evaluate(a, cand, &weights, eig, Some(&cur.eig.u))?;
            if best.as_ref().is_none_or(|b| ev.energy < b.0.energy) {
                best = Some((ev, name));
            }
        }
        match best {
            Some((ev, name)) if ev.energy < cur.energy => {
                cur = ev;
                stall = 0;
                trace.push(TraceRow {
                    iter,
                    energy: cur.energy,
                    lambda1: cur.eig.lambda1,
                    volume: cur.mask.volume(),
                    accepted_move: name.into(),
                });
            }
            _ => {
                stall += 1;
                if stall >= opts.stall_iters {
                    converged = true;
                    break;
                }
            }
        }
    }
    if cur.mask.erode().count() < opts.min_cells {
        return Err(Error::DegenerateCollapse(format!(
            "minimizer shrank to {} cells; refine the grid or lower mu",
            cur.mask.count()
        )));
    }
    Ok(OptResult {
        energy: cur.energy,
        lambda1: cur.eig.lambda1,
        mask: cur.mask,
        trace,
        converged,
        eigen: cur.eig,
    })
}

/// The `ā`-ellipsoid minimizing `J_μ(·, ā)` and its energy.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EllipsoidMinimizer {
    pub ellipsoid: Ellipsoid,
    pub energy: f64,
}

/// `f(ρ) = λ₁(B₁)/ρ² + μ·det(ā)^{1/2}·π·ρ²`.
pub fn ellipsoid_energy(abar: &HomogenizedTensor, mu: f64, rho: f64) -> f64 {
    LAMBDA_UNIT_DISK / (rho * rho) + mu * abar.det_abar.sqrt() * std::f64::consts::PI * rho * rho
}

/// Minimizer of `f`: `ρ*⁴ = λ₁(B₁)/(μ·det(ā)^{1/2}·π)`.
pub fn ellipsoid_minimizer(
    abar: &HomogenizedTensor,
    mu: f64,
    center: [f64; 2],
) -> Result<EllipsoidMinimizer> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    let rho = (LAMBDA_UNIT_DISK / (mu * abar.det_abar.sqrt() * std::f64::consts::PI)).powf(0.25);
    Ok(EllipsoidMinimizer {
        ellipsoid: Ellipsoid::new(center, abar.abar, rho)?,
        energy: ellipsoid_energy(abar, mu, rho),
    })
}

/// The multiplier whose ellipsoid minimizer has volume `m`:
/// `μ = λ₁(B₁)·π·det(ā)^{1/2}/m²`.
pub fn mu_for_volume(abar: &HomogenizedTensor, m: f64) -> f64 {
    LAMBDA_UNIT_DISK * std::f64::consts::PI * abar.det_abar.sqrt() / (m * m)
}

/// Window around the ellipsoid minimizer, `window_factor` semi-axes wide
/// on each side.
fn window_for(e: &Ellipsoid, h: f64, window_factor: f64) -> Frame {
    let ext = e.half_extent();
    e.frame_with_margin(h, window_factor * ext[0].max(ext[1]) + 2.0 * h)
}

/// Shared settings for the multiplier-level experiments.
#[derive(Debug)]
pub struct ShapeProblem<'a, C: Coefficients + ?Sized> {
    pub a: &'a C,
    pub abar: HomogenizedTensor,
    pub h: f64,
    /// Center of ellipsoid initializations.
    pub center: [f64; 2],
    pub eig: EigenOptions,
    pub opt: OptOptions,
    /// Volume drops beyond the smooth scaling prediction larger than this
    /// fraction are flagged as jumps.
    pub jump_frac: f64,
}

impl<C: Coefficients + ?Sized> Clone for ShapeProblem<'_, C> {
    fn clone(&self) -> Self {
        ShapeProblem {
            a: self.a,
            abar: self.abar,
            h: self.h,
            center: self.center,
            eig: self.eig.clone(),
            opt: self.opt.clone(),
            jump_frac: self.jump_frac,
        }
    }
}

impl<'a, C: Coefficients + ?Sized> ShapeProblem<'a, C> {
    pub fn new(a: &'a C, abar: HomogenizedTensor, h: f64) -> Self {
        ShapeProblem {
            a,
            abar,
            h,
            center: [0.0, 0.0],
            eig: EigenOptions::default(),
            opt: OptOptions::default(),
            jump_frac: 0.05,
        }
    }

    /// Rasterized ellipsoid minimizer in a window sized for it.
    pub fn initial_mask(&self, mu: f64) -> Result<DomainMask> {
        let e = ellipsoid_minimizer(&self.abar, mu, self.center)?.ellipsoid;
        e.rasterize(window_for(&e, self.h, self.opt.window_factor), self.h)
    }

    /// `prev` (a minimizer at `mu_prev`) dilated by `(μ_prev/μ)^{1/4}` about
    /// its barycenter, in a window sized for `mu`.
    pub fn rescaled_start(&self, prev: &DomainMask, mu_prev: f64, mu: f64) -> Result<DomainMask> {
        let about = prev.barycenter().ok_or(Error::EmptyDomain)?;
        let factor = (mu_prev / mu).powf(0.25);
        let e = ellipsoid_minimizer(&self.abar, mu, about)?.ellipsoid;
        prev.rescaled(about, factor, window_for(&e, self.h, self.opt.window_factor))
    }

    /// Discrete `J_μ` of a mask.
    pub fn energy(&self, mu: f64, mask: &DomainMask) -> Result<f64> {
        Ok(eigen_with_guess(self.a, mask, 1, &self.eig, None)?.lambda1 + mu * mask.volume())
    }

    /// The lower-energy start among the ellipsoid minimizer and, when
    /// given, the previous minimizer rescaled to `mu`.
    pub fn best_start(&self, mu: f64, prev: Option<(&DomainMask, f64)>) -> Result<DomainMask> {
        let fresh = self.initial_mask(mu)?;
        let Some((mask, mu_prev)) = prev else {
            return Ok(fresh);
        };
        let warm = self.rescaled_start(mask, mu_prev, mu)?;
        if self.energy(mu, &warm)? < self.energy(mu, &fresh)? {
            Ok(warm)
        } else {
            Ok(fresh)
        }
    }

    /// `minimize_j` with a constant multiplier, from `init` or the
    /// ellipsoid minimizer.
    pub fn optimize(&self, mu: f64, init: Option<&DomainMask>) -> Result<OptResult> {
        let start = match init {
            Some(m) => m.clone(),
            None => self.initial_mask(mu)?,
        };
        minimize_j(self.a, Penalty::Constant(mu), &start, &self.eig, &self.opt)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VolumeRow {
    pub mu: f64,
    pub volume: f64,
    pub energy: f64,
    pub lambda1: f64,
    pub perimeter: f64,
    pub converged: bool,
    #[serde(skip)]
    pub mask: DomainMask,
}

#[derive(Debug, Clone, Serialize)]
pub struct VolumeMapScan {
    /// Rows sorted by increasing `μ`.
    pub rows: Vec<VolumeRow>,
    /// `[μ_k, μ_{k+1}]` intervals with a flagged volume jump.
    pub detected_jumps: Vec<[f64; 2]>,
    pub h: f64,
}

impl VolumeMapScan {
    fn detect(&mut self, jump_frac: f64) {
        self.detected_jumps.clear();
        for w in self.rows.windows(2) {
            let predicted = w[0].volume * (w[0].mu / w[1].mu).sqrt();
            if predicted - w[1].volume > jump_frac * w[0].volume {
                self.detected_jumps.push([w[0].mu, w[1].mu]);
            }
        }
    }

    /// Checks that volumes do not increase with `μ` beyond `2h·perimeter`.
    pub fn check_monotone(&self) -> Result<()> {
        for w in self.rows.windows(2) {
            let tol = 2.0 * self.h * w[0].perimeter.max(w[1].perimeter);
            if w[1].volume > w[0].volume + tol {
                return Err(Error::OptimizerFailure(format!(
                    "volume increases from {} at mu = {} to {} at mu = {} (tolerance {tol})",
                    w[0].volume, w[0].mu, w[1].volume, w[1].mu
                )));
            }
        }
        Ok(())
    }

    fn insert(&mut self, row: VolumeRow) {
        let pos = self.rows.partition_point(|r| r.mu < row.mu);
        self.rows.insert(pos, row);
    }
}

fn volume_row(mu: f64, res: OptResult) -> VolumeRow {
    VolumeRow {
        mu,
        volume: res.mask.volume(),
        energy: res.energy,
        lambda1: res.lambda1,
        perimeter: res.mask.perimeter(),
        converged: res.converged,
        mask: res.mask,
    }
}

/// Runs `minimize_j` over an increasing `μ` grid, starting each point from
/// the better of the previous minimizer rescaled and the ellipsoid
/// minimizer, and checks volume monotonicity.
pub fn volume_map<C: Coefficients + ?Sized>(
    problem: &ShapeProblem<'_, C>,
    mu_grid: &[f64],
) -> Result<VolumeMapScan> {
    if mu_grid.is_empty() {
        return Err(Error::InvalidParameter("empty mu grid".into()));
    }
    if mu_grid.iter().any(|&m| !(m > 0.0 && m.is_finite()))
        || mu_grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidParameter(
            "mu grid must be positive and strictly increasing".into(),
        ));
    }
    let mut scan = VolumeMapScan {
        rows: Vec::new(),
        detected_jumps: Vec::new(),
        h: problem.h,
    };
    for (k, &mu) in mu_grid.iter().enumerate() {
        let prev = k.checked_sub(1).map(|i| (&scan.rows[i].mask, scan.rows[i].mu));
        let init = problem.best_start(mu, prev)?;
        let res = problem.optimize(mu, Some(&init))?;
        scan.rows.push(volume_row(mu, res));
    }
    scan.check_monotone()?;
    scan.detect(problem.jump_frac);
    Ok(scan)
}

/// Outcome of [`select_mu`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MuSelection {
    pub mu: f64,
    /// `m` falls inside a volume jump that bisection could not resolve.
    pub singular: bool,
    /// Final bracket `[μ_lo, μ_hi]` with `Vol(μ_hi) ≤ m ≤ Vol(μ_lo)`.
    pub bracket: [f64; 2],
}

/// Finds `μ*` whose minimizer has volume `m` by safeguarded log-log
/// interpolation, adding the refinement points to `scan`.
pub fn select_mu<C: Coefficients + ?Sized>(
    problem: &ShapeProblem<'_, C>,
    scan: &mut VolumeMapScan,
    m: f64,
) -> Result<MuSelection> {
    const MAX_BISECT: usize = 8;
    let tol_of = |r: &VolumeRow| 1e-12 * r.volume.max(1.0);
    for r in &scan.rows {
        if (r.volume - m).abs() <= tol_of(r) {
            return Ok(MuSelection { mu: r.mu, singular: false, bracket: [r.mu, r.mu] });
        }
    }
    let bracket_of = |scan: &VolumeMapScan| {
        scan.rows
            .windows(2)
            .position(|w| w[0].volume >= m && m >= w[1].volume)
    };
    let Some(mut k) = bracket_of(scan) else {
        let (lo, hi) = scan.rows.iter().fold((f64::MAX, f64::MIN), |(lo, hi), r| {
            (lo.min(r.volume), hi.max(r.volume))
        });
        return Err(Error::OutOfRange(format!(
            "target volume {m} outside the scanned range [{lo}, {hi}]"
        )));
    };
    let interpolate = |lo: &VolumeRow, hi: &VolumeRow, clamp: f64| {
        let (a, b) = (lo.mu.ln(), hi.mu.ln());
        let t = ((lo.volume.ln() - m.ln()) / (lo.volume.ln() - hi.volume.ln()))
            .clamp(clamp, 1.0 - clamp);
        (a + t * (b - a)).exp()
    };
    for _ in 0..MAX_BISECT {
        let (lo, hi) = (&scan.rows[k], &scan.rows[k + 1]);
        if lo.volume - hi.volume <= 0.5 * problem.h * lo.perimeter.max(hi.perimeter) {
            break;
        }
        let mid = interpolate(lo, hi, 0.2);
        let init = problem.best_start(mid, Some((&lo.mask, lo.mu)))?;
        let res = problem.optimize(mid, Some(&init))?;
        scan.insert(volume_row(mid, res));
        scan.detect(problem.jump_frac);
        match bracket_of(scan) {
            Some(next) => k = next,
            None => {
                return Err(Error::OptimizerFailure(
                    "volume map lost monotonicity during bisection".into(),
                ))
            }
        }
    }
    let (lo, hi) = (&scan.rows[k], &scan.rows[k + 1]);
    let resolution = 2.0 * problem.h * lo.perimeter.max(hi.perimeter);
    Ok(MuSelection {
        mu: interpolate(lo, hi, 0.0),
        singular: lo.volume - hi.volume > resolution.max(problem.jump_frac * lo.volume),
        bracket: [lo.mu, hi.mu],
    })
}

/// Quantities controlled by the replacement of `U` with `Ω*`.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub mu_star: f64,
    pub singular: bool,
    pub volume_u: f64,
    pub volume_omega: f64,
    pub lambda_u: f64,
    pub lambda_omega: f64,
    /// `m·|λ₁(U, a) − λ₁(Ω*, a)|`.
    pub eigen_closeness: f64,
    /// `|UΔΩ*|/m`.
    pub measure_closeness: f64,
    /// `dist_ω(Ω*, U)/|U|`.
    pub dist_omega_scaled: f64,
    pub energy_g: f64,
    pub iterations: usize,
    pub hypotheses: PenaltyHypotheses,
    pub regularity: RegularityReport,
}

/// Replaces `U` by a `J_g` minimizer `Ω*`: selects `μ*` with
/// `Vol(μ*) ∋ |U|`, builds `g` around `U`, minimizes `J_g` from `U` and from
/// the ellipsoid minimizer at `μ*`, and keeps the lower energy.
pub fn hard_constraint_pipeline<C: Coefficients + ?Sized>(
    problem: &ShapeProblem<'_, C>,
    u: &DomainMask,
    p: f64,
    gamma0: f64,
) -> Result<(DomainMask, PipelineReport)> {
    if u.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let m = u.volume();
    let center = u.barycenter().ok_or(Error::EmptyDomain)?;
    let local = ShapeProblem { center, ..problem.clone() };
    let mu0 = mu_for_volume(&problem.abar, m);
    let grid: Vec<f64> = [-2.0, -1.0, 0.0, 1.0, 2.0]
        .iter()
        .map(|&k| mu0 * 2f64.powf(0.25 * k))
        .collect();
    let mut scan = volume_map(&local, &grid)?;
    let sel = select_mu(&local, &mut scan, m)?;

    let g = build_penalty(u, sel.mu, p, gamma0)?;
    let e = ellipsoid_minimizer(&problem.abar, sel.mu, center)?.ellipsoid;
    let window = window_for(&e, problem.h, problem.opt.window_factor).union(&u.frame()?.pad(2));
    let mut res: Option<OptResult> = None;
    for init in [u.reframe(window)?, local.initial_mask(sel.mu)?.reframe(window)?] {
        let r = minimize_j(problem.a, Penalty::Field(&g), &init, &problem.eig, &problem.opt)?;
        if res.as_ref().is_none_or(|b| r.energy < b.energy) {
            res = Some(r);
        }
    }
    let res = res.ok_or(Error::EmptyDomain)?;

    let lambda_u = eigen_with_guess(problem.a, u, 1, &problem.eig, None)?.lambda1;
    let omega_star = res.mask.clone();
    let report = PipelineReport {
        mu_star: sel.mu,
        singular: sel.singular,
        volume_u: m,
        volume_omega: omega_star.volume(),
        lambda_u,
        lambda_omega: res.lambda1,
        eigen_closeness: m * (lambda_u - res.lambda1).abs(),
        measure_closeness: u.symmetric_difference_volume(&omega_star)? / m,
        dist_omega_scaled: dist_omega(&omega_star, u, p, gamma0)? / m,
        energy_g: res.energy,
        iterations: res.iterations(),
        hypotheses: *g.hypotheses(),
        regularity: density_report_with(&omega_star, DensityOptions::default(), Some(u))?,
    };
    Ok((omega_star, report))
}

/// `|U|·(J_μ(U, a) − best_known)`: an upper surrogate for the scaled
/// energy deficit, exact up to the suboptimality of `best_known`.
pub fn energy_deficit<C: Coefficients + ?Sized>(
    a: &C,
    u: &DomainMask,
    mu: f64,
    best_known: f64,
    eig: &EigenOptions,
) -> Result<f64> {
    let lambda = eigen_with_guess(a, u, 1, eig, None)?.lambda1;
    Ok(u.volume() * (lambda + mu * u.volume() - best_known))
}
