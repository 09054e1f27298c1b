//! Lowest Dirichlet eigenpairs of `−∇·(a∇·)` on masks and the scale
//! invariant eigenfunction diagnostics.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::coeff::Coefficients;
use crate::config::EigenOptions;
use crate::error::{Error, Result};
use crate::geometry::DomainMask;
use crate::operator::{assemble_dirichlet, MaskedOperator};
use crate::sparse::{dot, norm, pcg, Multigrid, Preconditioner};

/// Masks with at most this many cells are solved densely.
const DENSE_LIMIT: usize = 400;

#[derive(Debug, Clone, Serialize)]
pub struct EigenResult {
    pub lambda1: f64,
    pub lambda2: Option<f64>,
    /// Principal eigenfunction on the mask window (row-major, zero off the
    /// mask), nonnegative, with `h²·Σu² = 1`.
    pub u: Vec<f64>,
    /// Second eigenfunction, orthogonal to `u`, when `k = 2`.
    pub u2: Option<Vec<f64>>,
    /// Largest relative residual `‖Ku − λMu‖/(λ‖Mu‖)` over the returned pairs.
    pub residual: f64,
    pub iterations: usize,
    pub h: f64,
}

impl EigenResult {
    /// `vᵀMw` with the `h²` mass weight.
    pub fn inner(&self, v: &[f64], w: &[f64]) -> f64 {
        self.h * self.h * dot(v, w)
    }

    pub fn max_u(&self) -> f64 {
        self.u.iter().cloned().fold(0.0, f64::max)
    }
}

/// Scale-invariant eigenfunction quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenDiagnostics {
    /// `|U|·max|∇u|`.
    pub lip_scaled: f64,
    /// `min |U|·sup_{B_r(x)} u / r` over sampled boundary cells `x` and
    /// dyadic radii `2h ≤ r ≤ |U|^{1/2}`; a sampled upper estimate of the
    /// infimum over all boundary points.
    pub nondeg_scaled: f64,
    /// `|U|^{1/2}·max u`.
    pub sup_scaled: f64,
}

pub fn eigen<C: Coefficients + ?Sized>(
    a: &C,
    mask: &DomainMask,
    k: usize,
    opts: &EigenOptions,
) -> Result<EigenResult> {
    eigen_with_guess(a, mask, k, opts, None)
}

/// As [`eigen`], starting from `guess` (a window grid function) when given.
pub fn eigen_with_guess<C: Coefficients + ?Sized>(
    a: &C,
    mask: &DomainMask,
    k: usize,
    opts: &EigenOptions,
    guess: Option<&[f64]>,
) -> Result<EigenResult> {
    if !(k == 1 || k == 2) {
        return Err(Error::InvalidParameter(format!("k must be 1 or 2, got {k}")));
    }
    if mask.is_empty() {
        return Err(Error::EmptyDomain);
    }
    if let Some(g) = guess {
        if g.len() != mask.nx() * mask.ny() {
            return Err(Error::GridMismatch("initial guess does not match the window".into()));
        }
    }
    let op = assemble_dirichlet(a, mask)?;
    let n = op.len();
    if n < k {
        return Err(Error::InvalidParameter(format!(
            "mask has {n} cells, cannot compute {k} eigenpairs"
        )));
    }
    let (mut vals, mut vecs, iterations) = if n <= DENSE_LIMIT {
        dense_pairs(&op, k)
    } else {
        iterate(&op, mask, k, opts, guess)?
    };
    finish(&op, &mut vals, &mut vecs, iterations, k)
}

fn dense_pairs(op: &MaskedOperator, k: usize) -> (Vec<f64>, Vec<Vec<f64>>, usize) {
    let n = op.len();
    let h2 = op.h * op.h;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for p in op.k.row_ptr[i]..op.k.row_ptr[i + 1] {
            m[(i, op.k.col[p])] = op.k.val[p] / h2;
        }
    }
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let take = (k + 1).min(n);
    let vals = order[..take].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = order[..take]
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().cloned().collect())
        .collect();
    (vals, vecs, 1)
}

/// Rayleigh–Ritz on the span of `x`: returns Ritz values (ascending) and
/// replaces `x` with `M`-orthonormal Ritz vectors.
fn rayleigh_ritz(op: &MaskedOperator, x: &mut Vec<Vec<f64>>) -> Result<Vec<f64>> {
    let h2 = op.h * op.h;
    let b = x.len();
    let n = op.len();
    let kx: Vec<Vec<f64>> = x
        .iter()
        .map(|v| {
            let mut y = vec![0.0; n];
            op.k.matvec(v, &mut y);
            y
        })
        .collect();
    let mut am = DMatrix::<f64>::zeros(b, b);
    let mut bm = DMatrix::<f64>::zeros(b, b);
    for i in 0..b {
        for j in 0..b {
            am[(i, j)] = dot(&x[i], &kx[j]);
            bm[(i, j)] = h2 * dot(&x[i], &x[j]);
        }
    }
    am = 0.5 * (&am + am.transpose());
    bm = 0.5 * (&bm + bm.transpose());
    let chol = nalgebra::Cholesky::new(bm).ok_or_else(|| {
        Error::Inconsistent("eigen iteration basis became linearly dependent".into())
    })?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Inconsistent("singular Gram factor".into()))?;
    let c = &linv * &am * linv.transpose();
    let c = 0.5 * (&c + c.transpose());
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..b).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[q]));
    let coef = linv.transpose() * &eig.eigenvectors;
    let mut out = vec![vec![0.0; n]; b];
    for (slot, &col) in order.iter().enumerate() {
        for r in 0..b {
            let w = coef[(r, col)];
            if w != 0.0 {
                for t in 0..n {
                    out[slot][t] += w * x[r][t];
                }
            }
        }
    }
    *x = out;
    Ok(order.iter().map(|&i| eig.eigenvalues[i]).collect())
}

fn relative_residual(op: &MaskedOperator, lambda: f64, v: &[f64]) -> f64 {
    let h2 = op.h * op.h;
    let mut kv = vec![0.0; v.len()];
    op.k.matvec(v, &mut kv);
    let r: f64 = kv
        .iter()
        .zip(v)
        .map(|(a, b)| (a - lambda * h2 * b).powi(2))
        .sum::<f64>()
        .sqrt();
    r / (lambda.abs() * h2 * norm(v)).max(f64::MIN_POSITIVE)
}

fn initial_block(
    op: &MaskedOperator,
    mask: &DomainMask,
    b: usize,
    guess: Option<&[f64]>,
    prec: &mut dyn Preconditioner,
    opts: &EigenOptions,
) -> Vec<Vec<f64>> {
    let n = op.len();
    let base: Vec<f64> = match guess {
        Some(g) => {
            let v: Vec<f64> = op.gather(g).iter().map(|x| x.abs()).collect();
            if v.iter().any(|&x| x > 0.0) {
                v
            } else {
                vec![1.0; n]
            }
        }
        None => {
            // torsion function: K t = h²·1
            let rhs = vec![op.h * op.h; n];
            let mut t = vec![0.0; n];
            let _ = pcg(&op.k, &rhs, &mut t, prec, 1e-6, opts.cg_max_iter, false);
            t
        }
    };
    let nx = mask.nx();
    let coords: Vec<[f64; 2]> = op.cells.iter().map(|&c| mask.center(c % nx, c / nx)).collect();
    let mean = coords.iter().fold([0.0, 0.0], |s, c| [s[0] + c[0], s[1] + c[1]]);
    let mean = [mean[0] / n as f64, mean[1] / n as f64];
    let mut block = vec![base.clone()];
    let shapes: [&dyn Fn([f64; 2]) -> f64; 3] = [
        &|c| c[0] - mean[0],
        &|c| c[1] - mean[1],
        &|c| (c[0] - mean[0]) * (c[1] - mean[1]),
    ];
    for s in shapes.iter().take(b - 1) {
        block.push(base.iter().zip(&coords).map(|(v, &c)| v * s(c)).collect());
    }
    // guard against degenerate columns (symmetric masks)
    for (j, col) in block.iter_mut().enumerate().skip(1) {
        let scale = norm(col);
        if scale < 1e-8 * norm(&base) {
            for (t, v) in col.iter_mut().enumerate() {
                *v = ((t * (j + 3)) as f64 * 0.618_033_988_75).fract() - 0.5;
            }
        }
    }
    block
}

fn iterate(
    op: &MaskedOperator,
    mask: &DomainMask,
    k: usize,
    opts: &EigenOptions,
    guess: Option<&[f64]>,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, usize)> {
    let n = op.len();
    let b = (k + 1).min(n);
    let h2 = op.h * op.h;
    let mut mg = Multigrid::new(&op.k, &op.layout);
    let mut x = initial_block(op, mask, b, guess, &mut mg, opts);
    let mut worst = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let theta = rayleigh_ritz(op, &mut x)?;
        worst = (0..k)
            .map(|i| relative_residual(op, theta[i], &x[i]))
            .fold(0.0, f64::max);
        if worst <= opts.tol {
            return Ok((theta, x, it));
        }
        let inner_tol = (0.1 * worst).clamp(opts.cg_tol, 1e-2);
        for (i, col) in x.iter_mut().enumerate() {
            let rhs: Vec<f64> = col.iter().map(|v| h2 * v).collect();
            let th = theta[i].max(f64::MIN_POSITIVE);
            let mut y: Vec<f64> = col.iter().map(|v| v / th).collect();
            let out = pcg(&op.k, &rhs, &mut y, &mut mg, inner_tol, opts.cg_max_iter, false);
            if !out.rel_residual.is_finite() {
                return Err(Error::NotConverged {
                    what: "eigen inner solve",
                    iterations: out.iterations,
                    residual: out.rel_residual,
                });
            }
            let s = norm(&y);
            *col = y.iter().map(|v| v / s).collect();
        }
    }
    Err(Error::NotConverged {
        what: "eigen iteration",
        iterations: opts.max_iter,
        residual: worst,
    })
}

/// Sign normalization, cluster handling and the positivity certificate.
fn finish(
    op: &MaskedOperator,
    vals: &mut [f64],
    vecs: &mut [Vec<f64>],
    iterations: usize,
    k: usize,
) -> Result<EigenResult> {
    let h = op.h;
    let normalize = |v: &mut Vec<f64>| {
        let s = h * norm(v);
        v.iter_mut().for_each(|x| *x /= s);
    };
    for v in vecs.iter_mut() {
        normalize(v);
    }
    let negative_part = |v: &[f64]| {
        let max = v.iter().cloned().fold(0.0, f64::max);
        let min = v.iter().cloned().fold(0.0, f64::min);
        (min, max)
    };
    let flip = |v: &mut Vec<f64>| {
        if v.iter().sum::<f64>() < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    };
    flip(&mut vecs[0]);
    let (min, max) = negative_part(&vecs[0]);
    let clustered = vecs.len() > 1 && (vals[1] - vals[0]) <= 1e-3 * vals[0].abs();
    if min < -1e-6 * max && clustered {
        // near-degenerate ground state: rotate toward the positive combination
        let c0: f64 = vecs[0].iter().sum();
        let c1: f64 = vecs[1].iter().sum();
        let r = c0.hypot(c1);
        let (p, q) = (c0 / r, c1 / r);
        let v0: Vec<f64> = vecs[0].iter().zip(&vecs[1]).map(|(a, b)| p * a + q * b).collect();
        let v1: Vec<f64> = vecs[0].iter().zip(&vecs[1]).map(|(a, b)| -q * a + p * b).collect();
        let l0 = p * p * vals[0] + q * q * vals[1];
        let l1 = q * q * vals[0] + p * p * vals[1];
        vecs[0] = v0;
        vecs[1] = v1;
        vals[0] = l0;
        vals[1] = l1;
        flip(&mut vecs[0]);
    }
    let (min, max) = negative_part(&vecs[0]);
    if min < -1e-6 * max {
        return Err(Error::Inconsistent(format!(
            "principal eigenfunction has negative values (min {min:.3e}, max {max:.3e})"
        )));
    }
    vecs[0].iter_mut().for_each(|x| *x = x.max(0.0));
    normalize(&mut vecs[0]);
    let mut kv = vec![0.0; op.len()];
    op.k.matvec(&vecs[0], &mut kv);
    let lambda1 = dot(&vecs[0], &kv) / (h * h * dot(&vecs[0], &vecs[0]));
    let mut residual = relative_residual(op, lambda1, &vecs[0]);
    let (lambda2, u2) = if k == 2 {
        let u0 = vecs[0].clone();
        let v = &mut vecs[1];
        let c = dot(v, &u0) / dot(&u0, &u0);
        v.iter_mut().zip(&u0).for_each(|(x, y)| *x -= c * y);
        normalize(v);
        let mut kv = vec![0.0; op.len()];
        op.k.matvec(v, &mut kv);
        let l2 = dot(v, &kv) / (h * h * dot(v, v));
        residual = residual.max(relative_residual(op, l2, v));
        (Some(l2.max(lambda1)), Some(op.scatter(v)))
    } else {
        (None, None)
    };
    Ok(EigenResult {
        lambda1,
        lambda2,
        u: op.scatter(&vecs[0]),
        u2,
        residual,
        iterations,
        h,
    })
}

/// `vᵀKv / (h²·vᵀv)` for a window grid function supported in the mask.
pub fn rayleigh_quotient<C: Coefficients + ?Sized>(
    a: &C,
    mask: &DomainMask,
    v: &[f64],
) -> Result<f64> {
    if v.len() != mask.nx() * mask.ny() {
        return Err(Error::GridMismatch(format!(
            "grid function has {} values, window has {}",
            v.len(),
            mask.nx() * mask.ny()
        )));
    }
    for (k, &occ) in mask.cells().iter().enumerate() {
        if !occ && v[k] != 0.0 {
            return Err(Error::InvalidParameter(
                "trial function is not supported in the mask".into(),
            ));
        }
    }
    let op = assemble_dirichlet(a, mask)?;
    let x = op.gather(v);
    let den = op.h * op.h * dot(&x, &x);
    if den == 0.0 {
        return Err(Error::InvalidParameter("trial function vanishes".into()));
    }
    Ok(op.k.bilinear(&x, &x) / den)
}

/// Gradient magnitude per occupied cell: central differences inside,
/// one-sided toward a Dirichlet face (`2u/h`) where a neighbor is empty.
pub fn gradient_magnitude(u: &[f64], mask: &DomainMask) -> Vec<f64> {
    let (nx, ny) = (mask.nx(), mask.ny());
    let h = mask.h();
    let val = |i: i64, j: i64| -> Option<f64> {
        mask.get_signed(i, j).then(|| u[j as usize * nx + i as usize])
    };
    let mut g = vec![0.0; nx * ny];
    for (i, j) in mask.occupied_cells() {
        let (i, j) = (i as i64, j as i64);
        let c = u[j as usize * nx + i as usize];
        let comp = |lo: Option<f64>, hi: Option<f64>| -> f64 {
            match (lo, hi) {
                (Some(l), Some(r)) => (r - l) / (2.0 * h),
                (None, Some(_)) | (Some(_), None) | (None, None) => 2.0 * c / h,
            }
        };
        let gx = comp(val(i - 1, j), val(i + 1, j));
        let gy = comp(val(i, j - 1), val(i, j + 1));
        g[j as usize * nx + i as usize] = gx.hypot(gy);
    }
    g
}

pub fn diagnostics(res: &EigenResult, mask: &DomainMask) -> Result<EigenDiagnostics> {
    if mask.is_empty() {
        return Err(Error::EmptyDomain);
    }
    if res.u.len() != mask.nx() * mask.ny() {
        return Err(Error::GridMismatch("eigenfunction does not match the window".into()));
    }
    let vol = mask.volume();
    let h = mask.h();
    let nx = mask.nx();
    let grad = gradient_magnitude(&res.u, mask);
    let max_grad = grad.iter().cloned().fold(0.0, f64::max);
    let boundary = mask.boundary_cells();
    let samples: Vec<(usize, usize)> = if boundary.len() <= 256 {
        boundary
    } else {
        (0..256).map(|k| boundary[k * boundary.len() / 256]).collect()
    };
    let r_max = vol.sqrt();
    let mut radii = Vec::new();
    let mut r = 2.0 * h;
    while r <= r_max * (1.0 + 1e-12) {
        radii.push(r);
        r *= 2.0;
    }
    if radii.is_empty() {
        radii.push(r_max);
    }
    let mut nondeg = f64::INFINITY;
    for &(i, j) in &samples {
        // growing radii reuse the running supremum
        let mut best = 0.0f64;
        let mut prev_w: i64 = -1;
        for &r in &radii {
            let w = (r / h).floor() as i64;
            let rr = (r / h) * (r / h);
            for dj in -w..=w {
                for di in -w..=w {
                    let d2 = (di * di + dj * dj) as f64;
                    if d2 >= rr {
                        continue;
                    }
                    if di.abs().max(dj.abs()) <= prev_w / 2 {
                        continue;
                    }
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if mask.get_signed(ii, jj) {
                        best = best.max(res.u[jj as usize * nx + ii as usize]);
                    }
                }
            }
            prev_w = w;
            nondeg = nondeg.min(vol * best / r);
        }
    }
    Ok(EigenDiagnostics {
        lip_scaled: vol * max_grad,
        nondeg_scaled: nondeg,
        sup_scaled: vol.sqrt() * res.max_u(),
    })
}

/// Outcome of the spectral-gap stability check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapCheck {
    /// `R(v)/λ₁ − 1`.
    pub delta: f64,
    /// `min_{s=±1} ‖v − s·u‖`.
    pub dist: f64,
    /// `λ₂/λ₁ − 1`.
    pub gap: f64,
    /// `gap·dist²`.
    pub lhs: f64,
    /// `4δ`.
    pub rhs: f64,
    pub holds: bool,
    /// The gap is below `1e-8`, so the inequality carries no information.
    pub degenerate_gap: bool,
}

/// Checks `(λ₂/λ₁ − 1)·min_s‖v − s·u‖² ≤ 4(R(v)/λ₁ − 1)` for a unit-norm
/// trial function `v` supported in the mask; `res` must carry `k = 2` pairs.
pub fn gap_stability_check<C: Coefficients + ?Sized>(
    a: &C,
    mask: &DomainMask,
    res: &EigenResult,
    v: &[f64],
) -> Result<GapCheck> {
    let lambda2 = res
        .lambda2
        .ok_or_else(|| Error::InvalidParameter("gap check needs k = 2 eigenpairs".into()))?;
    let nv = res.inner(v, v).sqrt();
    if (nv - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!(
            "trial function must have unit norm, got {nv}"
        )));
    }
    let rq = rayleigh_quotient(a, mask, v)?;
    let delta = rq / res.lambda1 - 1.0;
    let dist_sq = |s: f64| -> f64 {
        let d: Vec<f64> = v.iter().zip(&res.u).map(|(x, y)| x - s * y).collect();
        res.inner(&d, &d)
    };
    let dist = dist_sq(1.0).min(dist_sq(-1.0)).sqrt();
    let gap = lambda2 / res.lambda1 - 1.0;
    let lhs = gap * dist * dist;
    let rhs = 4.0 * delta;
    Ok(GapCheck {
        delta,
        dist,
        gap,
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12 * (1.0 + rhs.abs()),
        degenerate_gap: gap < 1e-8,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Sym2;

    #[test]
    fn small_square_dense_matches_closed_form() {
        // n × n square with face Dirichlet: λ = (4/h²)(sin²(π/2n)·2)
        let n = 10;
        let h = 1.0 / n as f64;
        let m = DomainMask::from_fn(n, n, h, [0.0, 0.0], |_| true).unwrap();
        let r = eigen(&Sym2::IDENTITY, &m, 2, &EigenOptions::default()).unwrap();
        // ghost-reflection Dirichlet: eigenvalues of the 1-D matrix with
        // 3 on the end diagonals are (4/h²) sin²(kπ/(2n))
        let s = (std::f64::consts::PI / (2.0 * n as f64)).sin();
        let exact = 2.0 * 4.0 * s * s / (h * h);
        assert!((r.lambda1 - exact).abs() < 1e-10 * exact, "{} {}", r.lambda1, exact);
        assert!(r.u.iter().all(|&v| v >= 0.0));
        assert!(r.lambda2.unwrap() >= r.lambda1);
    }

    #[test]
    fn iterative_matches_dense() {
        let h = 1.0 / 14.0;
        let m = DomainMask::around([0.0, 0.0], 1.2, h, |x| x[0].hypot(x[1]) < 1.0).unwrap();
        assert!(m.count() > DENSE_LIMIT);
        let opts = EigenOptions::default();
        let r = eigen(&Sym2::IDENTITY, &m, 2, &opts).unwrap();
        let op = assemble_dirichlet(&Sym2::IDENTITY, &m).unwrap();
        let (vals, _, _) = dense_pairs(&op, 2);
        assert!((r.lambda1 - vals[0]).abs() < 1e-7 * vals[0]);
        assert!((r.lambda2.unwrap() - vals[1]).abs() < 1e-6 * vals[1]);
        let nrm = r.inner(&r.u, &r.u);
        assert!((nrm - 1.0).abs() < 1e-10);
    }
}
