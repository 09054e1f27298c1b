//! Periodic corrector problems, the homogenized matrix, and the corrected
//! two-scale trial field on an ellipsoid.

use serde::Serialize;

use crate::coeff::{CoeffField, Coefficients};
use crate::error::{Error, Result};
use crate::geometry::{DomainMask, Ellipsoid};
use crate::linalg::Sym2;
use crate::eigen::rayleigh_quotient;
use crate::operator::{assemble_torus, torus_bilinear, torus_rhs};
use crate::special::{bessel_j0, bessel_j1, J01};
use crate::sparse::{norm, pcg, Jacobi};

/// Periodic mean-zero correctors for two directions `q₁`, `q₂`.
#[derive(Debug, Clone)]
pub struct CorrectorSet {
    n: usize,
    basis: [[f64; 2]; 2],
    /// `χ_{q_k}` on the `n × n` cell-center grid, in length units.
    chi: [Vec<f64>; 2],
    residual_norms: [f64; 2],
    iterations: [usize; 2],
}

impl CorrectorSet {
    pub fn cells_per_period(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> [[f64; 2]; 2] {
        self.basis
    }

    pub fn chi(&self, k: usize) -> &[f64] {
        &self.chi[k]
    }

    /// Final relative residuals of the two solves.
    pub fn residual_norms(&self) -> [f64; 2] {
        self.residual_norms
    }

    pub fn iterations(&self) -> [usize; 2] {
        self.iterations
    }

    pub fn mean(&self, k: usize) -> f64 {
        self.chi[k].iter().sum::<f64>() / self.chi[k].len() as f64
    }

    /// `χ_q` for an arbitrary `q`, by linearity in the basis.
    pub fn combination(&self, q: [f64; 2]) -> Vec<f64> {
        let c = self.coordinates(q);
        self.chi[0]
            .iter()
            .zip(&self.chi[1])
            .map(|(a, b)| c[0] * a + c[1] * b)
            .collect()
    }

    fn coordinates(&self, q: [f64; 2]) -> [f64; 2] {
        let [b0, b1] = self.basis;
        let det = b0[0] * b1[1] - b1[0] * b0[1];
        [
            (q[0] * b1[1] - q[1] * b1[0]) / det,
            (b0[0] * q[1] - b0[1] * q[0]) / det,
        ]
    }

    /// Corrector value for `q` at global cell `(i, j)` (wrapped periodically).
    pub fn value(&self, q: [f64; 2], i: i64, j: i64) -> f64 {
        let n = self.n as i64;
        let k = (j.rem_euclid(n) * n + i.rem_euclid(n)) as usize;
        let c = self.coordinates(q);
        c[0] * self.chi[0][k] + c[1] * self.chi[1][k]
    }
}

/// The constant effective matrix `ā` with its derived quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomogenizedTensor {
    pub abar: Sym2,
    pub sqrt_abar: Sym2,
    pub det_abar: f64,
    /// `|ā₁₂ − ā₂₁|` before symmetrization.
    pub symmetry_discrepancy: f64,
}

impl HomogenizedTensor {
    /// Wraps an SPD matrix.
    pub fn new(abar: Sym2) -> Result<Self> {
        let (lo, hi) = abar.eigenvalues();
        if !(lo > 0.0) || !hi.is_finite() {
            return Err(Error::Ellipticity(format!(
                "matrix has eigenvalues ({lo}, {hi})"
            )));
        }
        Ok(HomogenizedTensor {
            abar,
            sqrt_abar: abar.sqrt(),
            det_abar: abar.det(),
            symmetry_discrepancy: 0.0,
        })
    }

    pub fn identity() -> Self {
        HomogenizedTensor::new(Sym2::IDENTITY).expect("identity is SPD")
    }

    pub fn to_rows(&self) -> [[f64; 2]; 2] {
        self.abar.to_rows()
    }
}

impl Coefficients for HomogenizedTensor {
    fn is_uniform(&self) -> bool {
        true
    }
    fn center(&self, _: i64, _: i64) -> Sym2 {
        self.abar
    }
    fn x_face(&self, _: i64, _: i64) -> Sym2 {
        self.abar
    }
    fn y_face(&self, _: i64, _: i64) -> Sym2 {
        self.abar
    }
    fn corner(&self, _: i64, _: i64) -> Sym2 {
        self.abar
    }
    fn check_spacing(&self, h: f64) -> Result<()> {
        self.abar.check_spacing(h)
    }
    fn is_diagonal(&self) -> bool {
        self.abar.xy == 0.0
    }
}

/// Solves the corrector equations for `e₁` and `e₂`.
pub fn solve_correctors(a: &CoeffField, tol: f64, max_iter: usize) -> Result<CorrectorSet> {
    solve_correctors_in_basis(a, [[1.0, 0.0], [0.0, 1.0]], tol, max_iter)
}

/// Solves `−∇·a(q + ∇χ_q) = 0` on the torus for two independent directions.
pub fn solve_correctors_in_basis(
    a: &CoeffField,
    basis: [[f64; 2]; 2],
    tol: f64,
    max_iter: usize,
) -> Result<CorrectorSet> {
    let n = a.cells_per_period();
    if n < 8 {
        return Err(Error::InvalidParameter(format!(
            "corrector grid needs at least 8 cells per period, got {n}"
        )));
    }
    let det = basis[0][0] * basis[1][1] - basis[1][0] * basis[0][1];
    if det.abs() < 1e-12 {
        return Err(Error::InvalidParameter("corrector basis is singular".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("corrector tolerance {tol}")));
    }
    let k = assemble_torus(a, n);
    let h = 1.0 / n as f64;
    let mut chi: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut residual_norms = [0.0; 2];
    let mut iterations = [0; 2];
    for d in 0..2 {
        let rhs = torus_rhs(a, n, basis[d]);
        let mut psi = vec![0.0; n * n];
        let mut prec = Jacobi::new(&k);
        let out = pcg(&k, &rhs, &mut psi, &mut prec, tol, max_iter, true);
        // true residual of the mean-zero system
        let mut r = vec![0.0; n * n];
        k.matvec(&psi, &mut r);
        let bn = norm(&rhs);
        let res = if bn > 0.0 {
            r.iter().zip(&rhs).map(|(x, b)| (b - x).powi(2)).sum::<f64>().sqrt() / bn
        } else {
            norm(&r)
        };
        if !out.converged {
            return Err(Error::NotConverged {
                what: "corrector solve",
                iterations: out.iterations,
                residual: res,
            });
        }
        let mean = psi.iter().sum::<f64>() / psi.len() as f64;
        chi[d] = psi.iter().map(|v| (v - mean) * h).collect();
        residual_norms[d] = res;
        iterations[d] = out.iterations;
    }
    Ok(CorrectorSet {
        n,
        basis,
        chi,
        residual_norms,
        iterations,
    })
}

/// Cell average of `(q + ∇φ)·a(q + ∇φ)` for a periodic grid function `φ`
/// (length units) on the field's grid.
pub fn cell_energy(a: &CoeffField, q: [f64; 2], phi: &[f64]) -> Result<f64> {
    let n = a.cells_per_period();
    if phi.len() != n * n {
        return Err(Error::GridMismatch(format!(
            "expected {} values, got {}",
            n * n,
            phi.len()
        )));
    }
    let psi: Vec<f64> = phi.iter().map(|v| v * n as f64).collect();
    Ok(torus_bilinear(a, n, q, &psi, q, &psi))
}

/// `ā_ij` = cell average of `(e_i + ∇χ_i)·a(e_j + ∇χ_j)`, symmetrized.
pub fn homogenize(a: &CoeffField, chi: &CorrectorSet) -> Result<HomogenizedTensor> {
    let n = a.cells_per_period();
    if chi.n != n {
        return Err(Error::GridMismatch(format!(
            "correctors on {} cells, field on {n}",
            chi.n
        )));
    }
    let scale = n as f64;
    let psi: Vec<Vec<f64>> = chi
        .chi
        .iter()
        .map(|c| c.iter().map(|v| v * scale).collect())
        .collect();
    let q = chi.basis;
    let mut b = [[0.0; 2]; 2];
    for k in 0..2 {
        for l in 0..2 {
            b[k][l] = torus_bilinear(a, n, q[k], &psi[k], q[l], &psi[l]);
        }
    }
    // b = Qᵀ ā Q with Q = [q₀ q₁] as columns; ā = Q⁻ᵀ b Q⁻¹.
    let qm = [[q[0][0], q[1][0]], [q[0][1], q[1][1]]];
    let det = qm[0][0] * qm[1][1] - qm[0][1] * qm[1][0];
    let inv = [
        [qm[1][1] / det, -qm[0][1] / det],
        [-qm[1][0] / det, qm[0][0] / det],
    ];
    let mut abar = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    abar[i][j] += inv[k][i] * b[k][l] * inv[l][j];
                }
            }
        }
    }
    let (sym, discrepancy) = Sym2::from_rows(abar);
    let lam = a.lambda_ell();
    let (lo, hi) = sym.eigenvalues();
    let slack = 1e-9 * lam;
    if lo < 1.0 / lam - slack || hi > lam + slack || !(lo > 0.0) {
        return Err(Error::Inconsistent(format!(
            "homogenized matrix eigenvalues ({lo}, {hi}) outside [{}, {lam}]",
            1.0 / lam
        )));
    }
    Ok(HomogenizedTensor {
        abar: sym,
        sqrt_abar: sym.sqrt(),
        det_abar: sym.det(),
        symmetry_discrepancy: discrepancy,
    })
}

/// Correctors plus `ā` in one call.
pub fn homogenized_tensor(a: &CoeffField, tol: f64, max_iter: usize) -> Result<HomogenizedTensor> {
    if a.kind().is_constant() {
        return HomogenizedTensor::new(a.center(0, 0));
    }
    let chi = solve_correctors(a, tol, max_iter)?;
    homogenize(a, &chi)
}

/// The corrected trial field on an ellipsoid and its Rayleigh quotient.
#[derive(Debug, Clone)]
pub struct CorrectedTrial {
    /// Rasterized ellipsoid carrying the field.
    pub mask: DomainMask,
    /// `ξ` on the mask window (zero off the mask).
    pub xi: Vec<f64>,
    /// `R(ξ) = ∫a∇ξ·∇ξ / ‖ξ‖²`.
    pub rayleigh: f64,
    /// Rayleigh quotient of the uncorrected `ū_E` (same operator).
    pub rayleigh_uncorrected: f64,
    /// Closed-form `λ₁(E, ā)`.
    pub lambda_ellipsoid: f64,
    /// `R(ξ)/λ₁(E, ā) − 1`.
    pub excess: f64,
    /// `excess · |E|^{1/4}`: the constant for which the bound is tight.
    pub measured_c: f64,
}

/// Builds `ξ = ū_E + ζ ∇ū_E·χ` on `E` and evaluates its Rayleigh quotient
/// for `a`. `t ∈ (0, 1)` is the width of the cutoff ramp as a fraction of
/// the normalized radius.
pub fn corrected_trial(
    e: &Ellipsoid,
    abar: &HomogenizedTensor,
    chi: &CorrectorSet,
    a: &CoeffField,
    t: f64,
) -> Result<CorrectedTrial> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter(format!("cutoff width {t} not in (0, 1)")));
    }
    if chi.n != a.cells_per_period() {
        return Err(Error::GridMismatch("correctors and field differ in resolution".into()));
    }
    let h = a.spacing();
    let mask = e.rasterize_auto(h)?;
    let (gi0, gj0) = mask.global_offset()?;
    let inv_sqrt = abar.sqrt_abar.inverse();
    let rho = e.rho();
    let c = e.center();
    let mut xi = vec![0.0; mask.nx() * mask.ny()];
    let mut ubar = vec![0.0; mask.nx() * mask.ny()];
    for (i, j) in mask.occupied_cells() {
        let x = mask.center(i, j);
        let y = inv_sqrt.mul_vec([x[0] - c[0], x[1] - c[1]]);
        let r = y[0].hypot(y[1]);
        let s = r / rho;
        let u = bessel_j0(J01 * s);
        // ∇ₓ ū = ā^{-1/2} ∇ᵧ v,  ∇ᵧ v = −(j/ρ) J₁(j s) y/|y|
        let gy = if r > 0.0 {
            let f = -(J01 / rho) * bessel_j1(J01 * s) / r;
            [f * y[0], f * y[1]]
        } else {
            [0.0, 0.0]
        };
        let g = inv_sqrt.mul_vec(gy);
        let zeta = ((1.0 - s) / t).clamp(0.0, 1.0);
        let (gi, gj) = (gi0 + i as i64, gj0 + j as i64);
        let corr = g[0] * chi.value([1.0, 0.0], gi, gj) + g[1] * chi.value([0.0, 1.0], gi, gj);
        let k = j * mask.nx() + i;
        ubar[k] = u;
        xi[k] = u + zeta * corr;
    }
    let rayleigh = rayleigh_quotient(a, &mask, &xi)?;
    let rayleigh_uncorrected = rayleigh_quotient(a, &mask, &ubar)?;
    let lambda_ellipsoid = e.lambda1();
    let excess = rayleigh / lambda_ellipsoid - 1.0;
    Ok(CorrectedTrial {
        measured_c: excess * e.volume().powf(0.25),
        mask,
        xi,
        rayleigh,
        rayleigh_uncorrected,
        lambda_ellipsoid,
        excess,
    })
}
