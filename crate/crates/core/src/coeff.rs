//! Periodic, uniformly elliptic coefficient fields sampled on the unit cell.
//!
//! A field with `n` cells per period is sampled on the half-spacing lattice
//! `(k / 2n, l / 2n)`: cell centers sit at odd/odd lattice points, x-faces
//! at even/odd, y-faces at odd/even and cell corners at even/even. Lookups
//! take integer grid indices and wrap them modulo `n`, so periodic images
//! are bit-identical.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::Sym2;

/// Analytic family of a coefficient field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase", deny_unknown_fields)]
pub enum FieldKind {
    /// `a(x) ≡ M`.
    Constant {
        #[serde(rename = "M")]
        m: [[f64; 2]; 2],
    },
    /// `a(x) = s(x₁)·I`, `s = alpha` on `[0, ½)`, `beta` on `[½, 1)`,
    /// ramped linearly over one grid cell at each jump.
    Laminate { alpha: f64, beta: f64 },
    /// Scalar `alpha`/`beta` on alternating half-period squares.
    /// Discontinuous, so it is outside the Lipschitz hypothesis and only
    /// meant for cell-problem validation.
    Checkerboard { alpha: f64, beta: f64 },
    /// `a(x) = (c + A·sin(2πx₁)·sin(2πx₂))·I`.
    Trig {
        c: f64,
        #[serde(rename = "A")]
        amplitude: f64,
    },
}

impl FieldKind {
    pub fn identity() -> Self {
        FieldKind::Constant {
            m: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    fn check_parameters(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Ellipticity(msg));
        match *self {
            FieldKind::Constant { m } => {
                if !m.iter().flatten().all(|v| v.is_finite()) {
                    return fail("constant matrix has non-finite entries".into());
                }
                let (s, asym) = Sym2::from_rows(m);
                if asym > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "constant matrix is not symmetric (|m01 - m10| = {asym:.3e})"
                    )));
                }
                let (lo, _) = s.eigenvalues();
                if lo <= 0.0 {
                    return fail(format!("constant matrix has eigenvalue {lo} <= 0"));
                }
            }
            FieldKind::Laminate { alpha, beta } | FieldKind::Checkerboard { alpha, beta } => {
                if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
                    return fail(format!(
                        "layer values must be positive and finite (alpha = {alpha}, beta = {beta})"
                    ));
                }
            }
            FieldKind::Trig { c, amplitude } => {
                if !(c - amplitude.abs() > 0.0) || !c.is_finite() || !amplitude.is_finite() {
                    return fail(format!(
                        "trig field needs c - |A| > 0 (c = {c}, A = {amplitude}); minimum eigenvalue would be {}",
                        c - amplitude.abs()
                    ));
                }
            }
        }
        Ok(())
    }

    /// Whether the family satisfies the Lipschitz hypothesis on `a`.
    pub fn is_lipschitz(&self) -> bool {
        !matches!(self, FieldKind::Checkerboard { .. })
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, FieldKind::Constant { .. })
    }
}

/// Grid access to coefficient samples. Indices are global grid indices in
/// units of the grid spacing; `x_face(i, j)` sits between cells `(i-1, j)`
/// and `(i, j)`, `y_face(i, j)` between `(i, j-1)` and `(i, j)`, and
/// `corner(i, j)` is the lower-left corner of cell `(i, j)`.
pub trait Coefficients: Sync {
    /// True when the field does not depend on position.
    fn is_uniform(&self) -> bool;
    fn center(&self, i: i64, j: i64) -> Sym2;
    fn x_face(&self, i: i64, j: i64) -> Sym2;
    fn y_face(&self, i: i64, j: i64) -> Sym2;
    fn corner(&self, i: i64, j: i64) -> Sym2;
    /// Rejects grid spacings the samples were not built for.
    fn check_spacing(&self, h: f64) -> Result<()>;
    /// True when every sample has zero off-diagonal part.
    fn is_diagonal(&self) -> bool;
}

impl Coefficients for Sym2 {
    fn is_uniform(&self) -> bool {
        true
    }
    fn center(&self, _: i64, _: i64) -> Sym2 {
        *self
    }
    fn x_face(&self, _: i64, _: i64) -> Sym2 {
        *self
    }
    fn y_face(&self, _: i64, _: i64) -> Sym2 {
        *self
    }
    fn corner(&self, _: i64, _: i64) -> Sym2 {
        *self
    }
    fn check_spacing(&self, h: f64) -> Result<()> {
        if h > 0.0 && h.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("grid spacing {h}")))
        }
    }
    fn is_diagonal(&self) -> bool {
        self.xy == 0.0
    }
}

/// A validated, immutable periodic coefficient field.
#[derive(Debug, Clone)]
pub struct CoeffField {
    kind: FieldKind,
    n: usize,
    lattice: Vec<Sym2>,
    lambda_ell: f64,
    lip_bound: f64,
    diagonal: bool,
}

impl CoeffField {
    /// Samples `kind` with `cells_per_period` cells per unit period and
    /// validates it.
    pub fn build(kind: FieldKind, cells_per_period: usize) -> Result<Self> {
        if cells_per_period < 4 {
            return Err(Error::InvalidParameter(format!(
                "cells_per_period must be >= 4, got {cells_per_period}"
            )));
        }
        kind.check_parameters()?;
        let n = cells_per_period;
        let m = 2 * n;
        let h = 1.0 / n as f64;
        let mut lattice = Vec::with_capacity(m * m);
        for l in 0..m {
            for k in 0..m {
                let x = k as f64 / m as f64;
                let y = l as f64 / m as f64;
                lattice.push(point_value(&kind, x, y, h));
            }
        }
        if matches!(kind, FieldKind::Checkerboard { .. }) {
            // faces and corners take the arithmetic mean of the adjacent cells
            let cell = |ci: i64, cj: i64| -> Sym2 {
                let k = (2 * ci.rem_euclid(n as i64) + 1) as usize;
                let l = (2 * cj.rem_euclid(n as i64) + 1) as usize;
                lattice[l * m + k]
            };
            let mut out = lattice.clone();
            for j in 0..n as i64 {
                for i in 0..n as i64 {
                    let avg2 = |a: Sym2, b: Sym2| Sym2::scalar(0.5 * (a.xx + b.xx));
                    let xf = avg2(cell(i - 1, j), cell(i, j));
                    let yf = avg2(cell(i, j - 1), cell(i, j));
                    let c = 0.25
                        * (cell(i - 1, j - 1).xx + cell(i, j - 1).xx + cell(i - 1, j).xx + cell(i, j).xx);
                    let (i2, j2) = (2 * i as usize, 2 * j as usize);
                    out[(j2 + 1) * m + i2] = xf;
                    out[j2 * m + i2 + 1] = yf;
                    out[j2 * m + i2] = Sym2::scalar(c);
                }
            }
            lattice = out;
        }

        let mut lambda_ell: f64 = 1.0;
        let mut diagonal = true;
        for (idx, s) in lattice.iter().enumerate() {
            let (lo, hi) = s.eigenvalues();
            if !(lo > 0.0) || !hi.is_finite() {
                return Err(Error::Ellipticity(format!(
                    "sample {idx} has eigenvalues ({lo}, {hi})"
                )));
            }
            lambda_ell = lambda_ell.max(hi).max(1.0 / lo);
            diagonal &= s.xy == 0.0;
        }

        let step = 1.0 / m as f64;
        let mut lip: f64 = 0.0;
        for l in 0..m {
            for k in 0..m {
                let s = lattice[l * m + k];
                let right = lattice[l * m + (k + 1) % m];
                let up = lattice[((l + 1) % m) * m + k];
                lip = lip.max(s.sub(right).norm() / step).max(s.sub(up).norm() / step);
            }
        }
        Ok(CoeffField {
            kind,
            n,
            lattice,
            lambda_ell,
            lip_bound: lip,
            diagonal,
        })
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn cells_per_period(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Ellipticity constant `Λ ≥ 1` with `Λ⁻¹ ≤ a ≤ Λ` on every sample.
    pub fn lambda_ell(&self) -> f64 {
        self.lambda_ell
    }

    /// Finite-difference estimate of `‖∇a‖∞` over the sample lattice.
    pub fn lip_bound(&self) -> f64 {
        self.lip_bound
    }

    /// False for the discontinuous checkerboard.
    pub fn satisfies_lipschitz_hypothesis(&self) -> bool {
        self.kind.is_lipschitz()
    }

    /// Checks `Λ⁻¹|ξ|² ≤ ξ·Mξ ≤ Λ|ξ|²` on `directions` unit vectors for every
    /// sample; returns the worst violation (≤ 0 means satisfied).
    pub fn direction_check(&self, directions: usize) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for s in &self.lattice {
            for d in 0..directions {
                let t = PI * d as f64 / directions as f64;
                let q = s.quad([t.cos(), t.sin()]);
                worst = worst
                    .max(1.0 / self.lambda_ell - q)
                    .max(q - self.lambda_ell);
            }
        }
        worst
    }

    fn lattice_at(&self, k: i64, l: i64) -> Sym2 {
        let m = 2 * self.n as i64;
        self.lattice[(l.rem_euclid(m) * m + k.rem_euclid(m)) as usize]
    }

    /// All distinct lattice samples (for extrema scans).
    pub fn samples(&self) -> &[Sym2] {
        &self.lattice
    }

    /// Cell-center value of the cell containing `x`.
    pub fn at_point(&self, x: [f64; 2]) -> Sym2 {
        let n = self.n as f64;
        let i = (x[0] * n).floor() as i64;
        let j = (x[1] * n).floor() as i64;
        self.center(i, j)
    }
}

impl Coefficients for CoeffField {
    fn is_uniform(&self) -> bool {
        self.kind.is_constant()
    }
    fn center(&self, i: i64, j: i64) -> Sym2 {
        self.lattice_at(2 * i + 1, 2 * j + 1)
    }
    fn x_face(&self, i: i64, j: i64) -> Sym2 {
        self.lattice_at(2 * i, 2 * j + 1)
    }
    fn y_face(&self, i: i64, j: i64) -> Sym2 {
        self.lattice_at(2 * i + 1, 2 * j)
    }
    fn corner(&self, i: i64, j: i64) -> Sym2 {
        self.lattice_at(2 * i, 2 * j)
    }
    fn check_spacing(&self, h: f64) -> Result<()> {
        if self.kind.is_constant() {
            return Sym2::IDENTITY.check_spacing(h);
        }
        if ((h * self.n as f64) - 1.0).abs() > 1e-9 {
            return Err(Error::GridMismatch(format!(
                "grid spacing {h} does not match the field's 1/{} sampling",
                self.n
            )));
        }
        Ok(())
    }
    fn is_diagonal(&self) -> bool {
        self.diagonal
    }
}

fn point_value(kind: &FieldKind, x: f64, y: f64, h: f64) -> Sym2 {
    match *kind {
        FieldKind::Constant { m } => Sym2::from_rows(m).0,
        FieldKind::Laminate { alpha, beta } => Sym2::scalar(laminate_profile(alpha, beta, x, h)),
        FieldKind::Checkerboard { alpha, beta } => {
            let parity = ((2.0 * x).floor() as i64 + (2.0 * y).floor() as i64).rem_euclid(2);
            Sym2::scalar(if parity == 0 { alpha } else { beta })
        }
        FieldKind::Trig { c, amplitude } => {
            Sym2::scalar(c + amplitude * (2.0 * PI * x).sin() * (2.0 * PI * y).sin())
        }
    }
}

fn laminate_profile(alpha: f64, beta: f64, x: f64, h: f64) -> f64 {
    let to_half = x - 0.5;
    if to_half.abs() < 0.5 * h {
        return alpha + (beta - alpha) * (to_half / h + 0.5);
    }
    let to_zero = if x >= 0.5 { x - 1.0 } else { x };
    if to_zero.abs() < 0.5 * h {
        return beta + (alpha - beta) * (to_zero / h + 0.5);
    }
    if x < 0.5 {
        alpha
    } else {
        beta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn extrema(f: &CoeffField) -> (f64, f64) {
        f.samples().iter().fold((f64::MAX, f64::MIN), |(lo, hi), s| {
            let (a, b) = s.eigenvalues();
            (lo.min(a), hi.max(b))
        })
    }

    #[test]
    fn identity_has_unit_ellipticity_and_zero_lipschitz() {
        let f = CoeffField::build(FieldKind::identity(), 8).unwrap();
        assert_eq!(f.lambda_ell(), 1.0);
        assert_eq!(f.lip_bound(), 0.0);
    }

    #[test]
    fn trig_extrema() {
        let f = CoeffField::build(FieldKind::Trig { c: 2.0, amplitude: 1.0 }, 16).unwrap();
        assert_eq!(f.lambda_ell(), 3.0);
        let (lo, hi) = extrema(&f);
        assert_eq!(lo, 1.0);
        assert_eq!(hi, 3.0);
        assert!(f.direction_check(16) <= 1e-15);
    }

    #[test]
    fn laminate_scan_gives_four() {
        let f = CoeffField::build(FieldKind::Laminate { alpha: 1.0, beta: 4.0 }, 128).unwrap();
        let (lo, hi) = extrema(&f);
        assert_eq!((lo, hi), (1.0, 4.0));
        assert_eq!(f.lambda_ell(), 4.0);
        // jump faces carry the mid value
        assert_eq!(f.x_face(64, 3).xx, 2.5);
        assert_eq!(f.x_face(0, 3).xx, 2.5);
        assert_eq!(f.center(63, 0).xx, 1.0);
        assert_eq!(f.center(64, 0).xx, 4.0);
    }

    #[test]
    fn rejects_non_elliptic() {
        assert!(matches!(
            CoeffField::build(FieldKind::Trig { c: 1.0, amplitude: 1.0 }, 8),
            Err(Error::Ellipticity(_))
        ));
        assert!(matches!(
            CoeffField::build(FieldKind::Laminate { alpha: 0.0, beta: 1.0 }, 8),
            Err(Error::Ellipticity(_))
        ));
        assert!(matches!(
            CoeffField::build(FieldKind::Checkerboard { alpha: 1.0, beta: -2.0 }, 8),
            Err(Error::Ellipticity(_))
        ));
        assert!(matches!(
            CoeffField::build(FieldKind::Constant { m: [[1.0, 2.0], [2.0, 1.0]] }, 8),
            Err(Error::Ellipticity(_))
        ));
        assert!(CoeffField::build(FieldKind::identity(), 3).is_err());
    }

    #[test]
    fn periodic_images_identical() {
        let f = CoeffField::build(FieldKind::Trig { c: 2.0, amplitude: 0.7 }, 12).unwrap();
        for j in -3..15 {
            for i in -3..15 {
                assert_eq!(f.center(i, j), f.center(i + 12, j));
                assert_eq!(f.x_face(i, j), f.x_face(i, j + 12));
                assert_eq!(f.corner(i, j), f.corner(i - 12, j + 24));
            }
        }
    }

    #[test]
    fn deterministic_build() {
        let a = CoeffField::build(FieldKind::Trig { c: 2.0, amplitude: 1.0 }, 32).unwrap();
        let b = CoeffField::build(FieldKind::Trig { c: 2.0, amplitude: 1.0 }, 32).unwrap();
        assert_eq!(a.samples(), b.samples());
        assert_eq!(a.lip_bound().to_bits(), b.lip_bound().to_bits());
    }

    #[test]
    fn checkerboard_faces_average() {
        let f = CoeffField::build(FieldKind::Checkerboard { alpha: 1.0, beta: 4.0 }, 8).unwrap();
        assert!(!f.satisfies_lipschitz_hypothesis());
        assert_eq!(f.center(0, 0).xx, 1.0);
        assert_eq!(f.center(4, 0).xx, 4.0);
        assert_eq!(f.x_face(4, 0).xx, 2.5);
        assert_eq!(f.x_face(2, 0).xx, 1.0);
    }
}
