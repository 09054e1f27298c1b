//! Closed-form algebra for 2×2 symmetric matrices.

use serde::{Deserialize, Serialize};

/// A symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        xx: 1.0,
        xy: 0.0,
        yy: 1.0,
    };

    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Sym2 { xx, xy, yy }
    }

    pub const fn scalar(s: f64) -> Self {
        Sym2 {
            xx: s,
            xy: 0.0,
            yy: s,
        }
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        Sym2 {
            xx: a,
            xy: 0.0,
            yy: b,
        }
    }

    /// Builds from a full 2×2 array, averaging the off-diagonal pair.
    /// Returns the symmetrized matrix and the asymmetry `|m01 - m10|`.
    pub fn from_rows(m: [[f64; 2]; 2]) -> (Self, f64) {
        let asym = (m[0][1] - m[1][0]).abs();
        (Sym2::new(m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]), asym)
    }

    pub fn to_rows(self) -> [[f64; 2]; 2] {
        [[self.xx, self.xy], [self.xy, self.yy]]
    }

    pub fn det(self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(self) -> f64 {
        self.xx + self.yy
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(self) -> (f64, f64) {
        let mean = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        let r = half_diff.hypot(self.xy);
        (mean - r, mean + r)
    }

    /// Orthonormal eigenvectors matching [`Sym2::eigenvalues`] order.
    pub fn eigenvectors(self) -> ([f64; 2], [f64; 2]) {
        if self.xy == 0.0 {
            return if self.xx <= self.yy {
                ([1.0, 0.0], [0.0, 1.0])
            } else {
                ([0.0, 1.0], [1.0, 0.0])
            };
        }
        let (_, hi) = self.eigenvalues();
        let v = [self.xy, hi - self.xx];
        let n = v[0].hypot(v[1]);
        let v_hi = [v[0] / n, v[1] / n];
        ([-v_hi[1], v_hi[0]], v_hi)
    }

    /// Applies `f` to the spectrum.
    pub fn map_spectrum(self, f: impl Fn(f64) -> f64) -> Sym2 {
        let (l0, l1) = self.eigenvalues();
        let (v0, v1) = self.eigenvectors();
        let (f0, f1) = (f(l0), f(l1));
        Sym2::new(
            f0 * v0[0] * v0[0] + f1 * v1[0] * v1[0],
            f0 * v0[0] * v0[1] + f1 * v1[0] * v1[1],
            f0 * v0[1] * v0[1] + f1 * v1[1] * v1[1],
        )
    }

    /// SPD square root.
    pub fn sqrt(self) -> Sym2 {
        self.map_spectrum(f64::sqrt)
    }

    pub fn inverse(self) -> Sym2 {
        let d = self.det();
        Sym2::new(self.yy / d, -self.xy / d, self.xx / d)
    }

    pub fn mul_vec(self, v: [f64; 2]) -> [f64; 2] {
        [
            self.xx * v[0] + self.xy * v[1],
            self.xy * v[0] + self.yy * v[1],
        ]
    }

    /// Plain matrix product; symmetric only when the factors commute.
    pub fn mul(self, o: Sym2) -> [[f64; 2]; 2] {
        [
            [
                self.xx * o.xx + self.xy * o.xy,
                self.xx * o.xy + self.xy * o.yy,
            ],
            [
                self.xy * o.xx + self.yy * o.xy,
                self.xy * o.xy + self.yy * o.yy,
            ],
        ]
    }

    pub fn quad(self, v: [f64; 2]) -> f64 {
        self.xx * v[0] * v[0] + 2.0 * self.xy * v[0] * v[1] + self.yy * v[1] * v[1]
    }

    pub fn bilinear(self, v: [f64; 2], w: [f64; 2]) -> f64 {
        self.xx * v[0] * w[0] + self.xy * (v[0] * w[1] + v[1] * w[0]) + self.yy * v[1] * w[1]
    }

    pub fn sub(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }

    /// Spectral norm.
    pub fn norm(self) -> f64 {
        let (l0, l1) = self.eigenvalues();
        l0.abs().max(l1.abs())
    }

    /// Conjugation `r · self · rᵀ` by a rotation through `theta`.
    pub fn rotate(self, theta: f64) -> Sym2 {
        let (s, c) = theta.sin_cos();
        let r = [[c, -s], [s, c]];
        let m = self.to_rows();
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        out[i][j] += r[i][k] * m[k][l] * r[j][l];
                    }
                }
            }
        }
        Sym2::from_rows(out).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_squares_back() {
        let m = Sym2::new(3.0, 0.7, 1.5);
        let s = m.sqrt();
        let sq = s.mul(s);
        assert!((sq[0][0] - m.xx).abs() < 1e-13);
        assert!((sq[0][1] - m.xy).abs() < 1e-13);
        assert!((sq[1][1] - m.yy).abs() < 1e-13);
    }

    #[test]
    fn eigenvectors_diagonalize() {
        let m = Sym2::new(2.0, -0.4, 5.0);
        let (l0, l1) = m.eigenvalues();
        let (v0, v1) = m.eigenvectors();
        let mv0 = m.mul_vec(v0);
        let mv1 = m.mul_vec(v1);
        assert!((mv0[0] - l0 * v0[0]).abs() < 1e-13 && (mv0[1] - l0 * v0[1]).abs() < 1e-13);
        assert!((mv1[0] - l1 * v1[0]).abs() < 1e-13 && (mv1[1] - l1 * v1[1]).abs() < 1e-13);
        assert!(l0 <= l1);
    }

    #[test]
    fn inverse_and_rotation() {
        let m = Sym2::new(4.0, 1.0, 2.0);
        let p = m.mul(m.inverse());
        assert!((p[0][0] - 1.0).abs() < 1e-14 && p[0][1].abs() < 1e-14);
        let r = m.rotate(0.3).rotate(-0.3);
        assert!((r.xx - m.xx).abs() < 1e-13 && (r.xy - m.xy).abs() < 1e-13);
        assert!((m.rotate(1.1).det() - m.det()).abs() < 1e-12);
    }
}
