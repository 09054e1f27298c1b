use serde::Serialize;
use std::f64::consts::PI;

use super::mask::{DomainMask, Frame};
use crate::error::{Error, Result};
use crate::linalg::Sym2;
use crate::special::LAMBDA_UNIT_DISK;

/// `E = center + ā^{1/2} B_ρ`, so `|E| = det(ā)^{1/2}·π·ρ²` and
/// `λ₁(E, ā) = λ₁(B_ρ, id) = j₀,₁²/ρ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ellipsoid {
    center: [f64; 2],
    rho: f64,
    abar: Sym2,
    sqrt_abar: Sym2,
    inv_sqrt_abar: Sym2,
}

impl Ellipsoid {
    pub fn new(center: [f64; 2], abar: Sym2, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("ellipsoid radius {rho}")));
        }
        let (lo, _) = abar.eigenvalues();
        if !(lo > 0.0) {
            return Err(Error::Ellipticity(format!(
                "ellipsoid matrix has eigenvalue {lo} <= 0"
            )));
        }
        let sqrt_abar = abar.sqrt();
        Ok(Ellipsoid {
            center,
            rho,
            abar,
            sqrt_abar,
            inv_sqrt_abar: sqrt_abar.inverse(),
        })
    }

    /// The ellipsoid of volume `m`.
    pub fn with_volume(center: [f64; 2], abar: Sym2, m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidParameter(format!("ellipsoid volume {m}")));
        }
        let rho = (m / (abar.det().sqrt() * PI)).sqrt();
        Ellipsoid::new(center, abar, rho)
    }

    pub fn center(&self) -> [f64; 2] {
        self.center
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn abar(&self) -> Sym2 {
        self.abar
    }
    pub fn sqrt_abar(&self) -> Sym2 {
        self.sqrt_abar
    }

    pub fn volume(&self) -> f64 {
        self.abar.det().sqrt() * PI * self.rho * self.rho
    }

    /// Closed-form principal eigenvalue for the operator `−∇·ā∇`.
    pub fn lambda1(&self) -> f64 {
        LAMBDA_UNIT_DISK / (self.rho * self.rho)
    }

    pub fn with_center(&self, center: [f64; 2]) -> Ellipsoid {
        Ellipsoid { center, ..*self }
    }

    pub fn scaled(&self, factor: f64) -> Result<Ellipsoid> {
        Ellipsoid::new(self.center, self.abar, self.rho * factor)
    }

    /// `|ā^{-1/2}(x − center)| / ρ`.
    pub fn normalized_radius(&self, x: [f64; 2]) -> f64 {
        let y = self
            .inv_sqrt_abar
            .mul_vec([x[0] - self.center[0], x[1] - self.center[1]]);
        y[0].hypot(y[1]) / self.rho
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        self.normalized_radius(x) < 1.0
    }

    /// Half-widths of the axis-aligned bounding box.
    pub fn half_extent(&self) -> [f64; 2] {
        [
            self.rho * self.abar.xx.sqrt(),
            self.rho * self.abar.yy.sqrt(),
        ]
    }

    /// Rasterizes into a lattice-aligned window; the ellipsoid must keep a
    /// one-cell margin inside it.
    pub fn rasterize(&self, frame: Frame, h: f64) -> Result<DomainMask> {
        let ext = self.half_extent();
        let lo = [frame.gi0 as f64 * h, frame.gj0 as f64 * h];
        let hi = [
            (frame.gi0 + frame.nx as i64) as f64 * h,
            (frame.gj0 + frame.ny as i64) as f64 * h,
        ];
        for d in 0..2 {
            if self.center[d] - ext[d] < lo[d] + h || self.center[d] + ext[d] > hi[d] - h {
                return Err(Error::Window(format!(
                    "ellipsoid extent [{}, {}] exceeds window [{}, {}] along axis {d}",
                    self.center[d] - ext[d],
                    self.center[d] + ext[d],
                    lo[d],
                    hi[d]
                )));
            }
        }
        let mut m = DomainMask::aligned(frame, h)?;
        m.fill(|x| self.contains(x));
        Ok(m)
    }

    /// Lattice-aligned window with a two-cell margin.
    pub fn auto_frame(&self, h: f64) -> Frame {
        self.frame_with_margin(h, 2.0 * h)
    }

    /// Lattice-aligned window reaching `margin` beyond the bounding box.
    pub fn frame_with_margin(&self, h: f64, margin: f64) -> Frame {
        let ext = self.half_extent();
        let gi0 = ((self.center[0] - ext[0] - margin) / h).floor() as i64;
        let gj0 = ((self.center[1] - ext[1] - margin) / h).floor() as i64;
        let gi1 = ((self.center[0] + ext[0] + margin) / h).ceil() as i64;
        let gj1 = ((self.center[1] + ext[1] + margin) / h).ceil() as i64;
        Frame {
            nx: (gi1 - gi0) as usize,
            ny: (gj1 - gj0) as usize,
            gi0,
            gj0,
        }
    }

    pub fn rasterize_auto(&self, h: f64) -> Result<DomainMask> {
        self.rasterize(self.auto_frame(h), h)
    }

    /// Number of lattice cells (spacing `h`) whose centers lie in `E`.
    pub fn lattice_count(&self, h: f64) -> usize {
        // row-wise: solve the quadratic for the x-interval of each row
        let inv = self.inv_sqrt_abar;
        let m = inv.mul(inv); // ā⁻¹
        let (a, b, c) = (m[0][0], m[0][1], m[1][1]);
        let ext = self.half_extent();
        let j0 = ((self.center[1] - ext[1]) / h - 0.5).floor() as i64 - 1;
        let j1 = ((self.center[1] + ext[1]) / h - 0.5).ceil() as i64 + 1;
        let r2 = self.rho * self.rho;
        let mut count = 0usize;
        for j in j0..=j1 {
            let y = (j as f64 + 0.5) * h - self.center[1];
            // a x² + 2 b x y + c y² < r²
            let disc = b * b * y * y - a * (c * y * y - r2);
            if disc <= 0.0 {
                continue;
            }
            let s = disc.sqrt();
            let xl = (-b * y - s) / a + self.center[0];
            let xr = (-b * y + s) / a + self.center[0];
            // centers (i + ½)h strictly inside (xl, xr)
            let il = (xl / h - 0.5).floor() as i64 + 1;
            let ir = (xr / h - 0.5).ceil() as i64 - 1;
            let yc = (j as f64 + 0.5) * h;
            let inside = |i: i64| self.contains([(i as f64 + 0.5) * h, yc]);
            if ir - il < 8 {
                count += (il - 2..=ir + 2).filter(|&i| inside(i)).count();
                continue;
            }
            // the row section is an interval; settle its ends against rounding
            let lo = (il - 2..=il + 2).find(|&i| inside(i));
            let hi = (ir - 2..=ir + 2).rev().find(|&i| inside(i));
            if let (Some(lo), Some(hi)) = (lo, hi) {
                count += (hi - lo + 1) as usize;
            }
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_and_eigenvalue() {
        let e = Ellipsoid::with_volume([0.3, -0.2], Sym2::diag(4.0, 1.0), 7.0).unwrap();
        assert!((e.volume() - 7.0).abs() < 1e-12);
        let ext = e.half_extent();
        assert!((ext[0] / ext[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lattice_count_matches_raster() {
        let h = 0.05;
        let e = Ellipsoid::new([0.013, 0.41], Sym2::new(2.0, 0.4, 0.8), 1.3).unwrap();
        let m = e.rasterize_auto(h).unwrap();
        assert_eq!(e.lattice_count(h), m.count());
    }

    #[test]
    fn rejects_small_window() {
        let e = Ellipsoid::new([0.0, 0.0], Sym2::IDENTITY, 1.0).unwrap();
        let frame = Frame { nx: 20, ny: 20, gi0: -10, gj0: -10 };
        assert!(matches!(e.rasterize(frame, 0.1), Err(Error::Window(_))));
    }
}
