//! Independent oracles for integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// `J₀(x) = Σ (−1)^k (x/2)^{2k} / (k!)²`, summed until terms vanish.
pub fn bessel_j0(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1.0) {
            break;
        }
    }
    sum
}

/// First zero of `J₀` by bisection on `[2, 3]`.
pub fn j01() -> f64 {
    let (mut lo, mut hi) = (2.0, 3.0);
    assert!(bessel_j0(lo) > 0.0 && bessel_j0(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bessel_j0(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Principal Dirichlet eigenvalue of the unit disk.
pub fn lambda_disk() -> f64 {
    j01().powi(2)
}

/// Area of the circular segment of a radius-`r` disk cut off by a chord at
/// distance `d` from the center.
pub fn segment_area(r: f64, d: f64) -> f64 {
    r * r * (d / r).acos() - d * (r * r - d * d).sqrt()
}

/// `|QΔB|/|Q|` for the unit square `Q` and the concentric disk `B` of area 1.
pub fn square_asymmetry() -> f64 {
    let r = 1.0 / PI.sqrt();
    // the disk pokes out past all four sides by the same segment
    let outside = 4.0 * segment_area(r, 0.5);
    2.0 * outside
}
