//! Bessel functions of the first kind needed for disk eigenfunctions.

/// First positive zero of `J₀`.
pub const J01: f64 = 2.404_825_557_695_773;

/// `λ₁` of the unit disk for the Laplacian, `j₀,₁²`.
pub const LAMBDA_UNIT_DISK: f64 = J01 * J01;

/// Power series of `J_ν` (ν = 0, 1); accurate to ~1e-15 for `|x| ≤ 10`.
fn series(nu: u32, x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = if nu == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    for k in 1..80 {
        term *= q / (k as f64 * (k + nu as usize) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

pub fn bessel_j0(x: f64) -> f64 {
    series(0, x)
}

pub fn bessel_j1(x: f64) -> f64 {
    series(1, x)
}
