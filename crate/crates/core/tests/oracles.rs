mod common;

use approx::assert_relative_eq;

use fkhom::special::{bessel_j0, J01, LAMBDA_UNIT_DISK};

#[test]
fn first_bessel_zero_matches_bisection() {
    assert_relative_eq!(J01, common::j01(), max_relative = 1e-13);
    assert_relative_eq!(LAMBDA_UNIT_DISK, common::lambda_disk(), max_relative = 1e-13);
}

#[test]
fn bessel_series_agrees_with_reference_values() {
    // tabulated J₀ values
    let table = [(0.5, 0.938_469_807_240_813), (1.0, 0.765_197_686_557_966_6), (5.0, -0.177_596_771_314_338_3)];
    for (x, want) in table {
        assert_relative_eq!(bessel_j0(x), want, max_relative = 1e-13);
        assert_relative_eq!(common::bessel_j0(x), want, max_relative = 1e-13);
    }
}

#[test]
fn segment_area_oracle_limits() {
    assert_relative_eq!(common::segment_area(1.0, 0.0), std::f64::consts::FRAC_PI_2, max_relative = 1e-14);
    assert_eq!(common::segment_area(1.0, 1.0), 0.0);
    let a = common::square_asymmetry();
    assert!(a > 0.18 && a < 0.182, "square asymmetry oracle {a}");
}
