//! Masks, ellipsoids and quantitative geometry.

mod edt;
mod ellipsoid;
mod mask;
mod metrics;

pub use edt::squared_distance;
pub use ellipsoid::Ellipsoid;
pub use mask::{DomainMask, Frame};
pub use metrics::{
    asymmetry, asymmetry_with, check_modulus, density_report, density_report_with, dist_omega,
    dist_omega_bound, dist_omega_parts, exact_strip_constant, hausdorff_boundary, omega,
    signed_distance, signed_distance_on, Asymmetry, DensityOptions, DistOmegaBound,
    DistOmegaParts, DistanceField, RegularityReport,
};
