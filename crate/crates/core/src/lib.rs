//! Periodic homogenization and Dirichlet eigenvalue shape optimization on
//! two-dimensional grids.

pub mod cell;
pub mod coeff;
pub mod config;
pub mod eigen;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
mod operator;
pub mod shape_opt;
mod sparse;
pub mod special;

pub use cell::{
    cell_energy, corrected_trial, homogenize, homogenized_tensor, solve_correctors,
    solve_correctors_in_basis, CorrectedTrial, CorrectorSet, HomogenizedTensor,
};
pub use coeff::{CoeffField, Coefficients, FieldKind};
pub use config::{EigenOptions, GridOptions, OptOptions, ProblemConfig, SweepOptions};
pub use eigen::{
    diagnostics, eigen, eigen_with_guess, gap_stability_check, rayleigh_quotient, EigenDiagnostics,
    EigenResult, GapCheck,
};
pub use error::{Error, Result};
pub use geometry::{DomainMask, Ellipsoid, Frame};
pub use harness::{
    emit_report, faber_krahn_check, rate_sweep, scaling_sweep, RateFit, RateSweep, ScalingSweep,
    SweepRow,
};
pub use linalg::Sym2;
pub use shape_opt::{
    build_penalty, ellipsoid_minimizer, energy_deficit, hard_constraint_pipeline, minimize_j,
    select_mu, volume_map, OptResult, Penalty, PenaltyField, ShapeProblem, VolumeMapScan,
};
