//! Problem configuration, read from a single JSON document.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::coeff::{CoeffField, FieldKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub coeff: FieldKind,
    #[serde(default)]
    pub grid: GridOptions,
    #[serde(default)]
    pub eig: EigenOptions,
    #[serde(default)]
    pub opt: OptOptions,
    #[serde(default)]
    pub sweep: SweepOptions,
}

fn default_dim() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridOptions {
    /// Cells per unit period; the grid spacing is its reciprocal.
    pub cells_per_period: usize,
    /// Relative residual for the periodic corrector solves.
    pub corrector_tol: f64,
    pub corrector_max_iter: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            cells_per_period: 8,
            corrector_tol: 1e-10,
            corrector_max_iter: 50_000,
        }
    }
}

impl GridOptions {
    pub fn h(&self) -> f64 {
        1.0 / self.cells_per_period as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenOptions {
    /// Relative eigen-residual `‖Ku − λMu‖ / (λ‖Mu‖)` to reach.
    pub tol: f64,
    pub max_iter: usize,
    /// Floor for the adaptive inner solve tolerance.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-8,
            max_iter: 400,
            cg_tol: 1e-12,
            cg_max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptOptions {
    pub max_outer: usize,
    pub stall_iters: usize,
    /// Number of superlevel thresholds tried per iteration.
    pub quantile_levels: usize,
    /// Candidates with fewer occupied cells are discarded.
    pub min_cells: usize,
    /// Empty cells kept around an ellipsoid-initialized window, in units
    /// of its semi-axis.
    pub window_factor: f64,
}

impl Default for OptOptions {
    fn default() -> Self {
        OptOptions {
            max_outer: 200,
            stall_iters: 3,
            quantile_levels: 32,
            min_cells: 16,
            window_factor: 1.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    /// Largest μ of a sweep (smallest volume).
    pub mu_start: f64,
    pub levels: usize,
    /// Ratio between consecutive μ-levels.
    pub factor: f64,
    /// Volume jumps above this fraction of the volume are flagged.
    pub jump_frac: f64,
    /// Exclude the smallest volume from rate fits.
    pub drop_smallest: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            mu_start: 0.15,
            levels: 4,
            factor: 0.25,
            jump_frac: 0.05,
            drop_smallest: true,
        }
    }
}

impl ProblemConfig {
    pub fn new(coeff: FieldKind) -> Self {
        ProblemConfig {
            dim: 2,
            coeff,
            grid: GridOptions::default(),
            eig: EigenOptions::default(),
            opt: OptOptions::default(),
            sweep: SweepOptions::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ProblemConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        ProblemConfig::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.dim != 2 {
            return bad(format!("only dim = 2 is supported, got {}", self.dim));
        }
        if self.grid.cells_per_period < 4 {
            return bad(format!(
                "cells_per_period must be >= 4, got {}",
                self.grid.cells_per_period
            ));
        }
        let tols = [
            ("grid.corrector_tol", self.grid.corrector_tol),
            ("eig.tol", self.eig.tol),
            ("eig.cg_tol", self.eig.cg_tol),
            ("sweep.jump_frac", self.sweep.jump_frac),
            ("sweep.mu_start", self.sweep.mu_start),
            ("opt.window_factor", self.opt.window_factor),
        ];
        for (name, v) in tols {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.sweep.factor > 0.0 && self.sweep.factor < 1.0) {
            return bad(format!("sweep.factor must lie in (0, 1), got {}", self.sweep.factor));
        }
        if self.eig.max_iter == 0 || self.eig.cg_max_iter == 0 || self.grid.corrector_max_iter == 0
        {
            return bad("iteration limits must be positive".into());
        }
        if self.opt.quantile_levels == 0 || self.opt.stall_iters == 0 {
            return bad("opt.quantile_levels and opt.stall_iters must be positive".into());
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    pub fn build_field(&self) -> Result<CoeffField> {
        CoeffField::build(self.coeff.clone(), self.grid.cells_per_period)
    }
}
