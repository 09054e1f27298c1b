use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use fkhom::geometry::{
    asymmetry, density_report_with, dist_omega_bound, hausdorff_boundary, DensityOptions,
};
use fkhom::harness::{
    emit_report, mu_levels, rate_sweep, ScalingRow, ScalingSweep, SweepSummary,
};
use fkhom::shape_opt::{build_penalty, hard_constraint_pipeline, minimize_j, volume_map, Penalty};
use fkhom::{
    diagnostics, eigen, homogenize, solve_correctors, CoeffField, DomainMask, HomogenizedTensor,
    ProblemConfig, ShapeProblem,
};

#[derive(Parser)]
#[command(name = "fkhom", version, about = "Homogenized eigenvalue shape optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the cell problem and write the homogenized matrix.
    Cell {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Principal Dirichlet eigenpairs of a mask.
    Eig {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Minimize the augmented functional at one multiplier.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mu: f64,
        /// JSON with "reference" (mask path), "mu", "p" and "gamma0".
        #[arg(long)]
        penalty: Option<PathBuf>,
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Rate and scaling sweep over multiplier levels.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Volume map over a geometric multiplier grid.
    Volmap {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mu_min: f64,
        #[arg(long)]
        mu_max: f64,
        #[arg(long, default_value_t = 8)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Geometric comparison of two masks.
    Metrics {
        #[arg(long)]
        mask_a: PathBuf,
        #[arg(long)]
        mask_b: PathBuf,
        #[arg(long, default_value_t = 7.0)]
        p: f64,
        #[arg(long, default_value_t = 0.1)]
        gamma0: f64,
        /// Config whose homogenized matrix defines the ellipsoids.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Replace a target mask by a penalized minimizer.
    Penalize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        target_mask: PathBuf,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        gamma0: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

struct Setup {
    cfg: ProblemConfig,
    field: CoeffField,
    abar: HomogenizedTensor,
    residuals: [f64; 2],
}

fn setup(path: &Path) -> Result<Setup> {
    let cfg = ProblemConfig::load(path)
        .with_context(|| format!("loading config {}", path.display()))?;
    let field = cfg.build_field()?;
    let (abar, residuals) = if cfg.coeff.is_constant() {
        (HomogenizedTensor::new(field.samples()[0])?, [0.0, 0.0])
    } else {
        let chi = solve_correctors(&field, cfg.grid.corrector_tol, cfg.grid.corrector_max_iter)?;
        (homogenize(&field, &chi)?, chi.residual_norms())
    };
    Ok(Setup { cfg, field, abar, residuals })
}

fn problem(s: &Setup) -> ShapeProblem<'_, CoeffField> {
    let mut p = ShapeProblem::new(&s.field, s.abar, s.cfg.h());
    p.eig = s.cfg.eig.clone();
    p.opt = s.cfg.opt.clone();
    p.jump_frac = s.cfg.sweep.jump_frac;
    p
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)
        .with_context(|| format!("writing {}", path.display()))
}

fn cell(config: &Path, out: &Path) -> Result<()> {
    let s = setup(config)?;
    write_json(
        out,
        &json!({
            "abar": s.abar.to_rows(),
            "det": s.abar.det_abar,
            "residuals": s.residuals,
            "grid": s.cfg.grid.cells_per_period,
        }),
    )
}

fn eig(config: &Path, mask: &Path, k: usize, out: &Path) -> Result<()> {
    let s = setup(config)?;
    let mask = DomainMask::read(mask)?;
    let res = eigen(&s.field, &mask, k, &s.cfg.eig)?;
    let diag = diagnostics(&res, &mask)?;
    write_json(
        out,
        &json!({
            "lambda1": res.lambda1,
            "lambda2": res.lambda2,
            "residual": res.residual,
            "diagnostics": diag,
        }),
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PenaltySpec {
    reference: PathBuf,
    mu: f64,
    p: f64,
    gamma0: f64,
}

fn optimize(
    config: &Path,
    mu: f64,
    penalty: Option<&Path>,
    init: Option<&Path>,
    out: &Path,
    trace: &Path,
) -> Result<()> {
    let s = setup(config)?;
    let prob = problem(&s);
    let start = match init {
        Some(p) => DomainMask::read(p)?,
        None => prob.initial_mask(mu)?,
    };
    let res = match penalty {
        Some(path) => {
            let spec: PenaltySpec = serde_json::from_str(&fs::read_to_string(path)?)
                .with_context(|| format!("parsing {}", path.display()))?;
            let reference = DomainMask::read(&spec.reference)?;
            let g = build_penalty(&reference, spec.mu, spec.p, spec.gamma0)?;
            if !g.hypotheses().all_hold() {
                bail!("penalty hypotheses fail: {:?}", g.hypotheses());
            }
            minimize_j(&s.field, Penalty::Field(&g), &start, &s.cfg.eig, &s.cfg.opt)?
        }
        None => minimize_j(&s.field, Penalty::Constant(mu), &start, &s.cfg.eig, &s.cfg.opt)?,
    };
    res.mask.write(out)?;
    res.write_trace(trace)?;
    println!(
        "energy {} lambda1 {} volume {} iterations {} converged {}",
        res.energy,
        res.lambda1,
        res.mask.volume(),
        res.iterations(),
        res.converged
    );
    Ok(())
}

fn sweep(config: &Path, levels: Option<usize>, out: &Path) -> Result<()> {
    let s = setup(config)?;
    let prob = problem(&s);
    let mut opts = s.cfg.sweep.clone();
    if let Some(k) = levels {
        opts.levels = k;
    }
    fs::create_dir_all(out)?;
    let mus = mu_levels(&opts);
    let rs = rate_sweep(&prob, &mus, opts.drop_smallest, Some(&out.join("sweep.csv")))?;
    let scaling = ScalingSweep::from_rows(rs.rows.iter().map(ScalingRow::from).collect())?;
    let summary = SweepSummary::new(&rs, Some(&scaling));
    emit_report(&rs.rows, &summary, out)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn volmap(config: &Path, mu_min: f64, mu_max: f64, points: usize, out: &Path) -> Result<()> {
    if !(mu_min > 0.0 && mu_max > mu_min) || points < 2 {
        bail!("need 0 < mu_min < mu_max and at least two points");
    }
    let s = setup(config)?;
    let prob = problem(&s);
    let ratio = (mu_max / mu_min).powf(1.0 / (points - 1) as f64);
    let grid: Vec<f64> = (0..points).map(|k| mu_min * ratio.powi(k as i32)).collect();
    let scan = volume_map(&prob, &grid)?;
    write_json(out, &serde_json::to_value(&scan)?)?;
    for r in &scan.rows {
        println!("mu {} volume {} energy {}", r.mu, r.volume, r.energy);
    }
    Ok(())
}

fn metrics(a: &Path, b: &Path, p: f64, gamma0: f64, config: Option<&Path>) -> Result<()> {
    let ma = DomainMask::read(a)?;
    let mb = DomainMask::read(b)?;
    let abar = match config {
        Some(c) => setup(c)?.abar,
        None => HomogenizedTensor::identity(),
    };
    let bound = dist_omega_bound(&ma, &mb, p, gamma0)?;
    let report = json!({
        "volume_a": ma.volume(),
        "volume_b": mb.volume(),
        "symmetric_difference": ma.symmetric_difference_volume(&mb)?,
        "hausdorff": hausdorff_boundary(&ma, &mb)?,
        "dist_omega": bound.dist_omega,
        "dist_omega_bound": bound,
        "asymmetry_a": asymmetry(&ma, abar.abar)?.value,
        "asymmetry_b": asymmetry(&mb, abar.abar)?.value,
        "regularity_a": density_report_with(&ma, DensityOptions::default(), Some(&mb))?,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    if !bound.holds {
        bail!("dist_omega bound violated: {} > {}", bound.lhs, bound.rhs);
    }
    Ok(())
}

fn penalize(config: &Path, target: &Path, p: f64, gamma0: f64, out: &Path) -> Result<()> {
    let s = setup(config)?;
    let prob = problem(&s);
    let u = DomainMask::read(target)?;
    let (omega, report) = hard_constraint_pipeline(&prob, &u, p, gamma0)?;
    fs::create_dir_all(out)?;
    omega.write(out.join("omega_star.fkmask"))?;
    write_json(&out.join("report.json"), &serde_json::to_value(&report)?)?;
    write_json(
        &out.join("penalty.json"),
        &json!({ "reference": target, "mu": report.mu_star, "p": p, "gamma0": gamma0 }),
    )?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if !report.hypotheses.all_hold() {
        bail!("penalty hypotheses fail: {:?}", report.hypotheses);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Cell { config, out } => cell(&config, &out),
        Command::Eig { config, mask, k, out } => eig(&config, &mask, k, &out),
        Command::Optimize { config, mu, penalty, init, out, trace } => {
            optimize(&config, mu, penalty.as_deref(), init.as_deref(), &out, &trace)
        }
        Command::Sweep { config, levels, out } => sweep(&config, levels, &out),
        Command::Volmap { config, mu_min, mu_max, points, out } => {
            volmap(&config, mu_min, mu_max, points, &out)
        }
        Command::Metrics { mask_a, mask_b, p, gamma0, config } => {
            metrics(&mask_a, &mask_b, p, gamma0, config.as_deref())
        }
        Command::Penalize { config, target_mask, p, gamma0, out } => {
            penalize(&config, &target_mask, p, gamma0, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
