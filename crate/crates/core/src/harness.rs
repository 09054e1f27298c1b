//! Multiplier sweeps, log-log rate fits and report files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cell::HomogenizedTensor;
use crate::coeff::Coefficients;
use crate::config::{EigenOptions, SweepOptions};
use crate::eigen::{diagnostics, eigen_with_guess};
use crate::error::{Error, Result};
use crate::geometry::{asymmetry, density_report, hausdorff_boundary, DomainMask};
use crate::shape_opt::{OptResult, ShapeProblem};
use crate::special::LAMBDA_UNIT_DISK;

/// Sweep CSV header, in column order.
pub const SWEEP_HEADER: &str = "mu,m,lambda_a,lambda_bar_ellipsoid,scaled_err,asym,hausdorff_scaled,lip_scaled,nondeg_scaled,kappa0,strip_P,calE,iters";

/// One multiplier level of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mu: f64,
    pub m: f64,
    pub lambda_a: f64,
    /// `λ₁(E, ā)` for the ellipsoid with `|E| = m`.
    pub lambda_bar_ellipsoid: f64,
    /// `m·|λ₁(U, a) − λ₁(E, ā)|`.
    pub scaled_err: f64,
    pub asym: f64,
    pub hausdorff_scaled: f64,
    pub lip_scaled: f64,
    pub nondeg_scaled: f64,
    pub kappa0: f64,
    #[serde(rename = "strip_P")]
    pub strip_p: f64,
    /// `|E|(λ₁(E, a) − λ₁(E, ā)) + |U|(λ₁(U, ā) − λ₁(U, a))`, with `E` the
    /// asymmetry-optimal ellipsoid.
    #[serde(rename = "calE")]
    pub cal_e: f64,
    pub iters: usize,
}

/// Ordinary least squares fit `log y = slope·log x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square residual in log space.
    pub residual: f64,
    pub rows_used: usize,
}

pub fn fit_loglog(x: &[f64], y: &[f64]) -> Result<RateFit> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter("fit inputs differ in length".into()));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientRows { need: 3, got: x.len() });
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter("log-log fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("fit abscissae are all equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    Ok(RateFit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
        rows_used: lx.len(),
    })
}

/// `mu_start·factor^k` for `k < levels`: decreasing `μ`, growing volume.
pub fn mu_levels(opts: &SweepOptions) -> Vec<f64> {
    (0..opts.levels)
        .map(|k| opts.mu_start * opts.factor.powi(k as i32))
        .collect()
}

/// Closed-form `λ₁(E, ā)` for an `ā`-ellipsoid of volume `m`.
pub fn lambda_bar_ellipsoid(abar: &HomogenizedTensor, m: f64) -> f64 {
    LAMBDA_UNIT_DISK * std::f64::consts::PI * abar.det_abar.sqrt() / m
}

/// Measures every [`SweepRow`] quantity for an optimizer result.
pub fn sweep_row<C: Coefficients + ?Sized>(
    problem: &ShapeProblem<'_, C>,
    mu: f64,
    res: &OptResult,
) -> Result<SweepRow> {
    let u = &res.mask;
    let m = u.volume();
    let lambda_a = res.lambda1;
    let lambda_bar = lambda_bar_ellipsoid(&problem.abar, m);
    let asym = asymmetry(u, problem.abar.abar)?;
    let e = asym.ellipsoid.rasterize_auto(problem.h)?;
    let lam_a = |mask: &DomainMask| -> Result<f64> {
        Ok(eigen_with_guess(problem.a, mask, 1, &problem.eig, None)?.lambda1)
    };
    let lam_bar = |mask: &DomainMask| -> Result<f64> {
        Ok(eigen_with_guess(&problem.abar, mask, 1, &problem.eig, None)?.lambda1)
    };
    let cal_e = e.volume() * (lam_a(&e)? - lam_bar(&e)?) + m * (lam_bar(u)? - lambda_a);
    let diag = diagnostics(&res.eigen, u)?;
    let reg = density_report(u)?;
    let row = SweepRow {
        mu,
        m,
        lambda_a,
        lambda_bar_ellipsoid: lambda_bar,
        scaled_err: m * (lambda_a - lambda_bar).abs(),
        asym: asym.value,
        hausdorff_scaled: hausdorff_boundary(u, &e)? / m.sqrt(),
        lip_scaled: diag.lip_scaled,
        nondeg_scaled: diag.nondeg_scaled,
        kappa0: reg.kappa0,
        strip_p: reg.strip_p,
        cal_e,
        iters: res.iterations(),
    };
    let finite = [
        row.lambda_a,
        row.scaled_err,
        row.asym,
        row.hausdorff_scaled,
        row.lip_scaled,
        row.nondeg_scaled,
        row.kappa0,
        row.strip_p,
        row.cal_e,
    ]
    .iter()
    .all(|v| v.is_finite());
    if !finite {
        return Err(Error::Inconsistent(format!("non-finite diagnostic at mu = {mu}")));
    }
    Ok(row)
}

/// Runs the optimizer at each `μ` in decreasing order, starting from the
/// better of the previous level rescaled and the ellipsoid minimizer.
fn run_levels<C: Coefficients + ?Sized>(
    problem: &ShapeProblem<'_, C>,
    mus: &[f64],
    mut each: impl FnMut(f64, &OptResult) -> Result<()>,
) -> Result<()> {
    if mus.len() < 4 {
        return Err(Error::InsufficientRows { need: 4, got: mus.len() });
    }
    let mut order = mus.to_vec();
    order.sort_by(|a, b| b.total_cmp(a));
    if order.windows(2).any(|w| w[0] == w[1]) || order.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
        return Err(Error::InvalidParameter("mu levels must be distinct and positive".into()));
    }
    let mut prev: Option<(DomainMask, f64)> = None;
    for &mu in &order {
        let init = problem.best_start(mu, prev.as_ref().map(|(m, p)| (m, *p)))?;
        let res = problem.optimize(mu, Some(&init))?;
        each(mu, &res)?;
        prev = Some((res.mask, mu));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct RateSweep {
    /// Rows in order of increasing volume.
    pub rows: Vec<SweepRow>,
    /// Slope of `log scaled_err` against `log m`; absent when undefined.
    pub err_fit: Option<RateFit>,
    /// Slope of `log asym` against `log m`.
    pub asym_fit: Option<RateFit>,
    /// Constant coefficients: the error is a discretization floor and the
    /// fit carries no homogenization information.
    pub flagged_constant: bool,
    pub dropped_smallest: bool,
}

impl RateSweep {
    pub fn err_strictly_decreasing(&self) -> bool {
        self.rows.len() >= 2 && self.rows.windows(2).all(|w| w[1].scaled_err < w[0].scaled_err)
    }

    pub fn asym_strictly_decreasing(&self) -> bool {
        self.rows.len() >= 2 && self.rows.windows(2).all(|w| w[1].asym < w[0].asym)
    }
}

/// Sweeps `μ` levels and fits the decay of the scaled eigenvalue error and
/// of the asymmetry in `m`. With `csv`, rows are flushed as they complete.
pub fn rate_sweep<C: Coefficients + ?Sized>(
    problem: &ShapeProblem<'_, C>,
    mus: &[f64],
    drop_smallest: bool,
    csv: Option<&Path>,
) -> Result<RateSweep> {
    let mut writer = match csv {
        Some(p) => Some(RowWriter::create(p)?),
        None => None,
    };
    let mut rows = Vec::new();
    run_levels(problem, mus, |mu, res| {
        let row = sweep_row(problem, mu, res)?;
        if let Some(w) = writer.as_mut() {
            w.write(&row)?;
        }
        rows.push(row);
        Ok(())
    })?;
    let used = if drop_smallest { &rows[1..] } else { &rows[..] };
    let m: Vec<f64> = used.iter().map(|r| r.m).collect();
    let err: Vec<f64> = used.iter().map(|r| r.scaled_err).collect();
    let asym: Vec<f64> = used.iter().map(|r| r.asym).collect();
    let flagged_constant = problem.a.is_uniform();
    Ok(RateSweep {
        err_fit: if flagged_constant { None } else { fit_loglog(&m, &err).ok() },
        asym_fit: fit_loglog(&m, &asym).ok(),
        rows,
        flagged_constant,
        dropped_smallest: drop_smallest,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub mu: f64,
    pub m: f64,
    pub lambda1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingSweep {
    pub rows: Vec<ScalingRow>,
    /// `log λ₁` against `log μ` (target `1/2`).
    pub lambda_fit: RateFit,
    /// `log m` against `log μ` (target `−1/2`).
    pub volume_fit: RateFit,
}

impl ScalingSweep {
    /// Fits over all given rows.
    pub fn from_rows(rows: Vec<ScalingRow>) -> Result<Self> {
        let mu: Vec<f64> = rows.iter().map(|r| r.mu).collect();
        let lam: Vec<f64> = rows.iter().map(|r| r.lambda1).collect();
        let m: Vec<f64> = rows.iter().map(|r| r.m).collect();
        Ok(ScalingSweep {
            lambda_fit: fit_loglog(&mu, &lam)?,
            volume_fit: fit_loglog(&mu, &m)?,
            rows,
        })
    }
}

impl From<&SweepRow> for ScalingRow {
    fn from(r: &SweepRow) -> Self {
        ScalingRow { mu: r.mu, m: r.m, lambda1: r.lambda_a }
    }
}

/// Fits `λ₁ ∼ μ^{1/2}` and `m ∼ μ^{−1/2}` over optimizer runs.
pub fn scaling_sweep<C: Coefficients + ?Sized>(
    problem: &ShapeProblem<'_, C>,
    mus: &[f64],
) -> Result<ScalingSweep> {
    let mut rows = Vec::new();
    run_levels(problem, mus, |mu, res| {
        rows.push(ScalingRow { mu, m: res.mask.volume(), lambda1: res.lambda1 });
        Ok(())
    })?;
    ScalingSweep::from_rows(rows)
}

/// Inputs of the Faber–Krahn margin for one mask, in the frame of `ā`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FkEntry {
    pub volume: f64,
    /// `λ₁(U, ā)`.
    pub lambda_bar: f64,
    pub asym: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FkMargin {
    /// `|U|λ₁(U, ā)/det(ā)^{1/2} − π·j₀,₁²`.
    pub gap: f64,
    pub asym: f64,
    /// `gap/asym²`; absent for zero asymmetry.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FkReport {
    pub margins: Vec<FkMargin>,
    /// Smallest observed ratio: an empirical floor for the constant.
    pub floor: f64,
}

/// Discrete `λ₁(U, ā)` and asymmetry of a mask.
pub fn faber_krahn_entry(
    mask: &DomainMask,
    abar: &HomogenizedTensor,
    eig: &EigenOptions,
) -> Result<FkEntry> {
    Ok(FkEntry {
        volume: mask.volume(),
        lambda_bar: eigen_with_guess(abar, mask, 1, eig, None)?.lambda1,
        asym: asymmetry(mask, abar.abar)?.value,
    })
}

/// Scaled eigenvalue gap over squared asymmetry per entry, using
/// `λ₁(U, ā) = λ₁(ā^{-1/2}U, id)`. Fails if any ratio is not positive.
pub fn faber_krahn_check(entries: &[FkEntry], abar: &HomogenizedTensor) -> Result<FkReport> {
    let ball = std::f64::consts::PI * LAMBDA_UNIT_DISK;
    let root_det = abar.det_abar.sqrt();
    let margins: Vec<FkMargin> = entries
        .iter()
        .map(|e| {
            let gap = e.volume * e.lambda_bar / root_det - ball;
            FkMargin {
                gap,
                asym: e.asym,
                ratio: (e.asym > 0.0).then(|| gap / (e.asym * e.asym)),
            }
        })
        .collect();
    let floor = margins
        .iter()
        .filter_map(|m| m.ratio)
        .fold(f64::INFINITY, f64::min);
    if let Some(bad) = margins.iter().position(|m| m.ratio.is_some_and(|r| r <= 0.0)) {
        return Err(Error::Inconsistent(format!(
            "non-positive Faber-Krahn margin at entry {bad}: gap {} with asymmetry {}",
            margins[bad].gap, margins[bad].asym
        )));
    }
    Ok(FkReport { margins, floor })
}

struct RowWriter {
    inner: csv::Writer<fs::File>,
}

impl RowWriter {
    fn create(path: &Path) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        inner.write_record(SWEEP_HEADER.split(','))?;
        inner.flush()?;
        Ok(RowWriter { inner })
    }

    fn write(&mut self, row: &SweepRow) -> Result<()> {
        self.inner.serialize(row)?;
        self.inner.flush()?;
        Ok(())
    }
}

/// Writes rows under [`SWEEP_HEADER`].
pub fn write_rows(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    let mut w = RowWriter::create(path.as_ref())?;
    for r in rows {
        w.write(r)?;
    }
    Ok(())
}

pub fn read_rows(path: impl AsRef<Path>) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header.join(",") != SWEEP_HEADER {
        return Err(Error::Parse(format!("unexpected sweep header {}", header.join(","))));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Fit summary written next to the sweep CSV.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub err_fit: Option<RateFit>,
    pub asym_fit: Option<RateFit>,
    pub lambda_fit: Option<RateFit>,
    pub volume_fit: Option<RateFit>,
    pub flagged_constant: bool,
    pub dropped_smallest: bool,
    pub err_strictly_decreasing: bool,
    pub asym_strictly_decreasing: bool,
    /// Largest `scaled_err/|calE|` over the rows.
    pub cal_e_constant: Option<f64>,
    /// Largest `asym²/gap` over rows with a positive scaled gap
    /// `m·(λ₁(U, a) − λ₁(E, ā))`.
    pub asym_gap_constant: Option<f64>,
}

impl SweepSummary {
    pub fn new(sweep: &RateSweep, scaling: Option<&ScalingSweep>) -> Self {
        let max_of = |it: &mut dyn Iterator<Item = f64>| {
            it.filter(|v| v.is_finite()).fold(None, |acc: Option<f64>, v| {
                Some(acc.map_or(v, |a| a.max(v)))
            })
        };
        let rows = &sweep.rows;
        SweepSummary {
            err_fit: sweep.err_fit,
            asym_fit: sweep.asym_fit,
            lambda_fit: scaling.map(|s| s.lambda_fit),
            volume_fit: scaling.map(|s| s.volume_fit),
            flagged_constant: sweep.flagged_constant,
            dropped_smallest: sweep.dropped_smallest,
            err_strictly_decreasing: sweep.err_strictly_decreasing(),
            asym_strictly_decreasing: sweep.asym_strictly_decreasing(),
            cal_e_constant: max_of(&mut rows.iter().map(|r| r.scaled_err / r.cal_e.abs())),
            asym_gap_constant: max_of(&mut rows.iter().filter_map(|r| {
                let gap = r.m * (r.lambda_a - r.lambda_bar_ellipsoid);
                (gap > 0.0).then(|| r.asym * r.asym / gap)
            })),
        }
    }
}

/// Writes `sweep.csv` and `summary.json` into `dir`.
pub fn emit_report(
    rows: &[SweepRow],
    summary: &impl Serialize,
    dir: impl AsRef<Path>,
) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let csv_path = dir.join("sweep.csv");
    let json_path = dir.join("summary.json");
    write_rows(&csv_path, rows)?;
    fs::write(&json_path, serde_json::to_string_pretty(summary)?)?;
    Ok((csv_path, json_path))
}
