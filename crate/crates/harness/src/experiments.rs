//! The experiments behind each CLI subcommand, and their output files.

use std::fmt::Write as _;
use std::path::Path;

use fbm_blowup_core::fbm_kernels::{calibrate, Calibration, ExactPath, FbmKernels, HurstParam};
use fbm_blowup_core::lamperti::{osgood_criterion, validate_assumptions, LampertiModel, OsgoodOptions, OsgoodResult, ValidationReport};
use fbm_blowup_core::rng::stream;
use fbm_blowup_core::scheme::{
    explosion_time_estimate, hitting_time, map_to_x, ratio_diagnostic, run_adaptive, run_adaptive_with, sup_error,
    tail_bracket_k0, truncate_drift, AdaptiveTrajectory, ExplosionEstimate, SchemeConfig, SharedPathNoise, StopReason,
};
use rayon::prelude::*;

use crate::config::{Experiment, RunConfig};
use crate::error::{HarnessError, Result};
use crate::output::{self, median, num};
use crate::plot::LinePlot;

/// Largest accepted relative defect of the kernel covariance identity.
pub const KERNEL_DEFECT_TOL: f64 = 1e-3;

/// Outcome of one scheme path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSummary {
    pub path_index: u64,
    pub seed: u64,
    pub stop_reason: StopReason,
    pub steps: usize,
    pub t_last: f64,
    /// Present for threshold-hitting paths whose tail series converge.
    pub estimate: Option<ExplosionEstimate>,
    pub final_ratio: Option<f64>,
    pub bracket_k0: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRun {
    pub trajectory: AdaptiveTrajectory,
    pub summary: PathSummary,
}

/// Runs path `index` on its own RNG stream and derives its diagnostics.
pub fn run_path(
    model: &LampertiModel,
    kernels: &FbmKernels,
    scheme: &SchemeConfig,
    alpha: f64,
    index: u64,
) -> Result<PathRun> {
    let traj = run_adaptive(model, kernels, scheme, stream(scheme.seed, index))?;
    let traj = map_to_x(&traj, model);
    let stop_reason = traj.stop_reason.expect("finished runs carry a stop reason");
    let (estimate, bracket_k0) = if stop_reason == StopReason::ThresholdHit {
        let estimate = explosion_time_estimate(&traj, model, alpha)
            .map_err(|e| log::warn!("path {index}: no explosion estimate: {e}"))
            .ok();
        let k0 = tail_bracket_k0(&traj, model, alpha)
            .map_err(|e| log::warn!("path {index}: no tail bracket: {e}"))
            .ok()
            .flatten();
        (estimate, k0)
    } else {
        (None, None)
    };
    let summary = PathSummary {
        path_index: index,
        seed: scheme.seed,
        stop_reason,
        steps: traj.steps(),
        t_last: traj.last_time(),
        estimate,
        final_ratio: ratio_diagnostic(&traj, scheme.h).last().copied(),
        bracket_k0,
    };
    Ok(PathRun { trajectory: traj, summary })
}

/// Paths `0..n_paths` in parallel; results are ordered by index and do not
/// depend on scheduling.
pub fn run_paths(
    model: &LampertiModel,
    kernels: &FbmKernels,
    scheme: &SchemeConfig,
    alpha: f64,
    n_paths: usize,
) -> Result<Vec<PathRun>> {
    (0..n_paths as u64).into_par_iter().map(|i| run_path(model, kernels, scheme, alpha, i)).collect()
}

/// Errors of one shared-noise path against the reference run.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergencePath {
    pub path_index: u64,
    pub errors: Vec<f64>,
    pub t_max: Vec<f64>,
    /// Per `h`: the reference reaches `M` after the coarse run reaches `2M`.
    pub reference_late: Vec<bool>,
    /// Per `h`: the coarse run reaches `M` after the reference reaches `2M`.
    pub coarse_late: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub h_values: Vec<f64>,
    pub h_ref: f64,
    pub paths: Vec<ConvergencePath>,
    pub medians: Vec<f64>,
    /// Fractions of paths with `reference_late` and `coarse_late`, per `h`.
    pub p_reference_late: Vec<f64>,
    pub p_coarse_late: Vec<f64>,
}

impl ConvergenceReport {
    /// Whether the median error strictly decreases along decreasing `h`.
    pub fn strictly_decreasing(&self) -> bool {
        let mut pairs: Vec<(f64, f64)> = self.h_values.iter().copied().zip(self.medians.iter().copied()).collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        pairs.windows(2).all(|w| w[1].1 < w[0].1)
    }
}

/// Shared-noise comparison of the scheme with truncated drift `ḡ` against
/// a fine reference run.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub model: LampertiModel,
    pub hurst: HurstParam,
    pub sigma: f64,
    /// Deterministic horizon `S`.
    pub horizon: f64,
    pub h_values: Vec<f64>,
    pub h_ref: f64,
    pub truncation_m: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub max_exact_points: usize,
}

impl ConvergenceStudy {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let scheme = cfg.scheme.as_ref().ok_or_else(|| HarnessError::config("convergence needs a scheme section"))?;
        let h_values = cfg.options.h_values.clone().unwrap_or_else(|| vec![scheme.h]);
        let min_h = h_values.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(ConvergenceStudy {
            model: cfg.lamperti()?,
            hurst: cfg.hurst_param()?,
            sigma: scheme.sigma_const,
            horizon: scheme.horizon.ok_or_else(|| HarnessError::config("convergence needs scheme.horizon"))?,
            h_values,
            h_ref: min_h / cfg.options.ref_divisor.unwrap_or(16.0),
            truncation_m: cfg.options.truncation_m.unwrap_or(5.0),
            n_paths: cfg.n_paths,
            seed: scheme.seed,
            max_exact_points: cfg.options.max_exact_points.unwrap_or(8000),
        })
    }

    fn scheme(&self, h: f64, threshold: f64) -> SchemeConfig {
        SchemeConfig {
            sigma: self.sigma,
            y0: self.model.y0(),
            horizon: self.horizon,
            max_steps: self.max_exact_points,
            seed: self.seed,
            ..SchemeConfig::new(h, threshold)
        }
    }

    /// Sup errors on `[0, T]`, `T = T_M(ref) ∧ T_2M(coarse) ∧ S`.
    pub fn run_path(&self, index: u64) -> Result<ConvergencePath> {
        let g = truncate_drift(&self.model, self.truncation_m)?;
        let m = self.truncation_m;
        let mut path = ExactPath::new(self.hurst, stream(self.seed, index), self.max_exact_points);
        let reference = run_adaptive_with(&g, &self.scheme(self.h_ref, 2.0 * m), &mut SharedPathNoise::new(&mut path))?;
        let ref_m = hitting_time(&reference, m);
        let ref_2m = hitting_time(&reference, 2.0 * m);
        let n = self.h_values.len();
        let (mut errors, mut t_max) = (Vec::with_capacity(n), Vec::with_capacity(n));
        let (mut reference_late, mut coarse_late) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for &h in &self.h_values {
            let coarse = run_adaptive_with(&g, &self.scheme(h, 2.0 * m), &mut SharedPathNoise::new(&mut path))?;
            let coarse_2m = hitting_time(&coarse, 2.0 * m);
            let t = [ref_m, coarse_2m, Some(self.horizon)].into_iter().flatten().fold(f64::INFINITY, f64::min);
            errors.push(sup_error(&coarse, &reference, &g, self.sigma, &mut path, t)?);
            t_max.push(t);
            reference_late.push(later(ref_m, coarse_2m));
            coarse_late.push(later(hitting_time(&coarse, m), ref_2m));
        }
        Ok(ConvergencePath { path_index: index, errors, t_max, reference_late, coarse_late })
    }

    pub fn run(&self) -> Result<ConvergenceReport> {
        let paths: Vec<ConvergencePath> =
            (0..self.n_paths as u64).into_par_iter().map(|i| self.run_path(i)).collect::<Result<_>>()?;
        let medians = (0..self.h_values.len())
            .map(|j| median(&paths.iter().map(|p| p.errors[j]).collect::<Vec<_>>()))
            .collect();
        let fraction = |j: usize, pick: fn(&ConvergencePath) -> &Vec<bool>| {
            paths.iter().filter(|p| pick(p)[j]).count() as f64 / paths.len() as f64
        };
        let p_reference_late = (0..self.h_values.len()).map(|j| fraction(j, |p| &p.reference_late)).collect();
        let p_coarse_late = (0..self.h_values.len()).map(|j| fraction(j, |p| &p.coarse_late)).collect();
        Ok(ConvergenceReport {
            h_values: self.h_values.clone(),
            h_ref: self.h_ref,
            paths,
            medians,
            p_reference_late,
            p_coarse_late,
        })
    }
}

/// Whether the level crossing at `a` happens after the one at `b`; a level
/// never reached counts as reached after any finite time.
fn later(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (_, None) => false,
        (None, Some(_)) => true,
        (Some(a), Some(b)) => a > b,
    }
}

/// One entry of the kernel consistency table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyRow {
    pub hurst: f64,
    pub t: f64,
    pub s: f64,
    pub covariance: f64,
    pub integral: f64,
    pub rel_defect: f64,
}

/// `|∫_0^{t∧s} K(t,v)K(s,v)dv - R(t,s)| / R(t,s)` on the 5×5 grid of
/// `[0.2, 2]`.
pub fn kernel_consistency(hurst: HurstParam) -> Result<Vec<ConsistencyRow>> {
    let kernels = FbmKernels::new(hurst);
    let grid: Vec<f64> = (0..5).map(|i| 0.2 + 0.45 * i as f64).collect();
    let mut rows = Vec::with_capacity(25);
    for &t in &grid {
        for &s in &grid {
            let covariance = kernels.covariance(t, s)?;
            let integral = kernels.kernel_product_integral(t, s, 0.0, t.min(s))?;
            let rel_defect = (integral - covariance).abs() / covariance;
            rows.push(ConsistencyRow { hurst: hurst.value(), t, s, covariance, integral, rel_defect });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelCheckReport {
    pub calibrations: Vec<Calibration>,
    pub consistency: Vec<ConsistencyRow>,
}

impl KernelCheckReport {
    pub fn max_rel_defect(&self) -> f64 {
        self.consistency.iter().map(|r| r.rel_defect).fold(0.0, f64::max)
    }
}

pub fn kernel_check(hurst_values: &[f64]) -> Result<KernelCheckReport> {
    let params = hurst_values.iter().map(|&h| HurstParam::new(h)).collect::<fbm_blowup_core::Result<Vec<_>>>()?;
    let calibrations = params.par_iter().map(|&h| calibrate(h)).collect();
    let consistency = params
        .par_iter()
        .map(|&h| kernel_consistency(h))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(KernelCheckReport { calibrations, consistency })
}

/// Everything an experiment produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Report {
    Simulate(PathRun),
    MonteCarlo(Vec<PathSummary>),
    Osgood { a: f64, result: OsgoodResult },
    Validate(ValidationReport),
    KernelCheck(KernelCheckReport),
    Convergence(ConvergenceReport),
}

/// Runs the configured experiment without touching the filesystem. Monte
/// Carlo runs keep every path when `options.write_paths` is set and the
/// first few (for plotting) otherwise.
pub fn execute(cfg: &RunConfig) -> Result<(Report, Vec<PathRun>)> {
    let alpha = cfg.alpha();
    match cfg.experiment {
        Experiment::Simulate | Experiment::MonteCarlo => {
            let model = cfg.lamperti()?;
            let kernels = FbmKernels::new(cfg.hurst_param()?);
            let scheme = cfg.scheme_config(&model)?;
            if cfg.experiment == Experiment::Simulate {
                let run = run_path(&model, &kernels, &scheme, alpha, 0)?;
                Ok((Report::Simulate(run), Vec::new()))
            } else {
                let runs = run_paths(&model, &kernels, &scheme, alpha, cfg.n_paths)?;
                let summaries = runs.iter().map(|r| r.summary.clone()).collect();
                let keep = if cfg.options.write_paths.unwrap_or(false) { runs } else { runs.into_iter().take(6).collect() };
                Ok((Report::MonteCarlo(summaries), keep))
            }
        }
        Experiment::Osgood => {
            let spec = cfg.model.spec()?;
            let a = cfg.options.osgood_from.unwrap_or(spec.x0());
            let result = osgood_criterion(|s| spec.drift_b(s), a, OsgoodOptions::default())?;
            Ok((Report::Osgood { a, result }, Vec::new()))
        }
        Experiment::Validate => {
            let spec = cfg.model.spec()?;
            let lo = cfg.options.validate_lo.unwrap_or(spec.x0() / 10.0);
            let hi = cfg.options.validate_hi.unwrap_or(spec.x0() * 100.0);
            let grid = cfg.options.validate_grid.unwrap_or(1001);
            Ok((Report::Validate(validate_assumptions(&spec, lo, hi, grid)?), Vec::new()))
        }
        Experiment::KernelCheck => {
            let values = cfg.options.hurst_values.clone().unwrap_or_else(|| vec![cfg.hurst]);
            Ok((Report::KernelCheck(kernel_check(&values)?), Vec::new()))
        }
        Experiment::Convergence => {
            let report = ConvergenceStudy::from_config(cfg)?.run()?;
            Ok((Report::Convergence(report), Vec::new()))
        }
    }
}

fn path_plots(dir: &Path, run: &PathRun) -> Result<()> {
    let traj = &run.trajectory;
    let xs = traj.x_values.as_deref().unwrap_or(&[]);
    LinePlot::new("X^h(t_k)", "t", "X")
        .log_y()
        .series("X", traj.times.iter().copied().zip(xs.iter().copied()).collect())
        .write(&dir.join("path.svg"))?;
    let ratio = ratio_diagnostic(traj, traj.h);
    LinePlot::new("Y^h(t_k) / (h k)", "k", "ratio")
        .series("ratio", ratio.iter().enumerate().map(|(k, &r)| ((k + 1) as f64, r)).collect())
        .write(&dir.join("ratio.svg"))?;
    LinePlot::new("t_k", "k", "t")
        .series("t_k", traj.times.iter().enumerate().map(|(k, &t)| (k as f64, t)).collect())
        .write(&dir.join("times.svg"))
}

/// Writes the CSV (and optionally SVG) files of a report into `dir`.
pub fn write_report(dir: &Path, report: &Report, paths: &[PathRun], emit_svg: bool, write_paths: bool) -> Result<()> {
    match report {
        Report::Simulate(run) => {
            output::write_trajectory(&dir.join("trajectory.csv"), &run.trajectory)?;
            output::write_summary(&dir.join("summary.csv"), std::slice::from_ref(&run.summary))?;
            if emit_svg {
                path_plots(dir, run)?;
            }
        }
        Report::MonteCarlo(rows) => {
            output::write_summary(&dir.join("summary.csv"), rows)?;
            output::write_quantiles(&dir.join("quantiles.csv"), rows)?;
            if write_paths {
                for run in paths {
                    let name = format!("trajectory_{:04}.csv", run.summary.path_index);
                    output::write_trajectory(&dir.join("paths").join(name), &run.trajectory)?;
                }
            }
            if emit_svg {
                let mut plot = LinePlot::new("Y^h(t_k), first paths", "k", "Y");
                for run in paths.iter().take(6) {
                    let pts = run.trajectory.y_values.iter().enumerate().map(|(k, &y)| (k as f64, y)).collect();
                    plot = plot.series(&format!("path {}", run.summary.path_index), pts);
                }
                plot.write(&dir.join("paths.svg"))?;
            }
        }
        Report::Osgood { a, result } => output::write_osgood(&dir.join("osgood.csv"), *a, result)?,
        Report::Validate(v) => output::write_validation(&dir.join("validation.csv"), v)?,
        Report::KernelCheck(k) => {
            output::write_calibration(&dir.join("d_h_calibration.csv"), &k.calibrations)?;
            output::write_consistency(&dir.join("kernel_consistency.csv"), &k.consistency)?;
        }
        Report::Convergence(c) => {
            output::write_convergence(&dir.join("convergence.csv"), c)?;
            output::write_convergence_summary(&dir.join("convergence_summary.csv"), c)?;
            if emit_svg {
                LinePlot::new("median sup error", "h", "error")
                    .log_x()
                    .log_y()
                    .with_markers()
                    .series("median", c.h_values.iter().copied().zip(c.medians.iter().copied()).collect())
                    .write(&dir.join("convergence.svg"))?;
            }
        }
    }
    Ok(())
}

/// Human-readable digest of a report.
pub fn describe(report: &Report) -> String {
    let mut s = String::new();
    match report {
        Report::Simulate(run) => {
            let r = &run.summary;
            let _ = writeln!(s, "stop_reason={} steps={} t_last={}", r.stop_reason, r.steps, num(r.t_last));
            if let Some(e) = r.estimate {
                let _ = writeln!(s, "explosion time in [{}, {}]", num(e.lower()), num(e.upper()));
            }
        }
        Report::MonteCarlo(rows) => {
            let mut counts = std::collections::BTreeMap::new();
            for r in rows {
                *counts.entry(r.stop_reason.as_str()).or_insert(0usize) += 1;
            }
            let _ = writeln!(s, "paths={} stop_reasons={counts:?}", rows.len());
            let t: Vec<f64> = rows.iter().filter(|r| r.estimate.is_some()).map(|r| r.t_last).collect();
            if !t.is_empty() {
                let _ = writeln!(s, "median t_last over threshold hits={}", num(median(&t)));
            }
        }
        Report::Osgood { a, result } => {
            let verdict = if result.finite { "finite" } else { "infinite" };
            let _ = writeln!(s, "integral from {} is {verdict}: {}", num(*a), num(result.value));
        }
        Report::Validate(v) => {
            for (name, c) in v.checks() {
                let _ = writeln!(s, "{name}: {} ({})", if c.passed { "pass" } else { "FAIL" }, c.detail);
            }
            for n in &v.notes {
                let _ = writeln!(s, "note: {n}");
            }
        }
        Report::KernelCheck(k) => {
            for c in &k.calibrations {
                let _ = writeln!(s, "H={} d_H={} defect={:.3e}", c.hurst, num(c.d_h), c.defect);
            }
            let _ = writeln!(s, "max relative covariance defect={:.3e}", k.max_rel_defect());
        }
        Report::Convergence(c) => {
            for (j, h) in c.h_values.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "h={h} median sup error={} P(T_M ref > T_2M h)={} P(T_M h > T_2M ref)={}",
                    num(c.medians[j]),
                    c.p_reference_late[j],
                    c.p_coarse_late[j]
                );
            }
            let _ = writeln!(s, "strictly decreasing: {}", c.strictly_decreasing());
        }
    }
    s
}

/// Runs `cfg` and writes its outputs into `cfg.outputs.csv_dir`.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    let (report, paths) = execute(cfg)?;
    let write_paths = cfg.options.write_paths.unwrap_or(false);
    write_report(&cfg.outputs.csv_dir, &report, &paths, cfg.outputs.emit_svg, write_paths)?;
    if let Report::KernelCheck(k) = &report {
        let defect = k.max_rel_defect();
        if !(defect <= KERNEL_DEFECT_TOL) {
            return Err(HarnessError::Check(format!(
                "max relative covariance defect {defect:.3e} exceeds {KERNEL_DEFECT_TOL:e}"
            )));
        }
    }
    Ok(report)
}
