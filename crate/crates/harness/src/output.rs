//! CSV persistence. Reals are written with 17 significant digits so that
//! reruns compare byte for byte.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use fbm_blowup_core::fbm_kernels::Calibration;
use fbm_blowup_core::lamperti::{OsgoodResult, ValidationReport};
use fbm_blowup_core::scheme::{AdaptiveTrajectory, StopReason};

use crate::error::{HarnessError, Result};
use crate::experiments::{ConsistencyRow, ConvergenceReport, PathSummary};

/// `{:.16e}`, with `nan`/`inf` spelled out.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn finish(path: &Path, wtr: csv::Writer<BufWriter<File>>, trailer: &[String]) -> Result<()> {
    let mut inner = wtr.into_inner().map_err(|e| HarnessError::io(path, e.into_error()))?;
    for line in trailer {
        writeln!(inner, "# {line}").map_err(|e| HarnessError::io(path, e))?;
    }
    inner.flush().map_err(|e| HarnessError::io(path, e))
}

/// Columns `k,t_k,tau_k,y,x,db`; the final row has no step, and the stop
/// reason follows as a comment line.
pub fn write_trajectory(path: &Path, traj: &AdaptiveTrajectory) -> Result<()> {
    let mut wtr = create(path)?;
    wtr.write_record(["k", "t_k", "tau_k", "y", "x", "db"])?;
    let xs = traj.x_values.as_deref().unwrap_or(&[]);
    for k in 0..traj.times.len() {
        wtr.write_record([
            k.to_string(),
            num(traj.times[k]),
            opt(traj.tau.get(k).copied()),
            num(traj.y_values[k]),
            opt(xs.get(k).copied()),
            opt(traj.noise_increments.get(k).copied()),
        ])?;
    }
    let reason = traj.stop_reason.map_or("Running", |r| r.as_str());
    finish(path, wtr, &[format!("stop_reason={reason}")])
}

pub fn write_summary(path: &Path, rows: &[PathSummary]) -> Result<()> {
    let mut wtr = create(path)?;
    wtr.write_record([
        "path_index",
        "seed",
        "stop_reason",
        "steps",
        "t_last",
        "tail_lower",
        "tail_upper",
        "final_ratio",
        "bracket_k0",
    ])?;
    for r in rows {
        wtr.write_record([
            r.path_index.to_string(),
            r.seed.to_string(),
            r.stop_reason.as_str().to_string(),
            r.steps.to_string(),
            num(r.t_last),
            opt(r.estimate.map(|e| e.tail_lower)),
            opt(r.estimate.map(|e| e.tail_upper)),
            opt(r.final_ratio),
            r.bracket_k0.map(|k| k.to_string()).unwrap_or_default(),
        ])?;
    }
    finish(path, wtr, &[])
}

pub const QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

/// Quantiles of per-path statistics over the threshold-hitting paths.
pub fn write_quantiles(path: &Path, rows: &[PathSummary]) -> Result<()> {
    let hit: Vec<&PathSummary> = rows.iter().filter(|r| r.stop_reason == StopReason::ThresholdHit).collect();
    let stats: [(&str, Vec<f64>); 4] = [
        ("t_last", hit.iter().map(|r| r.t_last).collect()),
        ("steps", hit.iter().map(|r| r.steps as f64).collect()),
        ("final_ratio", hit.iter().filter_map(|r| r.final_ratio).collect()),
        ("explosion_midpoint", hit.iter().filter_map(|r| r.estimate.map(|e| 0.5 * (e.lower() + e.upper()))).collect()),
    ];
    let mut wtr = create(path)?;
    wtr.write_record(["statistic", "count", "q05", "q25", "q50", "q75", "q95"])?;
    for (name, mut values) in stats {
        values.sort_by(f64::total_cmp);
        let mut rec = vec![name.to_string(), values.len().to_string()];
        rec.extend(QUANTILES.iter().map(|&q| num(quantile(&values, q))));
        wtr.write_record(&rec)?;
    }
    finish(path, wtr, &[])
}

/// Columns `H,d_H,defect`.
pub fn write_calibration(path: &Path, rows: &[Calibration]) -> Result<()> {
    let mut wtr = create(path)?;
    wtr.write_record(["H", "d_H", "defect"])?;
    for c in rows {
        wtr.write_record([num(c.hurst), num(c.d_h), num(c.defect)])?;
    }
    finish(path, wtr, &[])
}

pub fn write_consistency(path: &Path, rows: &[ConsistencyRow]) -> Result<()> {
    let mut wtr = create(path)?;
    wtr.write_record(["H", "t", "s", "covariance", "kernel_integral", "rel_defect"])?;
    for r in rows {
        wtr.write_record([num(r.hurst), num(r.t), num(r.s), num(r.covariance), num(r.integral), num(r.rel_defect)])?;
    }
    finish(path, wtr, &[])
}

pub fn write_osgood(path: &Path, a: f64, result: &OsgoodResult) -> Result<()> {
    let mut wtr = create(path)?;
    wtr.write_record(["a", "finite", "value", "doublings"])?;
    wtr.write_record([num(a), result.finite.to_string(), num(result.value), result.doublings.to_string()])?;
    finish(path, wtr, &[])
}

pub fn write_validation(path: &Path, report: &ValidationReport) -> Result<()> {
    let mut wtr = create(path)?;
    wtr.write_record(["check", "passed", "witness", "value", "detail"])?;
    for (name, c) in report.checks() {
        wtr.write_record([name.to_string(), c.passed.to_string(), opt(c.witness), opt(c.value), c.detail.clone()])?;
    }
    let mut trailer = vec![format!("domain=[{}, {}]", num(report.lo), num(report.hi))];
    trailer.extend(report.notes.iter().cloned());
    finish(path, wtr, &trailer)
}

/// Per-path sup errors, columns `path_index,h,sup_error,t_max`.
pub fn write_convergence(path: &Path, report: &ConvergenceReport) -> Result<()> {
    let mut wtr = create(path)?;
    wtr.write_record(["path_index", "h", "sup_error", "t_max"])?;
    for p in &report.paths {
        for (h, (e, t)) in report.h_values.iter().zip(p.errors.iter().zip(&p.t_max)) {
            wtr.write_record([p.path_index.to_string(), num(*h), num(*e), num(*t)])?;
        }
    }
    finish(path, wtr, &[format!("h_ref={}", num(report.h_ref))])
}

/// Median sup error per step parameter.
pub fn write_convergence_summary(path: &Path, report: &ConvergenceReport) -> Result<()> {
    let mut wtr = create(path)?;
    wtr.write_record(["h", "median_sup_error", "p_reference_late", "p_coarse_late"])?;
    for (j, h) in report.h_values.iter().enumerate() {
        wtr.write_record([
            num(*h),
            num(report.medians[j]),
            num(report.p_reference_late[j]),
            num(report.p_coarse_late[j]),
        ])?;
    }
    finish(path, wtr, &[format!("h_ref={}", num(report.h_ref))])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_has_17_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.0), "-2.0000000000000000e0");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(f64::NAN), "nan");
        assert_eq!("1.0000000000000001e-1".parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert_eq!(quantile(&v, 0.1), 1.4);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn trajectory_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut traj = AdaptiveTrajectory::start(0.1, 0.0);
        traj.times.push(0.1);
        traj.tau.push(0.1);
        traj.y_values.push(0.1);
        traj.noise_increments.push(0.0);
        traj.stop_reason = Some(StopReason::ThresholdHit);
        write_trajectory(&path, &traj).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,t_k,tau_k,y,x,db");
        assert_eq!(lines[2], "1,1.0000000000000001e-1,,1.0000000000000001e-1,,");
        assert_eq!(lines[3], "# stop_reason=ThresholdHit");
    }

    #[test]
    fn quantiles_use_threshold_paths_only() {
        let row = |i: u64, stop, t_last| PathSummary {
            path_index: i,
            seed: 0,
            stop_reason: stop,
            steps: 10,
            t_last,
            estimate: None,
            final_ratio: Some(1.0),
            bracket_k0: None,
        };
        let rows = [
            row(0, StopReason::ThresholdHit, 1.0),
            row(1, StopReason::StepCap, 50.0),
            row(2, StopReason::ThresholdHit, 3.0),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.csv");
        write_quantiles(&path, &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let t_last = text.lines().find(|l| l.starts_with("t_last")).unwrap();
        assert!(t_last.starts_with("t_last,2,"), "{t_last}");
        assert!(t_last.contains(",2.0000000000000000e0,"), "{t_last}");
    }
}
