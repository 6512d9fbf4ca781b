//! Adaptive Euler scheme for `dY = g(Y) dt + σ dB` with step sizes
//! `τ_k = h / g(Y_k)`, so every step adds exactly `h` of drift.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::fbm_kernels::{ExactPath, FbmKernels};
use crate::lamperti::LampertiModel;
use crate::prediction::{sample_increment, History, PredictionQuery};

/// Default safety bound on `|Y|`.
pub const DEFAULT_OVERFLOW_CAP: f64 = 1e300;
/// Default cap on the prediction history.
pub const DEFAULT_MAX_HISTORY: usize = 100_000;
/// Default bracket factor for the tail bounds.
pub const DEFAULT_ALPHA: f64 = 1.2;
/// Terms below this fraction of the partial sum end a tail series.
pub const TAIL_TRUNCATION: f64 = 1e-16;
/// Tail series longer than this are reported as divergent.
pub const MAX_TAIL_TERMS: u64 = 10_000_000;

/// Parameters of one scheme run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub h: f64,
    /// Noise scale; `0` runs the drift-only recursion.
    pub sigma: f64,
    pub y0: f64,
    pub y_threshold: f64,
    pub horizon: f64,
    pub max_steps: usize,
    pub overflow_cap: f64,
    pub seed: u64,
}

impl SchemeConfig {
    /// Unit noise, `y0 = 0`, no horizon, `10^5` steps.
    pub fn new(h: f64, y_threshold: f64) -> Self {
        SchemeConfig {
            h,
            sigma: 1.0,
            y0: 0.0,
            y_threshold,
            horizon: f64::INFINITY,
            max_steps: 100_000,
            overflow_cap: DEFAULT_OVERFLOW_CAP,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h < 1.0) {
            return Err(Error::config("scheme.h", format!("need 0 < h < 1, got {}", self.h)));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::config("scheme.sigma_const", format!("need sigma >= 0, got {}", self.sigma)));
        }
        if !self.y0.is_finite() {
            return Err(Error::config("scheme.y0", format!("non-finite initial value {}", self.y0)));
        }
        if !(self.y_threshold > libm::fabs(self.y0)) {
            return Err(Error::config(
                "scheme.y_threshold",
                format!("threshold {} must exceed |y(0)| = {}", self.y_threshold, libm::fabs(self.y0)),
            ));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::config("scheme.horizon", format!("need horizon > 0, got {}", self.horizon)));
        }
        if self.max_steps < 1 {
            return Err(Error::config("scheme.max_steps", "need max_steps >= 1"));
        }
        if !(self.overflow_cap >= self.y_threshold) {
            return Err(Error::config(
                "scheme.overflow_cap",
                format!("overflow cap {} is below the threshold {}", self.overflow_cap, self.y_threshold),
            ));
        }
        Ok(())
    }
}

/// The `Y` level matching an `X` level, `Θ(x)`.
pub fn y_threshold_from_x(model: &LampertiModel, x_threshold: f64) -> Result<f64> {
    model.theta(x_threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopReason {
    ThresholdHit,
    HorizonReached,
    StepCap,
    Overflow,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::ThresholdHit => "ThresholdHit",
            StopReason::HorizonReached => "HorizonReached",
            StopReason::StepCap => "StepCap",
            StopReason::Overflow => "Overflow",
        }
    }
}

impl core::fmt::Display for StopReason {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A recorded scheme run.
///
/// `times` and `y_values` hold `K + 1` entries, `tau` and
/// `noise_increments` hold `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveTrajectory {
    pub h: f64,
    pub times: Vec<f64>,
    pub tau: Vec<f64>,
    pub y_values: Vec<f64>,
    pub noise_increments: Vec<f64>,
    pub x_values: Option<Vec<f64>>,
    /// First index where `Θ^{-1}` failed, if `x_values` is truncated.
    pub x_truncated_at: Option<usize>,
    /// `None` while the run is in progress.
    pub stop_reason: Option<StopReason>,
}

impl AdaptiveTrajectory {
    pub fn start(h: f64, y0: f64) -> Self {
        AdaptiveTrajectory {
            h,
            times: alloc::vec![0.0],
            tau: Vec::new(),
            y_values: alloc::vec![y0],
            noise_increments: Vec::new(),
            x_values: None,
            x_truncated_at: None,
            stop_reason: None,
        }
    }

    /// Number of completed steps `K`.
    pub fn steps(&self) -> usize {
        self.tau.len()
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("trajectory has an initial point")
    }

    pub fn last_y(&self) -> f64 {
        *self.y_values.last().expect("trajectory has an initial point")
    }

    /// `t_K - t_k` summed from the step lengths, which stays accurate after
    /// the absolute clock has stopped resolving steps.
    pub fn remaining_times(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.tau.len() + 1];
        for k in (0..self.tau.len()).rev() {
            out[k] = out[k + 1] + self.tau[k];
        }
        out
    }
}

/// The transformed drift `g`.
pub trait Drift {
    fn value(&self, y: f64) -> Result<f64>;
}

impl<D: Drift + ?Sized> Drift for &D {
    fn value(&self, y: f64) -> Result<f64> {
        (**self).value(y)
    }
}

impl Drift for LampertiModel {
    fn value(&self, y: f64) -> Result<f64> {
        self.drift(y)
    }
}

/// A drift given by a plain function.
#[derive(Debug, Clone, Copy)]
pub struct FnDrift<F>(pub F);

impl<F: Fn(f64) -> f64> Drift for FnDrift<F> {
    fn value(&self, y: f64) -> Result<f64> {
        Ok((self.0)(y))
    }
}

/// `ḡ(y) = g(clamp(y, -2M, 2M))`.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedDrift<D> {
    inner: D,
    band: f64,
}

impl<D> TruncatedDrift<D> {
    pub fn band(&self) -> f64 {
        self.band
    }

    pub fn inner(&self) -> &D {
        &self.inner
    }
}

impl<D: Drift> Drift for TruncatedDrift<D> {
    fn value(&self, y: f64) -> Result<f64> {
        self.inner.value(y.clamp(-self.band, self.band))
    }
}

/// Bounds `g` by freezing it outside `[-2M, 2M]`.
pub fn truncate_drift<D: Drift>(g: D, m: f64) -> Result<TruncatedDrift<D>> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::domain("scheme::truncate_drift", format!("need M > 0, got {m}")));
    }
    Ok(TruncatedDrift { inner: g, band: 2.0 * m })
}

/// Supplies `B(t + step) - B(t)` for consecutive scheme steps.
pub trait NoiseSource {
    /// Increment over `[from, from + step]`; calls arrive in time order and
    /// each `from` is the previous call's endpoint.
    fn increment(&mut self, from: f64, step: f64) -> Result<f64>;
}

/// Noise from the conditional law given the path's own past.
#[derive(Debug)]
pub struct PredictiveNoise<'k, R> {
    kernels: &'k FbmKernels,
    history: History,
    rng: R,
    max_history: usize,
}

impl<'k, R: Rng> PredictiveNoise<'k, R> {
    pub fn new(kernels: &'k FbmKernels, rng: R) -> Self {
        PredictiveNoise { kernels, history: History::new(), rng, max_history: DEFAULT_MAX_HISTORY }
    }

    pub fn with_max_history(mut self, max_history: usize) -> Self {
        self.max_history = max_history;
        self
    }

    pub fn history(&self) -> &History {
        &self.history
    }
}

impl<R: Rng> NoiseSource for PredictiveNoise<'_, R> {
    fn increment(&mut self, _from: f64, step: f64) -> Result<f64> {
        if self.history.len() >= self.max_history {
            return Err(Error::resource(
                "scheme::PredictiveNoise::increment",
                format!("history exceeds {} points", self.max_history),
            ));
        }
        let query = PredictionQuery::with_step(&self.history, step)?;
        let db = sample_increment(self.kernels, &query, &mut self.rng)?;
        let value = self.history.last_value() + db;
        self.history.push(step, value);
        Ok(db)
    }
}

/// Noise read off a lazily sampled path shared between runs.
#[derive(Debug)]
pub struct SharedPathNoise<'p, R> {
    path: &'p mut ExactPath<R>,
}

impl<'p, R: Rng> SharedPathNoise<'p, R> {
    pub fn new(path: &'p mut ExactPath<R>) -> Self {
        SharedPathNoise { path }
    }
}

impl<R: Rng> NoiseSource for SharedPathNoise<'_, R> {
    fn increment(&mut self, from: f64, step: f64) -> Result<f64> {
        let a = self.path.value_at(from)?;
        let b = self.path.value_at(from + step)?;
        Ok(b - a)
    }
}

/// Advances `traj` by one step. Returns `Some(Overflow)` without stepping
/// when `g` has overflowed or the step no longer registers.
pub fn adaptive_step<D: Drift + ?Sized, N: NoiseSource + ?Sized>(
    traj: &mut AdaptiveTrajectory,
    drift: &D,
    config: &SchemeConfig,
    noise: &mut N,
) -> Result<Option<StopReason>> {
    let y = traj.last_y();
    let t = traj.last_time();
    let k = traj.steps();
    let g = drift.value(y)?;
    if g == f64::INFINITY {
        return Ok(Some(StopReason::Overflow));
    }
    if !(g > 0.0) {
        return Err(Error::Scheme {
            op: "scheme::adaptive_step",
            step: k,
            t,
            y,
            detail: format!("drift g = {g} is not positive and finite"),
        });
    }
    let tau = config.h / g;
    if tau == 0.0 {
        return Ok(Some(StopReason::Overflow));
    }
    let db = if config.sigma == 0.0 { 0.0 } else { noise.increment(t, tau)? };
    traj.tau.push(tau);
    traj.times.push(t + tau);
    traj.y_values.push(y + config.h + config.sigma * db);
    traj.noise_increments.push(db);
    Ok(None)
}

fn stop_check(traj: &AdaptiveTrajectory, config: &SchemeConfig) -> Option<StopReason> {
    let y = traj.last_y();
    if !y.is_finite() || libm::fabs(y) > config.overflow_cap {
        Some(StopReason::Overflow)
    } else if libm::fabs(y) >= config.y_threshold {
        Some(StopReason::ThresholdHit)
    } else if traj.last_time() >= config.horizon {
        Some(StopReason::HorizonReached)
    } else if traj.steps() >= config.max_steps {
        Some(StopReason::StepCap)
    } else {
        None
    }
}

/// Runs the scheme with an arbitrary drift and noise source.
pub fn run_adaptive_with<D: Drift + ?Sized, N: NoiseSource + ?Sized>(
    drift: &D,
    config: &SchemeConfig,
    noise: &mut N,
) -> Result<AdaptiveTrajectory> {
    config.validate()?;
    let mut traj = AdaptiveTrajectory::start(config.h, config.y0);
    loop {
        if let Some(reason) = stop_check(&traj, config) {
            traj.stop_reason = Some(reason);
            return Ok(traj);
        }
        if let Some(reason) = adaptive_step(&mut traj, drift, config, noise)? {
            traj.stop_reason = Some(reason);
            return Ok(traj);
        }
    }
}

/// Runs the scheme for a Lamperti-transformed model with noise from the
/// prediction formula.
pub fn run_adaptive<R: Rng>(
    model: &LampertiModel,
    kernels: &FbmKernels,
    config: &SchemeConfig,
    rng: R,
) -> Result<AdaptiveTrajectory> {
    let g0 = model.drift(config.y0)?;
    if !(g0 > 0.0 && g0.is_finite()) {
        return Err(Error::Scheme {
            op: "scheme::run_adaptive",
            step: 0,
            t: 0.0,
            y: config.y0,
            detail: format!("drift at the initial value is {g0}"),
        });
    }
    let mut noise = PredictiveNoise::new(kernels, rng).with_max_history(config.max_steps.saturating_add(1));
    run_adaptive_with(model, config, &mut noise)
}

/// First time `|Y| >= level`, interpolating the drift within the crossing
/// step.
pub fn hitting_time(traj: &AdaptiveTrajectory, level: f64) -> Option<f64> {
    let y = &traj.y_values;
    if libm::fabs(y[0]) >= level {
        return Some(traj.times[0]);
    }
    let k = (0..traj.steps()).find(|&k| libm::fabs(y[k + 1]) >= level)?;
    let (t, tau) = (traj.times[k], traj.tau[k]);
    if y[k + 1] >= level {
        let frac = ((level - y[k]) / traj.h).clamp(0.0, 1.0);
        Some((t + frac * tau).min(traj.times[k + 1]))
    } else {
        Some(traj.times[k + 1])
    }
}

/// `Y_k / (h k)` for `k = 1..=K`.
pub fn ratio_diagnostic(traj: &AdaptiveTrajectory, h: f64) -> Vec<f64> {
    traj.y_values.iter().enumerate().skip(1).map(|(k, &y)| y / (h * k as f64)).collect()
}

/// Interval estimate of the explosion time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplosionEstimate {
    pub t_last: f64,
    pub tail_lower: f64,
    pub tail_upper: f64,
}

impl ExplosionEstimate {
    pub fn lower(&self) -> f64 {
        self.t_last + self.tail_lower
    }

    pub fn upper(&self) -> f64 {
        self.t_last + self.tail_upper
    }

    pub fn width(&self) -> f64 {
        self.tail_upper - self.tail_lower
    }
}

/// `Σ_{j>=k} h / g(scale h j)`, truncated once terms fall below
/// [`TAIL_TRUNCATION`] of the partial sum.
pub fn tail_sum<D: Drift + ?Sized>(drift: &D, h: f64, scale: f64, k: u64) -> Result<f64> {
    let mut sum = 0.0;
    for i in 0..MAX_TAIL_TERMS {
        let j = k + i;
        let g = drift.value(scale * h * j as f64)?;
        let term = h / g;
        if !(term >= 0.0) {
            return Err(Error::numerical("scheme::tail_sum", format!("invalid term {term} at j = {j}")));
        }
        sum += term;
        if term <= TAIL_TRUNCATION * sum {
            return Ok(sum);
        }
    }
    Err(Error::numerical(
        "scheme::explosion_time_estimate",
        format!("tail series did not converge within {MAX_TAIL_TERMS} terms; the drift grows too slowly"),
    ))
}

/// `t_K` plus the tail bounds `Σ_{j>=K} h/g(α h j)` and `Σ_{j>=K} h/g(h j/α)`.
pub fn explosion_time_estimate<D: Drift + ?Sized>(
    traj: &AdaptiveTrajectory,
    drift: &D,
    alpha: f64,
) -> Result<ExplosionEstimate> {
    const OP: &str = "scheme::explosion_time_estimate";
    if traj.stop_reason != Some(StopReason::ThresholdHit) {
        return Err(Error::domain(OP, format!("trajectory stopped with {:?}, not ThresholdHit", traj.stop_reason)));
    }
    if !(alpha > 1.0) {
        return Err(Error::domain(OP, format!("need alpha > 1, got {alpha}")));
    }
    let k = traj.steps() as u64;
    let tail_lower = tail_sum(drift, traj.h, alpha, k)?;
    let tail_upper = tail_sum(drift, traj.h, 1.0 / alpha, k)?;
    Ok(ExplosionEstimate { t_last: traj.last_time(), tail_lower, tail_upper })
}

/// Smallest `k0` such that for every `k0 <= k < K` the trajectory's own
/// remaining time `t_K - t_k` lies between `Σ_{j=k}^{K-1} h/g(α h j)` and
/// `Σ_{j=k}^{K-1} h/g(h j/α)`; `None` when even the last step violates it.
pub fn tail_bracket_k0<D: Drift + ?Sized>(traj: &AdaptiveTrajectory, drift: &D, alpha: f64) -> Result<Option<usize>> {
    let h = traj.h;
    let remaining = traj.remaining_times();
    let (mut lower, mut upper) = (0.0, 0.0);
    let mut k0 = None;
    for k in (0..traj.steps()).rev() {
        let j = k as f64;
        lower += h / drift.value(alpha * h * j)?;
        upper += h / drift.value(h * j / alpha)?;
        let r = remaining[k];
        // Relative slack for summation-order round-off.
        let slack = 1e-12 * r;
        if r + slack >= lower && r - slack <= upper {
            k0 = Some(k);
        } else {
            break;
        }
    }
    Ok(k0)
}

/// Adds `X = Θ^{-1}(Y)`; stops at the first point outside the range of `Θ`.
pub fn map_to_x(traj: &AdaptiveTrajectory, model: &LampertiModel) -> AdaptiveTrajectory {
    let mut out = traj.clone();
    let mut xs = Vec::with_capacity(traj.y_values.len());
    out.x_truncated_at = None;
    for (k, &y) in traj.y_values.iter().enumerate() {
        match model.theta_inverse(y) {
            Ok(x) => xs.push(x),
            Err(e) => {
                log::debug!("scheme::map_to_x: truncated at k = {k}: {e}");
                out.x_truncated_at = Some(k);
                break;
            }
        }
    }
    out.x_values = Some(xs);
    out
}

/// `Y(t) = Y_k + g(Y_k)(t - t_k) + σ(B(t) - B(t_k))` for `t_k <= t < t_{k+1}`,
/// with `B` supplied by the caller; `None` past the last recorded time.
pub fn interpolate<D: Drift + ?Sized, B: FnMut(f64) -> Result<f64>>(
    traj: &AdaptiveTrajectory,
    drift: &D,
    sigma: f64,
    mut b: B,
    t: f64,
) -> Result<Option<f64>> {
    let times = &traj.times;
    if !(t >= 0.0) || t > traj.last_time() {
        return Ok(None);
    }
    let idx = times.partition_point(|&s| s <= t) - 1;
    let yk = traj.y_values[idx];
    if times[idx] == t {
        return Ok(Some(yk));
    }
    let g = drift.value(yk)?;
    let noise = if sigma == 0.0 { 0.0 } else { sigma * (b(t)? - b(times[idx])?) };
    Ok(Some(yk + g * (t - times[idx]) + noise))
}

/// `sup |Y_a(t) - Y_b(t)|` over the union of both grids up to `t_max`,
/// with both runs driven by the same realized path.
pub fn sup_error<D: Drift + ?Sized, R: Rng>(
    a: &AdaptiveTrajectory,
    b: &AdaptiveTrajectory,
    drift: &D,
    sigma: f64,
    path: &mut ExactPath<R>,
    t_max: f64,
) -> Result<f64> {
    let mut grid: Vec<f64> = a.times.iter().chain(b.times.iter()).copied().filter(|&t| t <= t_max).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut sup = 0.0_f64;
    for t in grid {
        let ya = interpolate(a, drift, sigma, |s| path.value_at(s), t)?;
        let yb = interpolate(b, drift, sigma, |s| path.value_at(s), t)?;
        if let (Some(ya), Some(yb)) = (ya, yb) {
            sup = sup.max(libm::fabs(ya - yb));
        }
    }
    Ok(sup)
}
