//! Conditional law of a future fBm value given its sampled past.
//!
//! Given the history on `[0, u]`, `B(t)` for `t > u` is Gaussian with mean
//! `B(u) - ∫_0^u Ψ(t, s | u) dB(s)` and variance
//! `r(t, t | u) = R(t, t) - ∫_0^u K(t, v)^2 dv`, where
//!
//! ```text
//! Ψ(t, s | u) = -sin(π(H - 1/2))/π · s^{1/2-H} (u - s)^{1/2-H}
//!               · ∫_u^t z^{H-1/2} (z - u)^{H-1/2} / (z - s) dz.
//! ```
//!
//! The stochastic integral is discretized over the history's own increments
//! with `Ψ` evaluated at interval midpoints, which avoids the integrable
//! singularities at `s = 0` and `s = u`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fbm_kernels::{FbmKernels, SampledPath};

/// Relative agreement required between the order-32 and order-64 rules
/// before the adaptive fallback is used for the `Ψ` inner integral.
pub const PSI_RULE_TOL: f64 = 1e-8;
/// Negative variances above this are quadrature round-off and get clamped.
pub const VARIANCE_CLAMP_FLOOR: f64 = -1e-6;

/// The sampled past of one fBm path, starting at `B(0) = 0`.
///
/// Step lengths are stored as generated, separately from the absolute
/// times, so that gaps below the resolution of the absolute clock are
/// still known exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    times: Vec<f64>,
    steps: Vec<f64>,
    values: Vec<f64>,
}

impl Default for History {
    fn default() -> Self {
        History::new()
    }
}

impl History {
    pub fn new() -> Self {
        History { times: alloc::vec![0.0], steps: Vec::new(), values: alloc::vec![0.0] }
    }

    /// History from a path whose grid starts at `0`.
    pub fn from_path(path: &SampledPath) -> Result<Self> {
        let times = path.times();
        if times.first() != Some(&0.0) {
            return Err(Error::domain(
                "prediction::History::from_path",
                "history grid must start at time 0 with value 0",
            ));
        }
        let mut history = History::new();
        for i in 1..times.len() {
            history.steps.push(times[i] - times[i - 1]);
            history.times.push(times[i]);
            history.values.push(path.values()[i]);
        }
        Ok(history)
    }

    /// Appends `B(u + step) = value`.
    pub fn push(&mut self, step: f64, value: f64) {
        let u = self.last_time();
        self.times.push(u + step);
        self.steps.push(step);
        self.values.push(value);
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("history is never empty")
    }

    pub fn last_value(&self) -> f64 {
        *self.values.last().expect("history is never empty")
    }

    /// Number of points, including the origin.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A request for the law of `B(u + step)` given a [`History`] ending at `u`.
#[derive(Debug, Clone, Copy)]
pub struct PredictionQuery<'a> {
    history: &'a History,
    step: f64,
}

impl<'a> PredictionQuery<'a> {
    /// Query at absolute time `target > u`.
    pub fn new(history: &'a History, target: f64) -> Result<Self> {
        let u = history.last_time();
        if !(target > u) || !target.is_finite() {
            return Err(Error::domain(
                "prediction::PredictionQuery::new",
                format!("target {target} must exceed the last observed time {u}"),
            ));
        }
        Ok(PredictionQuery { history, step: target - u })
    }

    /// Query `step > 0` past the end of the history.
    pub fn with_step(history: &'a History, step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::domain(
                "prediction::PredictionQuery::with_step",
                format!("step {step} must be positive and finite"),
            ));
        }
        Ok(PredictionQuery { history, step })
    }

    pub fn history(&self) -> &'a History {
        self.history
    }

    pub fn u(&self) -> f64 {
        self.history.last_time()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn target(&self) -> f64 {
        self.u() + self.step
    }
}

/// The `z`-integral of `Ψ(t, ·| u)` for one `(u, t)` pair, with the nodes of
/// both rules precomputed so each `s` costs one pass of divisions.
///
/// Under `z = u + L w^p`, `L = t - u`, `p = 1/(H + 1/2)`, the factor
/// `(z - u)^{H-1/2} dz` becomes `p L^{H+1/2} dw`.
struct PsiIntegrator<'k> {
    kernels: &'k FbmKernels,
    u: f64,
    len: f64,
    p: f64,
    scale: f64,
    low: Vec<(f64, f64)>,
    high: Vec<(f64, f64)>,
}

impl<'k> PsiIntegrator<'k> {
    fn new(kernels: &'k FbmKernels, u: f64, len: f64) -> Self {
        let h = kernels.hurst().value();
        let a = kernels.hurst().alpha();
        let p = 1.0 / (h + 0.5);
        let scale = p * libm::pow(len, h + 0.5);
        let nodes = |rule: &crate::quad::GaussLegendre| -> Vec<(f64, f64)> {
            rule.nodes()
                .iter()
                .zip(rule.weights())
                .map(|(&xi, &omega)| {
                    let w = 0.5 * (1.0 + xi);
                    let q = len * libm::pow(w, p);
                    (q, 0.5 * omega * scale * libm::pow(u + q, a))
                })
                .collect()
        };
        let gl = kernels.adaptive_gl();
        PsiIntegrator { kernels, u, len, p, scale, low: nodes(gl.low()), high: nodes(gl.high()) }
    }

    /// `∫_u^{u+L} z^a (z-u)^a / (z - s) dz` with `gap = u - s > 0`.
    fn integral(&self, gap: f64) -> f64 {
        let sum = |nodes: &[(f64, f64)]| nodes.iter().map(|&(q, w)| w / (gap + q)).sum::<f64>();
        let hi = sum(&self.high);
        let lo = sum(&self.low);
        if libm::fabs(hi - lo) <= PSI_RULE_TOL * libm::fabs(hi) {
            return hi;
        }
        let a = self.kernels.hurst().alpha();
        let (u, len, p, scale) = (self.u, self.len, self.p, self.scale);
        self.kernels
            .adaptive_gl()
            .integrate(
                |w| {
                    let q = len * libm::pow(w, p);
                    scale * libm::pow(u + q, a) / (gap + q)
                },
                0.0,
                1.0,
                PSI_RULE_TOL,
                60,
            )
            .value
    }

    /// `Ψ(u + L, s | u)` for `s = u - gap`.
    fn psi(&self, s: f64, gap: f64) -> f64 {
        let a = self.kernels.hurst().alpha();
        -libm::sin(PI * a) / PI * libm::pow(s, -a) * libm::pow(gap, -a) * self.integral(gap)
    }
}

/// `Ψ(t, s | u)` for `0 < s < u < t`.
pub fn psi_kernel(kernels: &FbmKernels, t: f64, s: f64, u: f64) -> Result<f64> {
    if !(s > 0.0 && s < u && u < t) {
        return Err(Error::domain(
            "prediction::psi_kernel",
            format!("need 0 < s < u < t, got s={s}, u={u}, t={t}"),
        ));
    }
    if kernels.hurst().is_brownian() {
        return Ok(0.0);
    }
    Ok(PsiIntegrator::new(kernels, u, t - u).psi(s, u - s))
}

/// `-∫_0^u Ψ(t, s | u) dB(s)` as a midpoint sum over the history increments.
fn mean_offset(kernels: &FbmKernels, query: &PredictionQuery<'_>) -> f64 {
    let history = query.history;
    if kernels.hurst().is_brownian() || history.steps.is_empty() {
        return 0.0;
    }
    let integrator = PsiIntegrator::new(kernels, query.u(), query.step);
    let mut tail = 0.0; // u - s_{j+1}
    let mut acc = 0.0;
    for j in (0..history.steps.len()).rev() {
        let dt = history.steps[j];
        let db = history.values[j + 1] - history.values[j];
        let gap = tail + 0.5 * dt;
        tail += dt;
        if db == 0.0 {
            continue;
        }
        let mid = history.times[j] + 0.5 * dt;
        acc += integrator.psi(mid, gap) * db;
    }
    -acc
}

/// Conditional mean of `B(target)` given the history.
pub fn predict_mean(kernels: &FbmKernels, query: &PredictionQuery<'_>) -> Result<f64> {
    let mean = query.history.last_value() + mean_offset(kernels, query);
    if mean.is_finite() {
        Ok(mean)
    } else {
        Err(Error::numerical("prediction::predict_mean", format!("non-finite mean at target {}", query.target())))
    }
}

/// A conditional variance together with whether round-off clamping applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceEstimate {
    pub value: f64,
    pub clamped: bool,
}

/// `r(t1, t2 | u) = R(t1, t2) - ∫_0^u K(t1, v) K(t2, v) dv`.
///
/// When `u` is past half of `min(t1, t2)` the equivalent form
/// `∫_u^{min(t1,t2)} K(t1, v) K(t2, v) dv` is used instead, which avoids the
/// cancellation of the difference form for short horizons.
pub fn predict_variance(kernels: &FbmKernels, t1: f64, t2: f64, u: f64) -> Result<VarianceEstimate> {
    const OP: &str = "prediction::predict_variance";
    if !(u >= 0.0 && t1 >= u && t2 >= u) {
        return Err(Error::domain(OP, format!("need 0 <= u <= t1, t2, got u={u}, t1={t1}, t2={t2}")));
    }
    let m = t1.min(t2);
    let value = if u == 0.0 {
        kernels.covariance_raw(t1, t2)
    } else if kernels.hurst().is_brownian() {
        m - u
    } else if t1 == t2 && u > 0.5 * m {
        kernels.tail_square_integral(u, t1 - u)?
    } else if u > 0.5 * m {
        kernels.kernel_product_integral(t1, t2, u, m)?
    } else {
        kernels.covariance_raw(t1, t2) - kernels.kernel_product_integral(t1, t2, 0.0, u)?
    };
    if !value.is_finite() {
        return Err(Error::numerical(OP, format!("non-finite variance {value}")));
    }
    if t1 == t2 && value < 0.0 {
        if value < VARIANCE_CLAMP_FLOOR {
            return Err(Error::numerical(
                OP,
                format!("conditional variance {value:e} below {VARIANCE_CLAMP_FLOOR:e}: quadrature inconsistency"),
            ));
        }
        log::debug!("{OP}: clamped variance {value:e} to 0 at t={t1}, u={u}");
        return Ok(VarianceEstimate { value: 0.0, clamped: true });
    }
    Ok(VarianceEstimate { value, clamped: false })
}

/// Mean offset and variance of the increment `B(target) - B(u)`.
pub fn increment_law(kernels: &FbmKernels, query: &PredictionQuery<'_>) -> Result<(f64, f64)> {
    let mu = mean_offset(kernels, query);
    let var = kernels.tail_square_integral(query.u(), query.step)?;
    if !mu.is_finite() || !var.is_finite() || var < 0.0 {
        return Err(Error::numerical(
            "prediction::sample_increment",
            format!(
                "invalid increment law (mu = {mu}, sigma^2 = {var}) for u = {}, step = {:e}",
                query.u(),
                query.step
            ),
        ));
    }
    Ok((mu, var))
}

/// Draws `B(target) - B(u)` from its conditional law.
pub fn sample_increment<R: Rng + ?Sized>(
    kernels: &FbmKernels,
    query: &PredictionQuery<'_>,
    rng: &mut R,
) -> Result<f64> {
    let (mu, var) = increment_law(kernels, query)?;
    let z: f64 = rng.sample(StandardNormal);
    Ok(mu + libm::sqrt(var) * z)
}
