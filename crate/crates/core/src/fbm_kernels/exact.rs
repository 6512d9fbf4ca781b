//! Exact Gaussian machinery over arbitrary finite sets of times: joint
//! covariance, Cholesky factorization, sampling, and Schur-complement
//! conditioning.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{covariance_unchecked, HurstParam, SampledPath, TimeGrid, MIN_TIME_SEPARATION};
use crate::error::{Error, Result};

/// Diagonal jitter, relative to the largest diagonal entry, tried once when a
/// pivot is not positive.
pub const JITTER_SCALE: f64 = 1e-12;

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn max_diagonal(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).fold(0.0, f64::max)
    }
}

/// Joint covariance of `B(t_1), ..., B(t_n)`.
pub fn joint_covariance_matrix(grid: &TimeGrid, hurst: HurstParam) -> Result<SymMatrix> {
    let times = grid.times();
    if times.is_empty() {
        return Err(Error::domain("fbm_kernels::joint_covariance_matrix", "empty grid"));
    }
    let n = times.len();
    let mut data = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let c = covariance_unchecked(times[i], times[j], hurst.value());
            data[i * n + j] = c;
            data[j * n + i] = c;
        }
    }
    Ok(SymMatrix { n, data })
}

/// Lower-triangular Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factors `m`; a nonpositive pivot gets one jitter of
    /// `JITTER_SCALE * max diag` before the factorization gives up.
    pub fn factor(m: &SymMatrix) -> Result<Self> {
        let n = m.n;
        let jitter = JITTER_SCALE * m.max_diagonal();
        let mut lower = alloc::vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = m.get(i, j);
                for k in 0..j {
                    sum -= lower[i * n + k] * lower[j * n + k];
                }
                if i == j {
                    let pivot = if sum > 0.0 { sum } else { sum + jitter };
                    if !(pivot > 0.0) {
                        return Err(Error::numerical(
                            "fbm_kernels::Cholesky::factor",
                            format!("nonpositive pivot {sum:e} at index {i}"),
                        ));
                    }
                    lower[i * n + i] = libm::sqrt(pivot);
                } else {
                    lower[i * n + j] = sum / lower[j * n + j];
                }
            }
        }
        Ok(Cholesky { n, lower })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.lower[i * self.n + j]
        }
    }

    /// `L z`.
    pub fn mul_vec(&self, z: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..=i).map(|k| self.lower[i * self.n + k] * z[k]).sum())
            .collect()
    }
}

/// Draws `B` jointly on `grid` as `L z` with `z` standard normal.
pub fn sample_path_exact<R: Rng + ?Sized>(
    grid: &TimeGrid,
    hurst: HurstParam,
    rng: &mut R,
) -> Result<SampledPath> {
    const OP: &str = "fbm_kernels::sample_path_exact";
    if grid.is_empty() {
        return Err(Error::domain(OP, "empty grid"));
    }
    if grid.times()[0] <= 0.0 {
        return Err(Error::domain(OP, "sampling times must be strictly positive"));
    }
    let cov = joint_covariance_matrix(grid, hurst)?;
    let chol = Cholesky::factor(&cov)?;
    let z: Vec<f64> = (0..grid.len()).map(|_| rng.sample(StandardNormal)).collect();
    SampledPath::new(grid.clone(), chol.mul_vec(&z))
}

/// Conditional law of one future value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conditional {
    pub mean: f64,
    pub variance: f64,
}

/// Incrementally factored set of observations `B(t_i) = b_i`, `t_i > 0`.
///
/// Keeps the Cholesky rows `L` of the observed covariance and the whitened
/// values `w = L^{-1} b`, so a conditional query costs one forward
/// substitution and an observation appends one row.
#[derive(Debug, Clone)]
pub struct GaussianConditioner {
    hurst: HurstParam,
    times: Vec<f64>,
    rows: Vec<Vec<f64>>,
    white: Vec<f64>,
    max_diag: f64,
}

impl GaussianConditioner {
    pub fn new(hurst: HurstParam) -> Self {
        GaussianConditioner { hurst, times: Vec::new(), rows: Vec::new(), white: Vec::new(), max_diag: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Returns the projection coefficients `L^{-1} c` and the raw Schur
    /// complement `R(t,t) - |L^{-1} c|^2`.
    fn project(&self, t: f64) -> (Vec<f64>, f64) {
        let h = self.hurst.value();
        let n = self.times.len();
        let mut a = Vec::with_capacity(n + 1);
        let mut norm2 = 0.0;
        for i in 0..n {
            let row = &self.rows[i];
            let v = (covariance_unchecked(t, self.times[i], h) - dot(&row[..i], &a)) / row[i];
            norm2 += v * v;
            a.push(v);
        }
        (a, covariance_unchecked(t, t, h) - norm2)
    }

    /// Projection, raw Schur complement and the clamped conditional law.
    fn conditional_parts(&self, t: f64) -> Result<(Vec<f64>, f64, Conditional)> {
        const OP: &str = "fbm_kernels::GaussianConditioner::conditional";
        let (a, raw) = self.project(t);
        let mean = dot(&a, &self.white);
        let scale = self.max_diag.max(covariance_unchecked(t, t, self.hurst.value()));
        if raw < -JITTER_SCALE * scale || !raw.is_finite() || !mean.is_finite() {
            return Err(Error::numerical(
                OP,
                format!("observed block is singular (conditional variance {raw:e} at t = {t})"),
            ));
        }
        Ok((a, raw, Conditional { mean, variance: raw.max(0.0) }))
    }

    /// Schur-complement mean and variance of `B(t)` given the observations.
    pub fn conditional(&self, t: f64) -> Result<Conditional> {
        if !(t >= 0.0) {
            return Err(Error::domain("fbm_kernels::GaussianConditioner::conditional", format!("negative time {t}")));
        }
        if t == 0.0 {
            return Ok(Conditional { mean: 0.0, variance: 0.0 });
        }
        self.conditional_parts(t).map(|(_, _, c)| c)
    }

    /// Appends `B(t) = value`. Time 0 carries no information and is skipped.
    pub fn observe(&mut self, t: f64, value: f64) -> Result<()> {
        const OP: &str = "fbm_kernels::GaussianConditioner::observe";
        if t == 0.0 {
            if value != 0.0 {
                return Err(Error::domain(OP, "B(0) must be 0"));
            }
            return Ok(());
        }
        if !(t > 0.0) {
            return Err(Error::domain(OP, format!("negative time {t}")));
        }
        let (a, raw) = self.project(t);
        self.append(t, value, a, raw)
    }

    fn append(&mut self, t: f64, value: f64, mut a: Vec<f64>, raw: f64) -> Result<()> {
        let diag = covariance_unchecked(t, t, self.hurst.value());
        let max_diag = self.max_diag.max(diag);
        let pivot2 = if raw > 0.0 { raw } else { raw + JITTER_SCALE * max_diag };
        if !(pivot2 > 0.0) {
            return Err(Error::numerical(
                "fbm_kernels::GaussianConditioner::observe",
                format!("nonpositive pivot {raw:e} at index {}", self.times.len()),
            ));
        }
        let pivot = libm::sqrt(pivot2);
        let mean = dot(&a, &self.white);
        self.white.push((value - mean) / pivot);
        a.push(pivot);
        self.rows.push(a);
        self.times.push(t);
        self.max_diag = max_diag;
        Ok(())
    }
}

/// Dot product with four independent accumulators.
fn dot(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    let (x, y) = (&x[..n], &y[..n]);
    let mut acc = [0.0; 4];
    let mut cx = x.chunks_exact(4);
    let mut cy = y.chunks_exact(4);
    for (a, b) in (&mut cx).zip(&mut cy) {
        acc[0] += a[0] * b[0];
        acc[1] += a[1] * b[1];
        acc[2] += a[2] * b[2];
        acc[3] += a[3] * b[3];
    }
    let tail: f64 = cx.remainder().iter().zip(cy.remainder()).map(|(a, b)| a * b).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Exact conditional mean and variance of `B(new_time)` given `path`.
pub fn extend_exact(path: &SampledPath, new_time: f64, hurst: HurstParam) -> Result<(f64, f64)> {
    const OP: &str = "fbm_kernels::extend_exact";
    if path.times().contains(&new_time) {
        return Err(Error::domain(OP, format!("time {new_time} already observed")));
    }
    let mut cond = GaussianConditioner::new(hurst);
    for (&t, &b) in path.times().iter().zip(path.values()) {
        cond.observe(t, b)?;
    }
    let c = cond.conditional(new_time)?;
    Ok((c.mean, c.variance))
}

/// One fBm path realized lazily: every requested time is sampled from its
/// exact conditional law given all previously realized times, in whatever
/// order the requests arrive.
#[derive(Debug, Clone)]
pub struct ExactPath<R> {
    conditioner: GaussianConditioner,
    /// Realized `(time, value)` pairs sorted by time, time 0 included.
    sorted: Vec<(f64, f64)>,
    rng: R,
    max_points: usize,
}

impl<R: Rng> ExactPath<R> {
    pub fn new(hurst: HurstParam, rng: R, max_points: usize) -> Self {
        ExactPath {
            conditioner: GaussianConditioner::new(hurst),
            sorted: alloc::vec![(0.0, 0.0)],
            rng,
            max_points,
        }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Realized points, sorted by time.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.sorted
    }

    /// `B(t)`, sampling it if the time is new.
    pub fn value_at(&mut self, t: f64) -> Result<f64> {
        const OP: &str = "fbm_kernels::ExactPath::value_at";
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::domain(OP, format!("invalid time {t}")));
        }
        let idx = self.sorted.partition_point(|&(s, _)| s < t);
        if idx < self.sorted.len() && self.sorted[idx].0 == t {
            return Ok(self.sorted[idx].1);
        }
        let too_close = |i: usize| libm::fabs(self.sorted[i].0 - t) < MIN_TIME_SEPARATION;
        if (idx > 0 && too_close(idx - 1)) || (idx < self.sorted.len() && too_close(idx)) {
            return Err(Error::domain(
                OP,
                format!("time {t} is within {MIN_TIME_SEPARATION:e} of a realized time"),
            ));
        }
        if self.sorted.len() >= self.max_points {
            return Err(Error::resource(
                OP,
                format!("exact sampler grid exceeds {} points; use fewer steps or a larger h", self.max_points),
            ));
        }
        let (a, raw, c) = self.conditioner.conditional_parts(t)?;
        let z: f64 = self.rng.sample(StandardNormal);
        let value = c.mean + libm::sqrt(c.variance) * z;
        self.conditioner.append(t, value, a, raw)?;
        self.sorted.insert(idx, (t, value));
        Ok(value)
    }
}
