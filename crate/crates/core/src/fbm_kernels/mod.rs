//! Covariance, Volterra kernel and exact Gaussian sampling for fractional
//! Brownian motion with Hurst exponent `H >= 1/2`.

mod exact;
mod volterra;

pub use exact::{
    extend_exact, joint_covariance_matrix, sample_path_exact, Cholesky, Conditional, ExactPath,
    GaussianConditioner, SymMatrix, JITTER_SCALE,
};
pub use volterra::{calibrate, kernel_constant, volterra_kernel, Calibration, FbmKernels};

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Smallest admissible gap between two sampling times.
pub const MIN_TIME_SEPARATION: f64 = 1e-10;

/// Hurst exponent in `[1/2, 1)`. The value `1/2` is accepted so that the
/// Brownian reduction can be exercised; the adaptive scheme asks for `H > 1/2`
/// through [`HurstParam::require_rough`].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HurstParam(f64);

impl HurstParam {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.5..1.0).contains(&value) {
            return Err(Error::domain(
                "fbm_kernels::HurstParam::new",
                format!("Hurst exponent {value} outside [0.5, 1)"),
            ));
        }
        Ok(HurstParam(value))
    }

    pub const fn value(self) -> f64 {
        self.0
    }

    /// `H - 1/2`, the exponent that appears throughout the kernels.
    pub fn alpha(self) -> f64 {
        self.0 - 0.5
    }

    pub fn is_brownian(self) -> bool {
        self.0 == 0.5
    }

    pub fn require_rough(self, op: &'static str) -> Result<Self> {
        if self.is_brownian() {
            Err(Error::domain(op, "requires H > 1/2"))
        } else {
            Ok(self)
        }
    }
}

/// Strictly increasing, nonnegative sampling times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        const OP: &str = "fbm_kernels::TimeGrid::new";
        for (i, &t) in times.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::domain(OP, format!("time #{i} = {t} is not a finite nonnegative value")));
            }
            if i > 0 {
                let prev = times[i - 1];
                if t <= prev {
                    return Err(Error::domain(OP, format!("times not strictly increasing at #{i}")));
                }
                if t - prev < MIN_TIME_SEPARATION {
                    return Err(Error::domain(
                        OP,
                        format!("times #{} and #{i} closer than {MIN_TIME_SEPARATION:e}", i - 1),
                    ));
                }
            }
        }
        Ok(TimeGrid { times })
    }

    /// `n` equally spaced points `T/n, 2T/n, ..., T`, optionally preceded by 0.
    pub fn uniform(horizon: f64, n: usize, include_zero: bool) -> Result<Self> {
        let mut times = Vec::with_capacity(n + 1);
        if include_zero {
            times.push(0.0);
        }
        times.extend((1..=n).map(|i| horizon * i as f64 / n as f64));
        TimeGrid::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// fBm values observed on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampledPath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SampledPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        const OP: &str = "fbm_kernels::SampledPath::new";
        if grid.len() != values.len() {
            return Err(Error::domain(
                OP,
                format!("{} times but {} values", grid.len(), values.len()),
            ));
        }
        if grid.times().first() == Some(&0.0) && values[0] != 0.0 {
            return Err(Error::domain(OP, "the value at time 0 must be exactly 0"));
        }
        Ok(SampledPath { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.times()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `R_H(t, s) = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2`.
pub fn fbm_covariance(t: f64, s: f64, hurst: HurstParam) -> Result<f64> {
    if !(t >= 0.0 && s >= 0.0) {
        return Err(Error::domain(
            "fbm_kernels::fbm_covariance",
            format!("negative time argument ({t}, {s})"),
        ));
    }
    Ok(covariance_unchecked(t, s, hurst.value()))
}

pub(crate) fn covariance_unchecked(t: f64, s: f64, h: f64) -> f64 {
    let two_h = 2.0 * h;
    if t == s {
        return libm::pow(t, two_h);
    }
    0.5 * (libm::pow(t, two_h) + libm::pow(s, two_h) - libm::pow(libm::fabs(t - s), two_h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hp(h: f64) -> HurstParam {
        HurstParam::new(h).unwrap()
    }

    #[test]
    fn covariance_examples() {
        assert_eq!(fbm_covariance(1.0, 1.0, hp(0.65)).unwrap(), 1.0);
        assert_eq!(fbm_covariance(2.0, 3.0, hp(0.5)).unwrap(), 2.0);
        // 0.5 (4^1.5 + 1 - 3^1.5)
        let v = fbm_covariance(4.0, 1.0, hp(0.75)).unwrap();
        assert!((v - 1.901_923_788_646_684).abs() < 1e-12);
    }

    #[test]
    fn covariance_rejects_negative_time() {
        let err = fbm_covariance(-1.0, 1.0, hp(0.6)).unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
        assert!(fbm_covariance(1.0, f64::NAN, hp(0.6)).is_err());
    }

    #[test]
    fn hurst_range() {
        assert!(HurstParam::new(0.5).is_ok());
        assert!(HurstParam::new(0.49).is_err());
        assert!(HurstParam::new(1.0).is_err());
        assert!(hp(0.5).require_rough("x").is_err());
        assert!(hp(0.51).require_rough("x").is_ok());
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(alloc::vec![0.0, 1.0, 2.0]).is_ok());
        assert!(TimeGrid::new(alloc::vec![1.0, 1.0]).is_err());
        assert!(TimeGrid::new(alloc::vec![2.0, 1.0]).is_err());
        assert!(TimeGrid::new(alloc::vec![-1.0]).is_err());
        assert!(TimeGrid::new(alloc::vec![1.0, 1.0 + 1e-11]).is_err());
        assert!(TimeGrid::new(alloc::vec![1.0, 1.0 + 1e-9]).is_ok());
    }

    #[test]
    fn sampled_path_requires_zero_at_origin() {
        let grid = TimeGrid::new(alloc::vec![0.0, 1.0]).unwrap();
        assert!(SampledPath::new(grid.clone(), alloc::vec![0.0, 0.3]).is_ok());
        assert!(SampledPath::new(grid.clone(), alloc::vec![0.1, 0.3]).is_err());
        assert!(SampledPath::new(grid, alloc::vec![0.0]).is_err());
    }

    proptest! {
        #[test]
        fn grid_accepts_exactly_increasing_nonnegative_times(times in proptest::collection::vec(-0.5f64..3.0, 0..12)) {
            let valid = times.iter().all(|&t| t >= 0.0)
                && times.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] >= MIN_TIME_SEPARATION);
            prop_assert_eq!(TimeGrid::new(times).is_ok(), valid);
        }

        #[test]
        fn sorted_grids_pair_with_values(mut times in proptest::collection::vec(0.0f64..3.0, 1..12), v in -2.0f64..2.0) {
            times.sort_by(f64::total_cmp);
            times.dedup_by(|a, b| *a - *b < MIN_TIME_SEPARATION);
            let grid = TimeGrid::new(times.clone()).unwrap();
            let mut values = alloc::vec![v; times.len()];
            let ok = SampledPath::new(grid.clone(), values.clone()).is_ok();
            prop_assert_eq!(ok, times[0] != 0.0 || v == 0.0);
            values[0] = 0.0;
            prop_assert!(SampledPath::new(grid.clone(), values.clone()).is_ok());
            values.push(0.0);
            prop_assert!(SampledPath::new(grid, values).is_err());
        }

        #[test]
        fn covariance_is_symmetric(t in 0.0f64..5.0, s in 0.0f64..5.0, h in 0.5f64..0.99) {
            let h = hp(h);
            prop_assert_eq!(fbm_covariance(t, s, h).unwrap(), fbm_covariance(s, t, h).unwrap());
        }

        #[test]
        fn covariance_is_self_similar(t in 0.01f64..5.0, s in 0.01f64..5.0, h in 0.5f64..0.99,
                                      a in prop::sample::select(alloc::vec![0.5f64, 2.0])) {
            let h = hp(h);
            let lhs = fbm_covariance(a * t, a * s, h).unwrap();
            let rhs = libm::pow(a, 2.0 * h.value()) * fbm_covariance(t, s, h).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }
    }
}
