//! The Volterra kernel `K(t, s)` representing fBm as a Wiener integral, its
//! normalization constant `d_H`, and integrals of kernel products.
//!
//! With `a = H - 1/2`, `x = s/t` and `y = 1 - x`, the kernel factorizes as
//! `K(t, s) = d_H t^a k(x)` where
//!
//! ```text
//! k(x) = x^{-a} y^{a} - a x^{a} J(x),   J(x) = ∫_x^1 w^{-2H} (1 - w)^{a} dw
//! ```
//!
//! (substitute `z = s/w` in the inner integral). `J` is evaluated by two
//! convergent expansions, one around `x = 0` and one around `x = 1`, which
//! keeps the kernel accurate all the way into the `s -> 0` singularity that
//! tanh-sinh abscissae probe. The direct quadrature of the inner integral is
//! kept as an independent route, [`FbmKernels::volterra_kernel_quadrature`].

use alloc::format;

use super::{covariance_unchecked, HurstParam};
use crate::error::{Error, Result};
use crate::quad::{AdaptiveGl, Estimate, TanhSinh};

const SERIES_TOL: f64 = 1e-17;
const SERIES_MAX_TERMS: usize = 400;
/// Relative tolerance for tanh-sinh integrals of kernel products.
pub(crate) const PRODUCT_TOL: f64 = 1e-12;
/// Relative tolerance of the adaptive inner-integral quadrature route.
pub(crate) const INNER_TOL: f64 = 1e-8;

/// Kernel evaluator for one Hurst exponent. Construction calibrates `d_H`
/// and builds the quadrature tables; evaluation is then allocation free.
#[derive(Debug, Clone)]
pub struct FbmKernels {
    hurst: HurstParam,
    alpha: f64,
    d_h: f64,
    /// `B(-2a, a + 1) + 1/(2a)`, the regular part of `J` at `x = 0`.
    j_origin: f64,
    gl: AdaptiveGl,
    ts: TanhSinh,
}

/// Result of pinning `d_H` by `∫_0^1 K(1, v)^2 dv = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub hurst: f64,
    pub d_h: f64,
    /// `|∫_0^1 K(1, v)^2 dv - 1|` re-evaluated through the quadrature route.
    pub defect: f64,
}

impl FbmKernels {
    pub fn new(hurst: HurstParam) -> Self {
        let alpha = hurst.alpha();
        let j_origin = if hurst.is_brownian() {
            0.0
        } else {
            let two_a = 2.0 * alpha;
            libm::tgamma(-two_a) * libm::tgamma(alpha + 1.0) / libm::tgamma(1.0 - alpha) + 1.0 / two_a
        };
        let mut kernels = FbmKernels {
            hurst,
            alpha,
            d_h: 1.0,
            j_origin,
            gl: AdaptiveGl::default(),
            ts: TanhSinh::default(),
        };
        if !hurst.is_brownian() {
            let q = kernels.unit_square_integral();
            kernels.d_h = 1.0 / libm::sqrt(q);
        }
        kernels
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    /// The calibrated constant `d_H` (1 for Brownian motion).
    pub fn kernel_constant(&self) -> f64 {
        self.d_h
    }

    pub(crate) fn adaptive_gl(&self) -> &AdaptiveGl {
        &self.gl
    }

    pub fn covariance(&self, t: f64, s: f64) -> Result<f64> {
        super::fbm_covariance(t, s, self.hurst)
    }

    /// `∫_0^1 k(x)^2 dx` with `d_H = 1`.
    fn unit_square_integral(&self) -> f64 {
        self.ts
            .integrate_offsets(
                |_, x, y| {
                    let k = self.unit_kernel(x, y);
                    k * k
                },
                0.0,
                1.0,
                PRODUCT_TOL,
            )
            .value
    }

    /// `J(x) = ∫_x^1 w^{-2H}(1-w)^a dw` given `x` and `y = 1 - x`.
    fn j_integral(&self, x: f64, y: f64) -> f64 {
        let a = self.alpha;
        if x <= 0.5 {
            // J = (x^{-2a} - 1)/(2a) + j_origin - Σ_{n≥1} c_n x^{n-2a}/(n-2a),
            // c_n = binom(a, n)(-1)^n.
            let two_a = 2.0 * a;
            let lead = libm::expm1(-two_a * libm::log(x)) / two_a;
            let base = libm::pow(x, 1.0 - two_a);
            let mut c = -a;
            let mut xp = base;
            let mut sum = 0.0;
            for n in 1..SERIES_MAX_TERMS {
                let nf = n as f64;
                let term = c * xp / (nf - two_a);
                sum += term;
                if libm::fabs(term) <= SERIES_TOL * libm::fabs(sum) {
                    break;
                }
                c *= (nf - a) / (nf + 1.0);
                xp *= x;
            }
            lead + self.j_origin - sum
        } else {
            // w^{-2H} = Σ (2H)_n/n! (1-w)^n  around w = 1.
            let two_h = 2.0 * self.hurst.value();
            let mut coef = 1.0;
            let mut yp = 1.0;
            let mut sum = 0.0;
            for n in 0..SERIES_MAX_TERMS {
                let nf = n as f64;
                let term = coef * yp / (nf + a + 1.0);
                sum += term;
                if libm::fabs(term) <= SERIES_TOL * libm::fabs(sum) {
                    break;
                }
                coef *= (two_h + nf) / (nf + 1.0);
                yp *= y;
            }
            libm::pow(y, a + 1.0) * sum
        }
    }

    /// `k(x) = K(t, xt) / (d_H t^a)`; the caller supplies `y = 1 - x`
    /// computed without cancellation.
    pub(crate) fn unit_kernel(&self, x: f64, y: f64) -> f64 {
        if self.hurst.is_brownian() {
            return 1.0;
        }
        if y <= 0.0 {
            return 0.0;
        }
        let a = self.alpha;
        libm::pow(y / x, a) - a * libm::pow(x, a) * self.j_integral(x, y)
    }

    /// `K(t, s)` for `0 < s`; zero when `s >= t`.
    pub fn volterra_kernel(&self, t: f64, s: f64) -> Result<f64> {
        check_kernel_args(t, s)?;
        if s >= t {
            return Ok(0.0);
        }
        if self.hurst.is_brownian() {
            return Ok(1.0);
        }
        Ok(self.kernel_with_offset(t, s, t - s))
    }

    /// `K(t, s)` with the gap `t - s` passed in directly.
    pub(crate) fn kernel_with_offset(&self, t: f64, s: f64, gap: f64) -> f64 {
        if self.hurst.is_brownian() {
            return 1.0;
        }
        self.d_h * libm::pow(t, self.alpha) * self.unit_kernel(s / t, gap / t)
    }

    /// `K(t, s)` with the inner integral done by adaptive Gauss–Legendre.
    ///
    /// The inner integral `∫_s^t z^{H-3/2}(z-s)^a dz` is split at `2s`. On
    /// `[s, 2s]` the substitution `z - s = c w^{1/(H+1/2)}` absorbs the
    /// `(z-s)^a` endpoint factor; on `[2s, t]` the integrand is smooth in
    /// `log z`.
    pub fn volterra_kernel_quadrature(&self, t: f64, s: f64) -> Result<f64> {
        check_kernel_args(t, s)?;
        if s >= t {
            return Ok(0.0);
        }
        if self.hurst.is_brownian() {
            return Ok(1.0);
        }
        let a = self.alpha;
        let inner = self.inner_integral_quadrature(t, s);
        if !inner.converged {
            return Err(Error::numerical(
                "fbm_kernels::volterra_kernel_quadrature",
                format!("inner integral did not converge at (t, s) = ({t}, {s})"),
            ));
        }
        let first = libm::pow(t / s, a) * libm::pow(t - s, a);
        Ok(self.d_h * (first - a * libm::pow(s, -a) * inner.value))
    }

    fn inner_integral_quadrature(&self, t: f64, s: f64) -> Estimate {
        let h = self.hurst.value();
        let a = self.alpha;
        let p = 1.0 / (h + 0.5);
        let near_end = t.min(2.0 * s);
        let c = near_end - s;
        // (z-s)^a dz = p c^{H+1/2} dw under z = s + c w^p
        let scale = p * libm::pow(c, h + 0.5);
        let near = self.gl.integrate(
            |w| scale * libm::pow(s + c * libm::pow(w, p), h - 1.5),
            0.0,
            1.0,
            INNER_TOL,
            40,
        );
        if near_end >= t {
            return near;
        }
        let far = self.gl.integrate(
            |lz| {
                let z = libm::exp(lz);
                libm::pow(z, h - 0.5) * libm::pow(z - s, a)
            },
            libm::log(near_end),
            libm::log(t),
            INNER_TOL,
            40,
        );
        Estimate {
            value: near.value + far.value,
            error: near.error + far.error,
            converged: near.converged && far.converged,
        }
    }

    /// `∫_lo^hi K(t1, v) K(t2, v) dv` for `0 <= lo <= hi <= min(t1, t2)`.
    pub fn kernel_product_integral(&self, t1: f64, t2: f64, lo: f64, hi: f64) -> Result<f64> {
        const OP: &str = "fbm_kernels::kernel_product_integral";
        if !(lo >= 0.0 && lo <= hi && hi <= t1.min(t2)) {
            return Err(Error::domain(
                OP,
                format!("need 0 <= lo <= hi <= min(t1, t2), got lo={lo}, hi={hi}, t1={t1}, t2={t2}"),
            ));
        }
        if lo == hi {
            return Ok(0.0);
        }
        if self.hurst.is_brownian() {
            return Ok(hi - lo);
        }
        let (g1, g2) = (t1 - hi, t2 - hi);
        let est = self.ts.integrate_offsets(
            |v, _, to_hi| {
                self.kernel_with_offset(t1, v, g1 + to_hi) * self.kernel_with_offset(t2, v, g2 + to_hi)
            },
            lo,
            hi,
            PRODUCT_TOL,
        );
        finite_or_err(OP, est.value)
    }

    /// `∫_u^{u+step} K(u+step, v)^2 dv`, the variance of `B(u+step)` given the
    /// continuous history on `[0, u]`, computed on the relative scale of the
    /// step so that steps far below the resolution of `u` stay accurate.
    pub fn tail_square_integral(&self, u: f64, step: f64) -> Result<f64> {
        const OP: &str = "fbm_kernels::tail_square_integral";
        if !(u >= 0.0 && step >= 0.0) {
            return Err(Error::domain(OP, format!("need u >= 0 and step >= 0, got u={u}, step={step}")));
        }
        if step == 0.0 {
            return Ok(0.0);
        }
        if self.hurst.is_brownian() {
            return Ok(step);
        }
        let t = u + step;
        let two_h = 2.0 * self.hurst.value();
        if u == 0.0 {
            return Ok(libm::pow(t, two_h));
        }
        let y_max = step / t;
        let x_min = u / t;
        // ∫_u^t K(t,v)^2 dv = d_H^2 t^{2H} ∫_0^{y_max} k(1-y)^2 dy
        let est = self.ts.integrate_offsets(
            |y, _, to_end| {
                let x = if y > 0.5 { x_min + to_end } else { 1.0 - y };
                let k = self.unit_kernel(x, y);
                k * k
            },
            0.0,
            y_max,
            PRODUCT_TOL,
        );
        finite_or_err(OP, self.d_h * self.d_h * libm::pow(t, two_h) * est.value)
    }

    /// Defect of the calibration identity, re-evaluated with the quadrature
    /// route for the kernel.
    pub fn calibration_defect(&self) -> f64 {
        if self.hurst.is_brownian() {
            return 0.0;
        }
        let est = self.ts.integrate(
            |v| match self.volterra_kernel_quadrature(1.0, v) {
                Ok(k) => k * k,
                Err(_) => f64::NAN,
            },
            0.0,
            1.0,
            1e-10,
        );
        libm::fabs(est.value - 1.0)
    }

    /// `R_H(t, s)` without argument checks.
    pub(crate) fn covariance_raw(&self, t: f64, s: f64) -> f64 {
        covariance_unchecked(t, s, self.hurst.value())
    }
}

fn check_kernel_args(t: f64, s: f64) -> Result<()> {
    if !(s > 0.0) || !t.is_finite() {
        return Err(Error::domain(
            "fbm_kernels::volterra_kernel",
            format!("kernel is singular for s <= 0 (t = {t}, s = {s})"),
        ));
    }
    Ok(())
}

fn finite_or_err(op: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::numerical(op, format!("quadrature returned {v}")))
    }
}

/// `d_H` for a single Hurst exponent.
pub fn kernel_constant(hurst: HurstParam) -> f64 {
    FbmKernels::new(hurst).kernel_constant()
}

/// `K(t, s)` for a single evaluation; prefer [`FbmKernels`] in loops.
pub fn volterra_kernel(t: f64, s: f64, hurst: HurstParam) -> Result<f64> {
    FbmKernels::new(hurst).volterra_kernel(t, s)
}

/// Calibrated `d_H` together with its independent defect.
pub fn calibrate(hurst: HurstParam) -> Calibration {
    let kernels = FbmKernels::new(hurst);
    Calibration { hurst: hurst.value(), d_h: kernels.kernel_constant(), defect: kernels.calibration_defect() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernels(h: f64) -> FbmKernels {
        FbmKernels::new(HurstParam::new(h).unwrap())
    }

    // High-precision reference values (30-digit quadrature of the defining
    // integrals, then the normalization ∫_0^1 K(1,v)^2 dv = 1).
    const D_055: f64 = 1.044_332_477_610_044_5;
    const D_065: f64 = 1.092_751_876_014_275;
    const D_075: f64 = 1.069_644_635_031_990_3;

    #[test]
    fn calibrated_constants() {
        assert!((kernels(0.55).kernel_constant() - D_055).abs() < 1e-10);
        assert!((kernels(0.65).kernel_constant() - D_065).abs() < 1e-10);
        assert!((kernels(0.75).kernel_constant() - D_075).abs() < 1e-10);
        assert_eq!(kernels(0.5).kernel_constant(), 1.0);
    }

    #[test]
    fn brownian_kernel_is_one() {
        let k = kernels(0.5);
        assert_eq!(k.volterra_kernel(2.0, 1.0).unwrap(), 1.0);
        assert_eq!(k.volterra_kernel(1.0, 1e-9).unwrap(), 1.0);
    }

    #[test]
    fn kernel_vanishes_on_and_above_diagonal() {
        for h in [0.55, 0.65, 0.9] {
            assert_eq!(kernels(h).volterra_kernel(1.0, 1.0).unwrap(), 0.0);
            assert_eq!(kernels(h).volterra_kernel(1.0, 3.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn kernel_rejects_nonpositive_s() {
        assert!(kernels(0.65).volterra_kernel(1.0, 0.0).is_err());
        assert!(kernels(0.65).volterra_kernel(1.0, -0.1).is_err());
    }

    #[test]
    fn kernel_reference_values() {
        let k = kernels(0.65);
        for (t, s, want) in [
            (1.0, 0.5, 1.000_951_079_847_726_9),
            (2.0, 1.0, 1.110_624_761_232_381_7),
            (1.5, 0.25, 1.193_443_958_758_354_5),
        ] {
            let got = k.volterra_kernel(t, s).unwrap();
            assert!((got - want).abs() < 1e-12, "K({t},{s}) = {got}, want {want}");
        }
    }

    #[test]
    fn series_and_quadrature_routes_agree() {
        for h in [0.55, 0.65, 0.75, 0.95] {
            let k = kernels(h);
            for &(t, s) in &[(1.0, 0.5), (2.0, 0.1), (1.0, 0.999), (1.0, 1e-6), (3.0, 2.5), (1.0, 1e-12)] {
                let a = k.volterra_kernel(t, s).unwrap();
                let b = k.volterra_kernel_quadrature(t, s).unwrap();
                assert!((a - b).abs() <= 1e-7 * a.abs(), "H={h} ({t},{s}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn calibration_defect_is_small() {
        for h in [0.55, 0.65, 0.75] {
            let c = calibrate(HurstParam::new(h).unwrap());
            assert!(c.defect < 1e-7, "H={h} defect {}", c.defect);
        }
    }

    #[test]
    fn tail_integral_matches_difference_form() {
        let k = kernels(0.65);
        let (u, t) = (1.0, 1.2);
        let direct = k.tail_square_integral(u, t - u).unwrap();
        let diff = k.covariance_raw(t, t) - k.kernel_product_integral(t, t, 0.0, u).unwrap();
        assert!((direct - diff).abs() < 1e-10, "{direct} vs {diff}");
        // 30-digit reference for r(1.2, 1.2 | 1)
        assert!((direct - 0.113_814_948_297_168_6).abs() < 1e-11);
    }

    #[test]
    fn tail_integral_tiny_steps_scale_like_power() {
        // For step -> 0 the conditional variance behaves like c * step^{2H}.
        let k = kernels(0.65);
        let a = k.tail_square_integral(0.3, 1e-40).unwrap();
        let b = k.tail_square_integral(0.3, 1e-41).unwrap();
        assert!(a > 0.0 && b > 0.0);
        assert!((a / b - libm::pow(10.0, 1.3)).abs() < 1e-6 * a / b);
    }
}
