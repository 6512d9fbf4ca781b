//! Quadrature rules: fixed-order Gauss–Legendre, adaptive bisection on top
//! of a Gauss–Legendre pair, and tanh-sinh for endpoint singularities.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess for the i-th largest root.
            let mut x = libm::cos(PI * (i as f64 + 0.75) / (nf + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if libm::fabs(dx) <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Applies the rule to `f` on `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x);
        }
        sum * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// A low/high Gauss–Legendre pair driving adaptive bisection.
#[derive(Debug, Clone)]
pub struct AdaptiveGl {
    low: GaussLegendre,
    high: GaussLegendre,
}

impl Default for AdaptiveGl {
    fn default() -> Self {
        AdaptiveGl::new(32, 64)
    }
}

impl AdaptiveGl {
    pub fn new(low: usize, high: usize) -> Self {
        AdaptiveGl { low: GaussLegendre::new(low), high: GaussLegendre::new(high) }
    }

    pub fn low(&self) -> &GaussLegendre {
        &self.low
    }

    pub fn high(&self) -> &GaussLegendre {
        &self.high
    }

    /// Integrates `f` on `[a, b]`; a panel is accepted once its two estimates
    /// agree to `rel_tol` of the running total, otherwise it is bisected.
    pub fn integrate<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
        rel_tol: f64,
        max_depth: u32,
    ) -> Estimate {
        let lo = self.low.integrate(&mut f, a, b);
        let hi = self.high.integrate(&mut f, a, b);
        let err = libm::fabs(hi - lo);
        if err <= rel_tol * libm::fabs(hi) || max_depth == 0 {
            return Estimate { value: hi, error: err, converged: err <= rel_tol * libm::fabs(hi) };
        }
        let scale = libm::fabs(hi).max(f64::MIN_POSITIVE);
        self.bisect(&mut f, a, b, rel_tol * scale, max_depth)
    }

    fn bisect<F: FnMut(f64) -> f64>(
        &self,
        f: &mut F,
        a: f64,
        b: f64,
        abs_tol: f64,
        depth: u32,
    ) -> Estimate {
        let m = 0.5 * (a + b);
        let mut total = Estimate { value: 0.0, error: 0.0, converged: true };
        for (l, r) in [(a, m), (m, b)] {
            let lo = self.low.integrate(&mut *f, l, r);
            let hi = self.high.integrate(&mut *f, l, r);
            let err = libm::fabs(hi - lo);
            let part = if err <= abs_tol || depth <= 1 || r - l <= f64::EPSILON * libm::fabs(m)
            {
                Estimate { value: hi, error: err, converged: err <= abs_tol }
            } else {
                self.bisect(f, l, r, core::f64::consts::FRAC_1_SQRT_2 * abs_tol, depth - 1)
            };
            total.value += part.value;
            total.error += part.error;
            total.converged &= part.converged;
        }
        total
    }
}

/// Double-exponential (tanh-sinh) rule with precomputed abscissae.
///
/// Nodes are stored as distances to the nearest endpoint, so integrands
/// singular at the left endpoint `a = 0` are sampled with full relative
/// precision arbitrarily close to it.
#[derive(Debug, Clone)]
pub struct TanhSinh {
    /// `levels[l]` holds `(complement, weight)` for the new abscissae at step
    /// `2^-l`; complement is `1 - |x|` on the reference interval.
    levels: Vec<Vec<(f64, f64)>>,
}

const TANH_SINH_T_MAX: f64 = 4.5;

impl Default for TanhSinh {
    fn default() -> Self {
        TanhSinh::new(9)
    }
}

impl TanhSinh {
    pub fn new(max_level: usize) -> Self {
        let mut levels = Vec::with_capacity(max_level + 1);
        for level in 0..=max_level {
            let h = libm::ldexp(1.0, -(level as i32));
            let mut nodes = Vec::new();
            let mut k: u64 = if level == 0 { 0 } else { 1 };
            loop {
                let t = k as f64 * h;
                if t > TANH_SINH_T_MAX {
                    break;
                }
                let u = FRAC_PI_2 * libm::sinh(t);
                let e = libm::exp(-2.0 * u);
                // 1 - tanh(u) and sech^2(u), both written in e^{-2u} to stay accurate.
                let comp = 2.0 * e / (1.0 + e);
                let sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
                let w = FRAC_PI_2 * libm::cosh(t) * sech2;
                nodes.push((comp, w));
                k += if level == 0 { 1 } else { 2 };
            }
            levels.push(nodes);
        }
        TanhSinh { levels }
    }

    /// Integrates `f` over `[a, b]`, refining the step until successive
    /// levels agree to `rel_tol`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64, rel_tol: f64) -> Estimate {
        self.integrate_offsets(|x, _, _| f(x), a, b, rel_tol)
    }

    /// Like [`TanhSinh::integrate`] but hands the integrand `(x, x - a, b - x)`
    /// with both offsets computed without cancellation.
    pub fn integrate_offsets<F: FnMut(f64, f64, f64) -> f64>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
        rel_tol: f64,
    ) -> Estimate {
        if b == a {
            return Estimate { value: 0.0, error: 0.0, converged: true };
        }
        let width = b - a;
        let half = 0.5 * width;
        let mut raw = 0.0;
        let mut prev = f64::NAN;
        let mut value = 0.0;
        let mut error = f64::INFINITY;
        for (level, nodes) in self.levels.iter().enumerate() {
            for &(comp, w) in nodes {
                if comp == 1.0 {
                    raw += w * f(a + half, half, half);
                    continue;
                }
                let d = half * comp;
                if d <= 0.0 {
                    continue;
                }
                let far = width - d;
                raw += w * (f(a + d, d, far) + f(b - d, far, d));
            }
            let h = libm::ldexp(1.0, -(level as i32));
            value = raw * h * half;
            if level > 0 {
                error = libm::fabs(value - prev);
                if level >= 3 && error <= rel_tol * libm::fabs(value) {
                    return Estimate { value, error, converged: true };
                }
            }
            prev = value;
        }
        Estimate { value, error, converged: false }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(32);
        // degree 63 is the exactness limit; x^62 on [0,1] -> 1/63
        let v = gl.integrate(|x| libm::pow(x, 62.0), 0.0, 1.0);
        assert!((v - 1.0 / 63.0).abs() < 1e-15);
        let w: f64 = gl.weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_odd_order_has_center_node() {
        let gl = GaussLegendre::new(5);
        assert_eq!(gl.nodes()[2], 0.0);
        let v = gl.integrate(|x| x * x * x * x, -1.0, 1.0);
        assert!((v - 0.4).abs() < 1e-15);
    }

    #[test]
    fn adaptive_resolves_endpoint_power() {
        let q = AdaptiveGl::default();
        let est = q.integrate(|x| libm::pow(x, 0.15), 0.0, 1.0, 1e-10, 60);
        assert!(est.converged);
        assert!((est.value - 1.0 / 1.15).abs() < 1e-9);
    }

    #[test]
    fn tanh_sinh_handles_integrable_singularity() {
        let ts = TanhSinh::default();
        // int_0^1 x^{-0.3} dx = 1/0.7
        let est = ts.integrate(|x| libm::pow(x, -0.3), 0.0, 1.0, 1e-12);
        assert!(est.converged);
        assert!((est.value - 1.0 / 0.7).abs() < 1e-10, "{}", est.value);
        let est = ts.integrate(|x| libm::sqrt(1.0 - x * x), -1.0, 1.0, 1e-12);
        assert!((est.value - core::f64::consts::FRAC_PI_2).abs() < 1e-11);
    }

    #[test]
    fn tanh_sinh_constant_is_exact() {
        let ts = TanhSinh::default();
        let est = ts.integrate(|_| 1.0, 0.3, 1.7, 1e-14);
        assert!((est.value - 1.4).abs() < 1e-13);
    }
}
