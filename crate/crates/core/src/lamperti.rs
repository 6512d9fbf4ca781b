//! Model coefficients, the Lamperti transform `Θ(x) = ∫_{x0}^x ds/σ(s)`,
//! its inverse, the transformed drift `g = (b/σ)∘Θ^{-1}`, the Osgood
//! explosion test and pointwise checks of the standing assumptions.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::quad::AdaptiveGl;

/// Relative tolerance of numeric `Θ`.
pub const THETA_TOL: f64 = 1e-10;
/// Relative tolerance of numeric `Θ^{-1}`.
pub const INVERSE_TOL: f64 = 1e-12;
/// Bracket doublings allowed before `Θ^{-1}` gives up.
pub const MAX_BRACKET_DOUBLINGS: u32 = 1000;

const SHIFT: f64 = 0.1;

/// Scalar coefficient functions available to configurations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coefficient {
    /// `c`
    Constant(f64),
    /// `k x`
    Linear(f64),
    /// `x^k`
    Power(f64),
    /// `e^{r x}`
    Exp(f64),
    /// `(|x| + shift)^k`
    ShiftedPower { shift: f64, exponent: f64 },
    /// `1 + x^2`
    OnePlusSquare,
}

impl Coefficient {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Coefficient::Constant(c) => c,
            Coefficient::Linear(k) => k * x,
            Coefficient::Power(k) => libm::pow(x, k),
            Coefficient::Exp(r) => libm::exp(r * x),
            Coefficient::ShiftedPower { shift, exponent } => libm::pow(libm::fabs(x) + shift, exponent),
            Coefficient::OnePlusSquare => 1.0 + x * x,
        }
    }
}

/// The coefficient pair `(b, σ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelFamily {
    /// `b(x) = x^N`, `σ(x) = x` on `(0, ∞)`.
    PolynomialMultiplicative { n: f64 },
    /// `b(x) = (|x| + 0.1)^p`, `σ(x) = (|x| + 0.1)^q`.
    ShiftedPower { p: f64, q: f64 },
    /// `σ ≡ c` with a user drift.
    ConstantSigma { c: f64, drift: Coefficient },
    /// Both coefficients user supplied; `Θ` is computed numerically.
    Custom { drift: Coefficient, sigma: Coefficient },
}

/// Coefficients plus initial condition `x0 > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    family: ModelFamily,
    x0: f64,
}

impl ModelSpec {
    pub fn new(family: ModelFamily, x0: f64) -> Result<Self> {
        if !(x0 > 0.0) || !x0.is_finite() {
            return Err(Error::config("model.x0", format!("initial condition must be positive, got {x0}")));
        }
        match family {
            ModelFamily::PolynomialMultiplicative { n } if !(n >= 2.0) => {
                Err(Error::config("model.params.n", format!("need N >= 2, got {n}")))
            }
            ModelFamily::ShiftedPower { p, .. } if !(p > 1.0) => {
                Err(Error::config("model.params.p", format!("need p > 1, got {p}")))
            }
            ModelFamily::ShiftedPower { q, .. } if !(q > 0.0 && q < 1.0) => {
                Err(Error::config("model.params.q", format!("need 0 < q < 1, got {q}")))
            }
            ModelFamily::ConstantSigma { c, .. } if !(c > 0.0) || !c.is_finite() => {
                Err(Error::config("model.params.c", format!("need c > 0, got {c}")))
            }
            _ => Ok(ModelSpec { family, x0 }),
        }
    }

    /// `dX = X^N dt + X dB`.
    pub fn example1(n: f64, x0: f64) -> Result<Self> {
        ModelSpec::new(ModelFamily::PolynomialMultiplicative { n }, x0)
    }

    /// `dX = (|X| + 0.1)^p dt + (|X| + 0.1)^q dB`.
    pub fn example2(p: f64, q: f64, x0: f64) -> Result<Self> {
        ModelSpec::new(ModelFamily::ShiftedPower { p, q }, x0)
    }

    pub fn family(&self) -> &ModelFamily {
        &self.family
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn drift_b(&self, x: f64) -> f64 {
        match self.family {
            ModelFamily::PolynomialMultiplicative { n } => libm::pow(x, n),
            ModelFamily::ShiftedPower { p, .. } => libm::pow(libm::fabs(x) + SHIFT, p),
            ModelFamily::ConstantSigma { drift, .. } | ModelFamily::Custom { drift, .. } => drift.eval(x),
        }
    }

    pub fn sigma(&self, x: f64) -> f64 {
        match self.family {
            ModelFamily::PolynomialMultiplicative { .. } => x,
            ModelFamily::ShiftedPower { q, .. } => libm::pow(libm::fabs(x) + SHIFT, q),
            ModelFamily::ConstantSigma { c, .. } => c,
            ModelFamily::Custom { sigma, .. } => sigma.eval(x),
        }
    }

    /// Whether the state space is `(0, ∞)` rather than the real line.
    pub fn positive_domain(&self) -> bool {
        matches!(self.family, ModelFamily::PolynomialMultiplicative { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaKind {
    ClosedForm,
    Numeric,
}

/// A model together with its Lamperti transform.
#[derive(Debug, Clone)]
pub struct LampertiModel {
    base: ModelSpec,
    theta_kind: ThetaKind,
    quad: AdaptiveGl,
}

impl LampertiModel {
    /// Uses closed forms where the family has them.
    pub fn new(base: ModelSpec) -> Self {
        let theta_kind = match base.family {
            ModelFamily::Custom { .. } => ThetaKind::Numeric,
            _ => ThetaKind::ClosedForm,
        };
        LampertiModel { base, theta_kind, quad: AdaptiveGl::new(16, 32) }
    }

    /// Forces quadrature and root finding even when closed forms exist.
    pub fn numeric(base: ModelSpec) -> Self {
        LampertiModel { theta_kind: ThetaKind::Numeric, ..LampertiModel::new(base) }
    }

    pub fn base(&self) -> &ModelSpec {
        &self.base
    }

    pub fn theta_kind(&self) -> ThetaKind {
        self.theta_kind
    }

    /// `y(0) = Θ(x0) = 0`.
    pub fn y0(&self) -> f64 {
        0.0
    }

    /// `Θ(x)`.
    pub fn theta(&self, x: f64) -> Result<f64> {
        const OP: &str = "lamperti::theta";
        let x0 = self.base.x0;
        if x == x0 {
            return Ok(0.0);
        }
        if !x.is_finite() {
            return Err(Error::domain(OP, format!("non-finite argument {x}")));
        }
        if self.theta_kind == ThetaKind::Numeric {
            return self.theta_numeric(x0, x, 0.0);
        }
        match self.base.family {
            ModelFamily::PolynomialMultiplicative { .. } => {
                if !(x > 0.0) {
                    return Err(Error::Model { op: OP, witness: x, detail: "sigma(x) = x is not positive".into() });
                }
                Ok(libm::log(x / x0))
            }
            ModelFamily::ShiftedPower { q, .. } => {
                let e = 1.0 - q;
                let base = libm::pow(x0 + SHIFT, e);
                if x >= 0.0 {
                    Ok((libm::pow(x + SHIFT, e) - base) / e)
                } else {
                    Ok((2.0 * libm::pow(SHIFT, e) - libm::pow(SHIFT - x, e) - base) / e)
                }
            }
            ModelFamily::ConstantSigma { c, .. } => Ok((x - x0) / c),
            ModelFamily::Custom { .. } => unreachable!("custom models always use the numeric path"),
        }
    }

    /// `∫_from^to ds/σ(s) + offset`, split into pieces of geometrically
    /// growing width so that far arguments stay cheap.
    fn theta_numeric(&self, from: f64, to: f64, offset: f64) -> Result<f64> {
        const OP: &str = "lamperti::theta";
        let mut witness = None;
        let mut integrand = |s: f64| {
            let sig = self.base.sigma(s);
            if !(sig > 0.0) {
                witness.get_or_insert(s);
                return 0.0;
            }
            1.0 / sig
        };
        if self.base.positive_domain() && !(to > 0.0) {
            return Err(Error::Model { op: OP, witness: to, detail: "sigma is not positive".into() });
        }
        let toward_zero = self.base.positive_domain() && to < from;
        let mut total = 0.0;
        let mut lo = from;
        let mut width = libm::fabs(from).max(1.0);
        loop {
            let hi = if toward_zero {
                (0.5 * lo).max(to)
            } else if libm::fabs(to - lo) <= 2.0 * width {
                to
            } else if to > lo {
                lo + width
            } else {
                lo - width
            };
            total += self.quad.integrate(&mut integrand, lo, hi, THETA_TOL, 50).value;
            if hi == to {
                break;
            }
            lo = hi;
            width *= 2.0;
        }
        if let Some(w) = witness {
            return Err(Error::Model { op: OP, witness: w, detail: "sigma is not positive".into() });
        }
        Ok(offset + total)
    }

    /// `Θ^{-1}(y)`.
    pub fn theta_inverse(&self, y: f64) -> Result<f64> {
        const OP: &str = "lamperti::theta_inverse";
        if y == 0.0 {
            return Ok(self.base.x0);
        }
        if !y.is_finite() {
            return Err(Error::Range { op: OP, value: y });
        }
        if self.theta_kind == ThetaKind::Numeric {
            return self.inverse_numeric(y);
        }
        let x0 = self.base.x0;
        let x = match self.base.family {
            ModelFamily::PolynomialMultiplicative { .. } => x0 * libm::exp(y),
            ModelFamily::ShiftedPower { q, .. } => {
                let e = 1.0 - q;
                let base = libm::pow(x0 + SHIFT, e);
                let split = (libm::pow(SHIFT, e) - base) / e;
                if y >= split {
                    libm::pow(e * y + base, 1.0 / e) - SHIFT
                } else {
                    SHIFT - libm::pow(2.0 * libm::pow(SHIFT, e) - base - y * e, 1.0 / e)
                }
            }
            ModelFamily::ConstantSigma { c, .. } => x0 + c * y,
            ModelFamily::Custom { .. } => unreachable!("custom models always use the numeric path"),
        };
        if x.is_finite() && !(self.base.positive_domain() && x <= 0.0) {
            Ok(x)
        } else {
            Err(Error::Range { op: OP, value: y })
        }
    }

    fn inverse_numeric(&self, y: f64) -> Result<f64> {
        const OP: &str = "lamperti::theta_inverse";
        let x0 = self.base.x0;
        let up = y > 0.0;
        // Bracket [lo, hi] with Θ(lo) <= y <= Θ(hi).
        let (mut lo, mut theta_lo) = (x0, 0.0);
        let mut step = x0.max(1.0);
        let mut probe;
        let mut theta_probe;
        let mut doublings = 0;
        loop {
            probe = if up {
                lo + step
            } else if self.base.positive_domain() {
                lo * 0.5
            } else {
                lo - step
            };
            if !probe.is_finite() || doublings >= MAX_BRACKET_DOUBLINGS || (probe == lo) {
                return Err(Error::Range { op: OP, value: y });
            }
            theta_probe = self.theta_numeric(lo, probe, theta_lo)?;
            if (up && theta_probe >= y) || (!up && theta_probe <= y) {
                break;
            }
            lo = probe;
            theta_lo = theta_probe;
            step *= 2.0;
            doublings += 1;
        }
        let (mut a, mut ta, mut b, mut tb) =
            if up { (lo, theta_lo, probe, theta_probe) } else { (probe, theta_probe, lo, theta_lo) };
        // Safeguarded Newton: Θ'(x) = 1/σ(x).
        let mut x = a + (b - a) * ((y - ta) / (tb - ta)).clamp(0.0, 1.0);
        let mut tx = self.theta_numeric(a, x, ta)?;
        for _ in 0..200 {
            if tx < y {
                a = x;
                ta = tx;
            } else {
                b = x;
                tb = tx;
            }
            let newton = x + (y - tx) * self.base.sigma(x);
            let next = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
            let converged = libm::fabs(next - x) <= INVERSE_TOL * libm::fabs(next).max(1.0);
            let (anchor, t_anchor) = if libm::fabs(next - a) < libm::fabs(next - b) { (a, ta) } else { (b, tb) };
            tx = self.theta_numeric(anchor, next, t_anchor)?;
            x = next;
            if converged || b - a <= INVERSE_TOL * libm::fabs(x).max(1.0) {
                return Ok(x);
            }
        }
        let _ = tb;
        Err(Error::numerical(OP, format!("root finding for y = {y} did not converge")))
    }

    /// `g(y) = b(Θ^{-1}(y)) / σ(Θ^{-1}(y))`.
    pub fn drift(&self, y: f64) -> Result<f64> {
        if self.theta_kind == ThetaKind::ClosedForm {
            match self.base.family {
                ModelFamily::PolynomialMultiplicative { n } => {
                    return Ok(libm::exp((n - 1.0) * (libm::log(self.base.x0) + y)));
                }
                ModelFamily::ShiftedPower { p, q } => {
                    let x = self.theta_inverse(y)?;
                    return Ok(libm::pow(libm::fabs(x) + SHIFT, p - q));
                }
                _ => {}
            }
        }
        let x = self.theta_inverse(y)?;
        Ok(self.base.drift_b(x) / self.base.sigma(x))
    }
}

/// Outcome of the Osgood test for `∫_a^∞ ds/b(s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OsgoodResult {
    pub finite: bool,
    /// The integral value, or `+∞`.
    pub value: f64,
    pub doublings: u32,
}

/// Knobs of the doubling-interval convergence test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OsgoodOptions {
    /// A doubling interval contributing less than this ends the sum.
    pub tol: f64,
    pub max_doublings: u32,
    /// Successive contribution ratios agreeing this closely (and below one)
    /// are treated as a geometric tail and summed in closed form.
    pub ratio_tol: f64,
}

impl Default for OsgoodOptions {
    fn default() -> Self {
        OsgoodOptions { tol: 1e-12, max_doublings: 60, ratio_tol: 1e-10 }
    }
}

/// Classifies convergence of `∫_a^∞ ds/b(s)` for positive nondecreasing `b`.
///
/// The integral is accumulated over `[L, 2L]`, `L = a 2^k`. It is declared
/// finite when a contribution drops below `tol`, or when the ratios of
/// successive contributions settle at a value below one, in which case the
/// rest is summed as a geometric series. Contributions that fail to decay
/// within `max_doublings` mean divergence.
pub fn osgood_criterion<F: Fn(f64) -> f64>(b: F, a: f64, options: OsgoodOptions) -> Result<OsgoodResult> {
    tail_integral(b, a, options, "lamperti::osgood_criterion", TailDirection::Infinity)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TailDirection {
    /// `[a, ∞)` by doubling.
    Infinity,
    /// `(0, a]` by halving.
    Zero,
}

fn tail_integral<F: Fn(f64) -> f64>(
    denom: F,
    a: f64,
    options: OsgoodOptions,
    op: &'static str,
    direction: TailDirection,
) -> Result<OsgoodResult> {
    if !a.is_finite() || (direction == TailDirection::Zero && !(a > 0.0)) {
        return Err(Error::domain(op, format!("invalid lower limit {a}")));
    }
    let quad = AdaptiveGl::new(16, 32);
    let witness = core::cell::Cell::new(None);
    let integrate = |lo: f64, hi: f64| {
        quad.integrate(
            |s| {
                let v = denom(s);
                if !(v > 0.0) {
                    if witness.get().is_none() {
                        witness.set(Some(s));
                    }
                    return 0.0;
                }
                1.0 / v
            },
            lo,
            hi,
            1e-13,
            50,
        )
        .value
    };
    let mut total = 0.0;
    let mut start = a;
    if direction == TailDirection::Infinity && a <= 0.0 {
        total += integrate(a, 1.0);
        start = 1.0;
    }
    let mut prev: Option<f64> = None;
    let mut prev_ratio: Option<f64> = None;
    let mut lo = start;
    for k in 0..options.max_doublings {
        let hi = match direction {
            TailDirection::Infinity => 2.0 * lo,
            TailDirection::Zero => 0.5 * lo,
        };
        let (x, y) = if hi > lo { (lo, hi) } else { (hi, lo) };
        let c = integrate(x, y);
        if let Some(w) = witness.get() {
            return Err(Error::Model { op, witness: w, detail: "coefficient is not positive".into() });
        }
        total += c;
        if c < options.tol {
            return Ok(OsgoodResult { finite: true, value: total, doublings: k + 1 });
        }
        if let Some(p) = prev {
            let ratio = c / p;
            if let Some(pr) = prev_ratio {
                if ratio < 1.0 - 1e-6 && libm::fabs(ratio - pr) <= options.ratio_tol * ratio {
                    let tail = c * ratio / (1.0 - ratio);
                    return Ok(OsgoodResult { finite: true, value: total + tail, doublings: k + 1 });
                }
            }
            prev_ratio = Some(ratio);
        }
        prev = Some(c);
        lo = hi;
    }
    Ok(OsgoodResult { finite: false, value: f64::INFINITY, doublings: options.max_doublings })
}

/// Result of one assumption check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub passed: bool,
    /// Point where the check fails, or where the reported bound is attained.
    pub witness: Option<f64>,
    /// The bound established by the check, when it has one.
    pub value: Option<f64>,
    pub detail: String,
}

/// Pointwise checks of the coefficient assumptions on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub lo: f64,
    pub hi: f64,
    /// `σ > 0`.
    pub sigma_positive: Check,
    /// `0 < L2 <= σ(x) <= b(x)`; `value` is the largest admissible `L2`.
    pub sigma_below_drift: Check,
    /// `Θ` unbounded toward both ends of the state space.
    pub theta_unbounded: Check,
    /// `g >= l_g > 0` on `Θ([lo, hi])`; `value` is `l_g`.
    pub drift_lower_bound: Check,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.sigma_positive.passed
            && self.sigma_below_drift.passed
            && self.theta_unbounded.passed
            && self.drift_lower_bound.passed
    }

    pub fn checks(&self) -> [(&'static str, &Check); 4] {
        [
            ("sigma_positive", &self.sigma_positive),
            ("sigma_below_drift", &self.sigma_below_drift),
            ("theta_unbounded", &self.theta_unbounded),
            ("drift_lower_bound", &self.drift_lower_bound),
        ]
    }
}

/// Evaluates the computable assumptions on `grid_size` equispaced points of
/// `[lo, hi]`.
pub fn validate_assumptions(model: &ModelSpec, lo: f64, hi: f64, grid_size: usize) -> Result<ValidationReport> {
    const OP: &str = "lamperti::validate_assumptions";
    if !(lo.is_finite() && hi.is_finite() && lo < hi) || grid_size < 2 {
        return Err(Error::domain(OP, format!("need a finite interval lo < hi and grid_size >= 2, got [{lo}, {hi}], {grid_size}")));
    }
    let mut notes = Vec::new();
    let mut lo = lo;
    if model.positive_domain() && lo <= 0.0 {
        if hi <= 0.0 {
            return Err(Error::domain(OP, "the state space of this family is (0, inf)"));
        }
        lo = hi * 1e-6;
        notes.push(format!("domain restricted to the positive half-line: lo = {lo:e}"));
    }
    let n = grid_size;
    let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();

    let bad_sigma = grid.iter().copied().find(|&x| !(model.sigma(x) > 0.0));
    let sigma_positive = Check {
        passed: bad_sigma.is_none(),
        witness: bad_sigma,
        value: None,
        detail: match bad_sigma {
            None => "sigma > 0 on the grid".into(),
            Some(x) => format!("sigma({x}) = {} is not positive", model.sigma(x)),
        },
    };

    // Ratio b/σ = g∘Θ on the grid.
    let ratio = |x: f64| model.drift_b(x) / model.sigma(x);
    let (arg_min_ratio, min_ratio) = grid
        .iter()
        .map(|&x| (x, ratio(x)))
        .fold((lo, f64::INFINITY), |acc, (x, r)| if r < acc.1 || r.is_nan() { (x, r) } else { acc });
    let min_sigma = grid.iter().map(|&x| model.sigma(x)).fold(f64::INFINITY, f64::min);
    let ordered = sigma_positive.passed && min_ratio >= 1.0;
    let sigma_below_drift = if ordered {
        Check { passed: true, witness: None, value: Some(min_sigma), detail: format!("L2 = {min_sigma}") }
    } else {
        Check {
            passed: false,
            witness: Some(arg_min_ratio),
            value: None,
            detail: format!(
                "b({arg_min_ratio}) = {} < sigma({arg_min_ratio}) = {}",
                model.drift_b(arg_min_ratio),
                model.sigma(arg_min_ratio)
            ),
        }
    };

    let options = OsgoodOptions::default();
    let sigma = |s: f64| model.sigma(s);
    let right = tail_integral(sigma, hi.max(model.x0()).max(1.0), options, OP, TailDirection::Infinity);
    let left = if model.positive_domain() {
        tail_integral(sigma, lo, options, OP, TailDirection::Zero)
    } else {
        tail_integral(|s| model.sigma(-s), (-lo).max(1.0), options, OP, TailDirection::Infinity)
    };
    let theta_unbounded = match (right, left) {
        (Ok(r), Ok(l)) => Check {
            passed: !r.finite && !l.finite,
            witness: None,
            value: None,
            detail: format!(
                "Theta(+end) {}, Theta(-end) {}",
                if r.finite { "bounded" } else { "unbounded" },
                if l.finite { "bounded" } else { "unbounded" }
            ),
        },
        (Err(e), _) | (_, Err(e)) => Check {
            passed: false,
            witness: match e {
                Error::Model { witness, .. } => Some(witness),
                _ => None,
            },
            value: None,
            detail: format!("{e}"),
        },
    };

    let drift_lower_bound = if min_ratio > 0.0 && min_ratio.is_finite() {
        Check {
            passed: true,
            witness: Some(arg_min_ratio),
            value: Some(min_ratio),
            detail: format!("l_g = g(Theta({arg_min_ratio})) = {min_ratio}"),
        }
    } else {
        Check {
            passed: false,
            witness: Some(arg_min_ratio),
            value: None,
            detail: format!("g(Theta({arg_min_ratio})) = {min_ratio} is not bounded away from 0"),
        }
    };
    if model.positive_domain() {
        notes.push("g has infimum 0 over the whole line; the lower bound holds only on Theta([lo, hi])".into());
    }
    Ok(ValidationReport { lo, hi, sigma_positive, sigma_below_drift, theta_unbounded, drift_lower_bound, notes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::E;

    fn ex1(n: f64, x0: f64) -> LampertiModel {
        LampertiModel::new(ModelSpec::example1(n, x0).unwrap())
    }

    fn ex2() -> LampertiModel {
        LampertiModel::new(ModelSpec::example2(1.1, 0.5, 10.0).unwrap())
    }

    fn custom_one_plus_square(x0: f64) -> LampertiModel {
        LampertiModel::new(
            ModelSpec::new(
                ModelFamily::Custom { drift: Coefficient::Power(3.0), sigma: Coefficient::OnePlusSquare },
                x0,
            )
            .unwrap(),
        )
    }

    #[test]
    fn spec_invariants() {
        assert!(ModelSpec::example1(1.5, 1.0).is_err());
        assert!(ModelSpec::example1(4.0, 0.0).is_err());
        assert!(ModelSpec::example2(1.0, 0.5, 1.0).is_err());
        assert!(ModelSpec::example2(1.1, 1.0, 1.0).is_err());
        let err = ModelSpec::example2(1.1, 0.0, 1.0).unwrap_err();
        assert_eq!(err.origin(), "model.params.q");
    }

    #[test]
    fn theta_examples() {
        assert!((ex1(4.0, 1.0).theta(E).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(ex2().theta(10.0).unwrap(), 0.0);
        assert_eq!(custom_one_plus_square(2.0).theta(2.0).unwrap(), 0.0);
        let v = ex2().theta(20.0).unwrap();
        assert!((v - 2.610_505_275_755_677).abs() < 1e-12);
        assert!(ex1(4.0, 1.0).theta(-1.0).is_err());
    }

    #[test]
    fn theta_inverse_examples() {
        assert_eq!(ex2().theta_inverse(0.0).unwrap(), 10.0);
        assert!((ex1(4.0, 1.0).theta_inverse(1.0).unwrap() - E).abs() < 1e-15);
        let m = custom_one_plus_square(0.5);
        let y = m.theta(5.0).unwrap();
        assert!((m.theta_inverse(y).unwrap() - 5.0).abs() <= 1e-9);
        assert!(matches!(ex1(4.0, 1.0).theta_inverse(800.0), Err(Error::Range { .. })));
    }

    #[test]
    fn custom_inverse_outside_bounded_range_fails() {
        // σ = 1 + x^2 gives Θ(∞) = π/2 - atan(x0), so larger y has no preimage.
        let m = custom_one_plus_square(0.0_f64.max(1.0));
        let err = m.theta_inverse(10.0).unwrap_err();
        assert!(matches!(err, Error::Range { .. }), "{err}");
    }

    #[test]
    fn drift_examples() {
        assert!((ex1(4.0, 1.0).drift(0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((ex1(4.0, 1.0).drift(0.7).unwrap() - libm::exp(2.1)).abs() < 1e-12);
        assert!((ex2().drift(0.0).unwrap() - 4.004_910_584_519_121).abs() < 1e-12);
        let cs = LampertiModel::new(
            ModelSpec::new(ModelFamily::ConstantSigma { c: 1.0, drift: Coefficient::Exp(3.0) }, 2.0).unwrap(),
        );
        assert!((cs.drift(0.5).unwrap() - libm::exp(7.5)).abs() < 1e-9);
        assert!((cs.theta(3.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn example2_branches_are_consistent() {
        let m = ex2();
        for x in [-50.0, -3.0, -0.05, 0.0, 0.05, 1.0, 9.0, 10.0, 1e4] {
            let y = m.theta(x).unwrap();
            let back = m.theta_inverse(y).unwrap();
            assert!((back - x).abs() <= 1e-10 * x.abs().max(1.0), "x={x} back={back}");
        }
    }

    #[test]
    fn closed_form_and_numeric_agree() {
        let specs = [
            ModelSpec::example1(4.0, 10.0).unwrap(),
            ModelSpec::example2(1.1, 0.5, 10.0).unwrap(),
            ModelSpec::new(ModelFamily::ConstantSigma { c: 2.0, drift: Coefficient::Exp(1.0) }, 1.0).unwrap(),
        ];
        for spec in specs {
            let closed = LampertiModel::new(spec);
            let numeric = LampertiModel::numeric(spec);
            for x in [0.5, 3.0, 10.0, 25.0, 400.0] {
                let a = closed.theta(x).unwrap();
                let b = numeric.theta(x).unwrap();
                assert!((a - b).abs() <= 1e-8 * a.abs().max(1e-300) + 1e-14, "{spec:?} x={x}: {a} vs {b}");
            }
            for y in [-1.5, -0.2, 0.3, 2.0] {
                let a = closed.theta_inverse(y).unwrap();
                let b = numeric.theta_inverse(y).unwrap();
                assert!((a - b).abs() <= 1e-8 * a.abs(), "{spec:?} y={y}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn osgood_examples() {
        let quartic = osgood_criterion(|s| libm::pow(s, 4.0), 1.0, OsgoodOptions::default()).unwrap();
        assert!(quartic.finite);
        assert!((quartic.value - 1.0 / 3.0).abs() < 1e-10, "{}", quartic.value);
        let linear = osgood_criterion(|s| s, 1.0, OsgoodOptions::default()).unwrap();
        assert!(!linear.finite && linear.value.is_infinite());
        let shifted = osgood_criterion(|s| libm::pow(s + 0.1, 1.1), 10.0, OsgoodOptions::default()).unwrap();
        assert!(shifted.finite);
        let want = 10.0 * libm::pow(10.1, -0.1);
        assert!((shifted.value - want).abs() <= 1e-6 * want, "{}", shifted.value);
        let exp = osgood_criterion(|s| libm::exp(3.0 * s), 0.0, OsgoodOptions::default()).unwrap();
        assert!(exp.finite && (exp.value - 1.0 / 3.0).abs() < 1e-10);
        assert!(osgood_criterion(|s| s - 5.0, 1.0, OsgoodOptions::default()).is_err());
    }

    #[test]
    fn validation_constant_coefficients() {
        let spec = ModelSpec::new(
            ModelFamily::ConstantSigma { c: 1.0, drift: Coefficient::Constant(1.0) },
            1.0,
        )
        .unwrap();
        let r = validate_assumptions(&spec, -5.0, 5.0, 101).unwrap();
        assert!(r.all_passed(), "{r:?}");
        assert_eq!(r.sigma_below_drift.value, Some(1.0));
        assert_eq!(r.drift_lower_bound.value, Some(1.0));
    }

    #[test]
    fn validation_example2_ordering_violation() {
        let r = validate_assumptions(ex2().base(), -1.0, 1.0, 201).unwrap();
        assert!(r.sigma_positive.passed);
        assert!(!r.sigma_below_drift.passed);
        assert_eq!(r.sigma_below_drift.witness, Some(0.0));
        assert!(r.theta_unbounded.passed);
    }

    #[test]
    fn validation_example1_lower_bound() {
        let spec = ModelSpec::example1(4.0, 1.0).unwrap();
        let r = validate_assumptions(&spec, 0.1, 100.0, 1000).unwrap();
        assert!(r.sigma_positive.passed);
        assert!(r.theta_unbounded.passed, "{:?}", r.theta_unbounded);
        let lg = r.drift_lower_bound.value.unwrap();
        assert!((lg - libm::pow(0.1, 3.0)).abs() < 1e-15);
        assert_eq!(r.drift_lower_bound.witness, Some(0.1));
        assert!(!r.notes.is_empty());
        let r = validate_assumptions(&spec, -1.0, 2.0, 10).unwrap();
        assert!(r.lo > 0.0);
    }

    fn check_invariants(model: &LampertiModel, x1: f64, x2: f64) {
        let x0 = model.base().x0();
        assert_eq!(model.theta(x0).unwrap(), 0.0);
        let (lo, hi) = if x1 < x2 { (x1, x2) } else { (x2, x1) };
        if hi - lo > 1e-9 * hi {
            assert!(model.theta(lo).unwrap() < model.theta(hi).unwrap());
        }
        for x in [lo, hi] {
            let back = model.theta_inverse(model.theta(x).unwrap()).unwrap();
            assert!(libm::fabs(back - x) <= 1e-10 * x.max(1.0), "x = {x}, back = {back}");
        }
    }

    proptest::proptest! {
        #[test]
        fn example1_invariants(n in 2.0f64..6.0, x0 in 0.1f64..20.0, x1 in 0.01f64..100.0, x2 in 0.01f64..100.0) {
            check_invariants(&ex1(n, x0), x1, x2);
        }

        #[test]
        fn example2_invariants(
            p in 1.01f64..3.0, q in 0.05f64..0.95, x0 in 0.1f64..20.0, x1 in -50.0f64..50.0, x2 in -50.0f64..50.0,
        ) {
            check_invariants(&LampertiModel::new(ModelSpec::example2(p, q, x0).unwrap()), x1, x2);
        }

        #[test]
        fn numeric_theta_invariants(x0 in 0.1f64..3.0, x1 in -20.0f64..20.0, x2 in -20.0f64..20.0) {
            check_invariants(&custom_one_plus_square(x0), x1, x2);
        }
    }
}
