//! Library values checked against oracles computed here from the defining
//! integrals, with a double-exponential rule that shares no code with the
//! crate's quadrature.

use core::f64::consts::PI;

use fbm_blowup_core::fbm_kernels::{calibrate, fbm_covariance, sample_path_exact, FbmKernels, HurstParam, TimeGrid};
use fbm_blowup_core::prediction::{psi_kernel, sample_increment, History, PredictionQuery};
use fbm_blowup_core::rng::stream;

/// Tanh-sinh quadrature on `[a, b]`; `f` receives `(x, x - a, b - x)`.
fn de<F: Fn(f64, f64, f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mut prev = f64::NAN;
    let mut step = 0.5;
    for _ in 0..12 {
        let mut sum = 0.0;
        let n = (6.0 / step) as i64;
        for k in -n..=n {
            let t = k as f64 * step;
            let arg = 0.5 * PI * t.sinh();
            let w = 0.5 * PI * t.cosh() / arg.cosh().powi(2);
            // distance to the nearer endpoint, without cancellation
            let d = half * 2.0 / (1.0 + (2.0 * arg.abs()).exp());
            if d <= 0.0 || w == 0.0 {
                continue;
            }
            let (x, from_a, to_b) = if arg < 0.0 { (a + d, d, b - a - d) } else { (b - d, b - a - d, d) };
            sum += w * f(x, from_a, to_b);
        }
        let value = half * step * sum;
        if (value - prev).abs() <= 1e-14 * value.abs() {
            return value;
        }
        prev = value;
        step *= 0.5;
    }
    prev
}

fn hurst(h: f64) -> HurstParam {
    HurstParam::new(h).unwrap()
}

fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// `d_H (t/s)^a (t-s)^a - a d_H s^{-a} ∫_s^t z^{a-1} (z-s)^a dz`, `a = H - 1/2`.
fn kernel_oracle(h: f64, d_h: f64, t: f64, s: f64) -> f64 {
    let a = h - 0.5;
    let inner = de(|z, zs, _| z.powf(a - 1.0) * zs.powf(a), s, t);
    d_h * ((t / s).powf(a) * (t - s).powf(a) - a * s.powf(-a) * inner)
}

#[test]
fn kernel_constant_matches_gamma_formula() {
    for h in [0.55, 0.6, 0.65, 0.75, 0.9] {
        let want = (2.0 * h * gamma(1.5 - h) / (gamma(h + 0.5) * gamma(2.0 - 2.0 * h))).sqrt();
        let got = calibrate(hurst(h)).d_h;
        assert!((got - want).abs() <= 1e-9 * want, "H={h}: {got} vs {want}");
    }
}

#[test]
fn kernel_matches_defining_integral() {
    for h in [0.55, 0.65, 0.75] {
        let k = FbmKernels::new(hurst(h));
        for (t, s) in [(1.0, 0.5), (2.0, 0.1), (1.5, 0.25), (1.0, 0.99)] {
            let want = kernel_oracle(h, k.kernel_constant(), t, s);
            let got = k.volterra_kernel(t, s).unwrap();
            assert!((got - want).abs() <= 1e-10 * want.abs(), "H={h} K({t},{s}) = {got}, oracle {want}");
        }
    }
}

#[test]
fn kernel_reproduces_covariance() {
    // ∫_0^{s∧t} K(t,v) K(s,v) dv = R_H(t,s), both kernels from the oracle.
    let h = 0.65;
    let d_h = FbmKernels::new(hurst(h)).kernel_constant();
    for (t, s) in [(1.0, 0.5), (1.0, 1.0), (2.0, 0.7)] {
        let m: f64 = f64::min(t, s);
        let lhs = de(|v, _, _| kernel_oracle(h, d_h, t, v) * kernel_oracle(h, d_h, s, v), 0.0, m);
        let rhs = fbm_covariance(t, s, hurst(h)).unwrap();
        assert!((lhs - rhs).abs() <= 1e-7 * rhs, "({t},{s}): {lhs} vs {rhs}");
    }
}

#[test]
fn covariance_closed_form_value() {
    let got = fbm_covariance(4.0, 1.0, hurst(0.75)).unwrap();
    let want = 0.5 * (8.0 + 1.0 - 27f64.sqrt());
    assert!((got - want).abs() < 1e-13);
    assert!((got - 1.901924).abs() < 1e-6);
}

#[test]
fn psi_matches_defining_integral() {
    // Ψ(t,s|u) = -sin(πa)/π s^{-a} (u-s)^{-a} ∫_u^t z^a (z-u)^a / (z-s) dz
    for h in [0.55, 0.65, 0.8] {
        let a = h - 0.5;
        let k = FbmKernels::new(hurst(h));
        for (t, s, u) in [(1.5, 0.25, 1.0), (2.0, 0.5, 1.0), (1.05, 0.9, 1.0), (3.0, 0.01, 0.5)] {
            let inner = de(|z, zu, _| z.powf(a) * zu.powf(a) / (z - s), u, t);
            let want = -(PI * a).sin() / PI * s.powf(-a) * (u - s).powf(-a) * inner;
            let got = psi_kernel(&k, t, s, u).unwrap();
            assert!((got - want).abs() <= 1e-6 * want.abs(), "H={h} psi({t},{s}|{u}) = {got}, oracle {want}");
        }
    }
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[test]
fn exact_sampler_unit_variance() {
    let grid = TimeGrid::new(vec![1.0]).unwrap();
    let mut rng = stream(101, 0);
    let draws: Vec<f64> =
        (0..10_000).map(|_| sample_path_exact(&grid, hurst(0.65), &mut rng).unwrap().values()[0]).collect();
    let v = sample_variance(&draws);
    assert!((v - 1.0).abs() <= 0.05, "{v}");
}

#[test]
fn exact_sampler_brownian_increments_uncorrelated() {
    let grid = TimeGrid::new(vec![1.0, 2.0]).unwrap();
    let mut rng = stream(102, 0);
    let n = 10_000;
    let pairs: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let p = sample_path_exact(&grid, hurst(0.5), &mut rng).unwrap();
            (p.values()[0], p.values()[1] - p.values()[0])
        })
        .collect();
    let cov = pairs.iter().map(|(a, b)| a * b).sum::<f64>() / n as f64;
    // standard error of the product of two independent unit normals
    let se = 1.0 / (n as f64).sqrt();
    assert!(cov.abs() <= 3.0 * se, "{cov}");
}

#[test]
fn brownian_increment_law() {
    let k = FbmKernels::new(hurst(0.5));
    let mut history = History::new();
    history.push(0.5, 0.3);
    history.push(0.5, -0.2);
    let query = PredictionQuery::new(&history, 1.7).unwrap();
    let mut rng = stream(103, 0);
    let draws: Vec<f64> = (0..10_000).map(|_| sample_increment(&k, &query, &mut rng).unwrap()).collect();
    let v = sample_variance(&draws);
    assert!((v / 0.7 - 1.0).abs() <= 0.05, "{v}");
}
