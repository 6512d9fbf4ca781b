use fbm_blowup::experiments::ConvergenceStudy;
use fbm_blowup::{execute, Experiment, Report, RunConfig};

#[test]
fn noiseless_convergence_is_monotone() {
    let mut cfg = RunConfig::builtin(Experiment::Convergence);
    cfg.n_paths = 2;
    cfg.scheme.as_mut().unwrap().sigma_const = 0.0;
    let report = ConvergenceStudy::from_config(&cfg).unwrap().run().unwrap();
    assert!(report.strictly_decreasing(), "{:?}", report.medians);
    // identical paths without noise
    for p in &report.paths[1..] {
        assert_eq!(p.errors, report.paths[0].errors);
    }
}

#[test]
fn noiseless_monte_carlo_brackets_one_third() {
    let mut cfg = RunConfig::builtin(Experiment::MonteCarlo);
    cfg.model = serde_json::from_str(r#"{ "family": "example1", "params": { "n": 4 }, "x0": 1 }"#).unwrap();
    cfg.n_paths = 1;
    let scheme = cfg.scheme.as_mut().unwrap();
    scheme.sigma_const = 0.0;
    scheme.h = 1e-3;
    scheme.x_threshold = None;
    scheme.y_threshold = Some(50.0);
    let (report, _) = execute(&cfg).unwrap();
    let Report::MonteCarlo(rows) = report else { panic!("unexpected report") };
    let est = rows[0].estimate.expect("estimate");
    let mid = 0.5 * (est.lower() + est.upper());
    assert!((mid * 3.0 - 1.0).abs() <= 0.01, "{mid}");
}
