use fbm_blowup_core::fbm_kernels::{FbmKernels, HurstParam};
use fbm_blowup_core::lamperti::{LampertiModel, ModelSpec};
use fbm_blowup_core::rng::stream;
use fbm_blowup_core::scheme::{
    explosion_time_estimate, run_adaptive, run_adaptive_with, FnDrift, NoiseSource, SchemeConfig, StopReason,
};

struct Silent;

impl NoiseSource for Silent {
    fn increment(&mut self, _: f64, _: f64) -> fbm_blowup_core::Result<f64> {
        Ok(0.0)
    }
}

#[test]
fn bracket_width_shrinks_with_threshold() {
    let model = LampertiModel::new(ModelSpec::example1(4.0, 10.0).unwrap());
    let kernels = FbmKernels::new(HurstParam::new(0.65).unwrap());
    for seed in 0..20 {
        let mut widths = Vec::new();
        for threshold in [10.0, 50.0, 100.0] {
            let cfg = SchemeConfig { seed, ..SchemeConfig::new(0.1, threshold) };
            let traj = run_adaptive(&model, &kernels, &cfg, stream(seed, 0)).unwrap();
            assert_eq!(traj.stop_reason, Some(StopReason::ThresholdHit));
            widths.push(explosion_time_estimate(&traj, &model, 1.2).unwrap().width());
        }
        assert!(widths[0] > widths[1] && widths[1] > widths[2], "seed {seed}: {widths:?}");
    }
}

#[test]
fn noiseless_elapsed_time_is_concave_and_bounded() {
    let g = FnDrift(|y: f64| (3.0 * y).exp());
    let cfg = SchemeConfig { sigma: 0.0, ..SchemeConfig::new(1e-2, 40.0) };
    let traj = run_adaptive_with(&g, &cfg, &mut Silent).unwrap();
    // steps below the spacing of t_k leave it unchanged
    assert!(traj.times.windows(2).all(|w| w[1] >= w[0]));
    assert!(traj.tau.windows(2).all(|w| w[1] < w[0]));
    // left Riemann sum of e^{-3s}: Σ h e^{-3hk} = h / (1 - e^{-3h}) > 1/3
    let h = cfg.h;
    let bound = h / (1.0 - (-3.0 * h).exp());
    assert!(traj.last_time() < bound);
    assert!(traj.last_time() > 1.0 / 3.0);
}
