//! JSON run configuration.

use std::path::{Path, PathBuf};

use fbm_blowup_core::fbm_kernels::HurstParam;
use fbm_blowup_core::lamperti::{Coefficient, LampertiModel, ModelFamily, ModelSpec};
use fbm_blowup_core::scheme::{y_threshold_from_x, SchemeConfig, DEFAULT_ALPHA, DEFAULT_OVERFLOW_CAP};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Experiment {
    Simulate,
    MonteCarlo,
    Osgood,
    Validate,
    KernelCheck,
    Convergence,
}

impl Experiment {
    /// The name of the matching CLI subcommand.
    pub fn command(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::MonteCarlo => "mc",
            Experiment::Osgood => "osgood",
            Experiment::Validate => "validate",
            Experiment::KernelCheck => "kernel-check",
            Experiment::Convergence => "convergence",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub model: ModelConfig,
    pub hurst: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeSection>,
    #[serde(default = "one")]
    pub n_paths: usize,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub options: Options,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Example1,
    Example2,
    ConstantSigma,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Family,
    #[serde(default = "empty_object")]
    pub params: serde_json::Value,
    pub x0: f64,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Example1Params {
    n: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Example2Params {
    p: f64,
    q: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantSigmaParams {
    c: f64,
    drift: CoefficientConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomParams {
    drift: CoefficientConfig,
    sigma: CoefficientConfig,
}

/// A named coefficient function, e.g. `{"kind": "power", "exponent": 4}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientConfig {
    Constant { value: f64 },
    Linear { slope: f64 },
    Power { exponent: f64 },
    Exp { rate: f64 },
    ShiftedPower { shift: f64, exponent: f64 },
    OnePlusSquare,
}

impl From<CoefficientConfig> for Coefficient {
    fn from(c: CoefficientConfig) -> Self {
        match c {
            CoefficientConfig::Constant { value } => Coefficient::Constant(value),
            CoefficientConfig::Linear { slope } => Coefficient::Linear(slope),
            CoefficientConfig::Power { exponent } => Coefficient::Power(exponent),
            CoefficientConfig::Exp { rate } => Coefficient::Exp(rate),
            CoefficientConfig::ShiftedPower { shift, exponent } => Coefficient::ShiftedPower { shift, exponent },
            CoefficientConfig::OnePlusSquare => Coefficient::OnePlusSquare,
        }
    }
}

fn params<T: serde::de::DeserializeOwned>(family: Family, value: &serde_json::Value) -> Result<T> {
    serde_json::from_value(value.clone())
        .map_err(|e| HarnessError::config(format!("model.params for family {family:?}: {e}")))
}

impl ModelConfig {
    pub fn spec(&self) -> Result<ModelSpec> {
        let family = match self.family {
            Family::Example1 => {
                let p: Example1Params = params(self.family, &self.params)?;
                ModelFamily::PolynomialMultiplicative { n: p.n }
            }
            Family::Example2 => {
                let p: Example2Params = params(self.family, &self.params)?;
                ModelFamily::ShiftedPower { p: p.p, q: p.q }
            }
            Family::ConstantSigma => {
                let p: ConstantSigmaParams = params(self.family, &self.params)?;
                ModelFamily::ConstantSigma { c: p.c, drift: p.drift.into() }
            }
            Family::Custom => {
                let p: CustomParams = params(self.family, &self.params)?;
                ModelFamily::Custom { drift: p.drift.into(), sigma: p.sigma.into() }
            }
        };
        Ok(ModelSpec::new(family, self.x0)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub h: f64,
    #[serde(default = "unit")]
    pub sigma_const: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_threshold: Option<f64>,
    /// Deterministic time cap; absent means none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overflow_cap: Option<f64>,
}

fn unit() -> f64 {
    1.0
}

fn default_max_steps() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub csv_dir: PathBuf,
    #[serde(default)]
    pub emit_svg: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs { csv_dir: PathBuf::from("out"), emit_svg: false }
    }
}

/// Experiment-specific knobs; every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// Bracket factor of the explosion-time tail bounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Lower limit of the Osgood integral; defaults to `x0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub osgood_from: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate_hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate_grid: Option<usize>,
    /// Hurst values for the kernel calibration table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hurst_values: Option<Vec<f64>>,
    /// Step parameters compared in the convergence study.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_values: Option<Vec<f64>>,
    /// Reference step is `min(h_values) / ref_divisor`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_divisor: Option<f64>,
    /// Drift truncation level `M` of the convergence study.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_m: Option<f64>,
    /// Cap on the exact sampler grid in the convergence study.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_exact_points: Option<usize>,
    /// Write one trajectory CSV per Monte Carlo path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub write_paths: Option<bool>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| HarnessError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        RunConfig::from_json(&text).map_err(|e| match e {
            HarnessError::Config(d) => HarnessError::Config(format!("{}: {d}", path.display())),
            other => other,
        })
    }

    /// Built-in configuration reproducing the standard run of `experiment`.
    pub fn builtin(experiment: Experiment) -> Self {
        let text = match experiment {
            Experiment::Simulate => include_str!("../configs/simulate_example1.json"),
            Experiment::MonteCarlo => include_str!("../configs/mc_example1.json"),
            Experiment::Osgood => include_str!("../configs/osgood_example2.json"),
            Experiment::Validate => include_str!("../configs/validate_example1.json"),
            Experiment::KernelCheck => include_str!("../configs/kernel_check.json"),
            Experiment::Convergence => include_str!("../configs/convergence.json"),
        };
        RunConfig::from_json(text).expect("built-in configurations are valid")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// Checks cross-field requirements that serde cannot express.
    pub fn validate(&self) -> Result<()> {
        self.model.spec()?;
        self.hurst_param()?;
        if self.n_paths < 1 {
            return Err(HarnessError::config("n_paths must be at least 1"));
        }
        let needs_scheme =
            matches!(self.experiment, Experiment::Simulate | Experiment::MonteCarlo | Experiment::Convergence);
        match (&self.scheme, needs_scheme) {
            (None, true) => {
                return Err(HarnessError::config(format!("experiment {:?} needs a scheme section", self.experiment)))
            }
            (Some(s), _) => {
                if s.y_threshold.is_some() && s.x_threshold.is_some() {
                    return Err(HarnessError::config("give only one of scheme.y_threshold and scheme.x_threshold"));
                }
                if s.y_threshold.is_none() && s.x_threshold.is_none() && self.experiment != Experiment::Convergence {
                    return Err(HarnessError::config("scheme needs y_threshold or x_threshold"));
                }
                if !(s.h > 0.0 && s.h < 1.0) {
                    return Err(HarnessError::config(format!("scheme.h must lie in (0, 1), got {}", s.h)));
                }
                if !(s.sigma_const >= 0.0 && s.sigma_const.is_finite()) {
                    return Err(HarnessError::config(format!("scheme.sigma_const must be >= 0, got {}", s.sigma_const)));
                }
                if s.y_threshold.is_some() || s.x_threshold.is_some() {
                    self.scheme_config(&self.lamperti()?)?;
                }
            }
            _ => {}
        }
        if let Some(alpha) = self.options.alpha {
            if !(alpha > 1.0) {
                return Err(HarnessError::config(format!("options.alpha must exceed 1, got {alpha}")));
            }
        }
        if let Some(hs) = &self.options.h_values {
            if hs.is_empty() || hs.iter().any(|&h| !(h > 0.0 && h < 1.0)) {
                return Err(HarnessError::config("options.h_values must be non-empty and inside (0, 1)"));
            }
        }
        if let Some(d) = self.options.ref_divisor {
            if !(d > 1.0) {
                return Err(HarnessError::config(format!("options.ref_divisor must exceed 1, got {d}")));
            }
        }
        if let Some(hs) = &self.options.hurst_values {
            for &h in hs {
                HurstParam::new(h).map_err(|e| HarnessError::config(format!("options.hurst_values: {e}")))?;
            }
        }
        Ok(())
    }

    pub fn hurst_param(&self) -> Result<HurstParam> {
        HurstParam::new(self.hurst).map_err(|e| HarnessError::config(format!("hurst: {e}")))
    }

    pub fn lamperti(&self) -> Result<LampertiModel> {
        Ok(LampertiModel::new(self.model.spec()?))
    }

    pub fn alpha(&self) -> f64 {
        self.options.alpha.unwrap_or(DEFAULT_ALPHA)
    }

    fn scheme_section(&self) -> Result<&SchemeSection> {
        self.scheme.as_ref().ok_or_else(|| HarnessError::config("missing scheme section"))
    }

    pub fn seed(&self) -> u64 {
        self.scheme.as_ref().map_or(0, |s| s.seed)
    }

    /// Scheme parameters with an `X` threshold converted through `Θ`.
    pub fn scheme_config(&self, model: &LampertiModel) -> Result<SchemeConfig> {
        let s = self.scheme_section()?;
        let y_threshold = match (s.y_threshold, s.x_threshold) {
            (Some(y), None) => y,
            (None, Some(x)) => y_threshold_from_x(model, x)
                .map_err(|e| HarnessError::config(format!("scheme.x_threshold: {e}")))?,
            _ => return Err(HarnessError::config("scheme needs exactly one of y_threshold and x_threshold")),
        };
        let cfg = SchemeConfig {
            h: s.h,
            sigma: s.sigma_const,
            y0: model.y0(),
            y_threshold,
            horizon: s.horizon.unwrap_or(f64::INFINITY),
            max_steps: s.max_steps,
            overflow_cap: s.overflow_cap.unwrap_or(DEFAULT_OVERFLOW_CAP),
            seed: s.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
