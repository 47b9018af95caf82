//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::adaptive::AdaptState;
use crate::error::{Error, Result};
use crate::kernels::{Flavor, GradientMode, KernelConfig, RunLength};
use crate::proposal::ProposalShape;
use crate::targets::{simulate_glm, Banana, Family, Gaussian, GlmData, GlmPosterior, TargetDensity};

pub const DEFAULT_TARGET_RATE: f64 = 0.45;
pub const DEFAULT_ADAPT_BATCH: usize = 100;
pub const DEFAULT_CLAMP: f64 = 2.0;
pub const DEFAULT_PRIOR_VARIANCE: f64 = 100.0;

/// Target description as it appears in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Gaussian {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    StandardNormal {
        d: usize,
    },
    Banana {
        #[serde(rename = "B")]
        bananacity: f64,
        d: usize,
    },
    /// Regression data read from a CSV with columns `y, x1..xp`.
    Glm {
        family: Family,
        csv: PathBuf,
        #[serde(default = "one")]
        dispersion: f64,
        #[serde(default = "prior_variance")]
        v_beta: f64,
        #[serde(default = "prior_variance")]
        v_u: f64,
    },
    /// Regression data simulated from a fixed seed.
    GlmSimulated {
        family: Family,
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_p")]
        p: usize,
        data_seed: u64,
        #[serde(default = "prior_variance")]
        v_beta: f64,
        #[serde(default = "prior_variance")]
        v_u: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn prior_variance() -> f64 {
    DEFAULT_PRIOR_VARIANCE
}
fn default_n() -> usize {
    100
}
fn default_p() -> usize {
    5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    label: String,
    flavor: Flavor,
    h: Option<f64>,
    s: Option<f64>,
    t: Option<f64>,
    #[serde(default)]
    adaptive: bool,
    #[serde(default = "analytic")]
    gradient: GradientMode,
}

fn analytic() -> GradientMode {
    GradientMode::Analytic
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdaptation {
    #[serde(default = "yes")]
    enabled: bool,
    #[serde(default = "target_rate")]
    a: f64,
    #[serde(rename = "B", default = "adapt_batch")]
    batch_size: usize,
    #[serde(rename = "M", default = "clamp")]
    clamp: f64,
    initial_log_sigma: Option<f64>,
}

impl Default for RawAdaptation {
    fn default() -> Self {
        RawAdaptation {
            enabled: true,
            a: DEFAULT_TARGET_RATE,
            batch_size: DEFAULT_ADAPT_BATCH,
            clamp: DEFAULT_CLAMP,
            initial_log_sigma: None,
        }
    }
}

fn yes() -> bool {
    true
}
fn target_rate() -> f64 {
    DEFAULT_TARGET_RATE
}
fn adapt_batch() -> usize {
    DEFAULT_ADAPT_BATCH
}
fn clamp() -> f64 {
    DEFAULT_CLAMP
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    target: TargetSpec,
    kernels: Vec<RawKernel>,
    seeds: Vec<u64>,
    n_steps: usize,
    #[serde(default)]
    burn_in: usize,
    #[serde(default = "thin_one")]
    thin: usize,
    #[serde(default)]
    adaptation: RawAdaptation,
    #[serde(default = "default_output")]
    output_dir: PathBuf,
    batch_size: Option<usize>,
    x0: Option<Vec<f64>>,
}

fn thin_one() -> usize {
    1
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// One labelled kernel of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRun {
    pub label: String,
    pub config: KernelConfig,
    pub adaptive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptationSettings {
    pub enabled: bool,
    pub target_rate: f64,
    pub batch_size: usize,
    pub clamp: f64,
    pub initial_log_sigma: f64,
}

impl AdaptationSettings {
    pub fn initial_state(&self) -> Result<AdaptState> {
        AdaptState::new(
            self.initial_log_sigma,
            self.clamp,
            self.target_rate,
            self.batch_size,
        )
    }
}

/// Validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub target: TargetSpec,
    pub kernels: Vec<KernelRun>,
    pub seeds: Vec<u64>,
    pub length: RunLength,
    pub adaptation: AdaptationSettings,
    pub output_dir: PathBuf,
    /// Batch size for the batch-means estimators; `⌊√n⌋` when absent.
    pub batch_size: Option<usize>,
    pub x0: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn build_target(&self) -> Result<Box<dyn TargetDensity>> {
        build_target(&self.target)
    }

    /// Starting point: configured `x0`, or the origin.
    pub fn start(&self, dim: usize) -> Vec<f64> {
        self.x0.clone().unwrap_or_else(|| vec![0.0; dim])
    }
}

pub fn build_target(spec: &TargetSpec) -> Result<Box<dyn TargetDensity>> {
    Ok(match spec {
        TargetSpec::Gaussian { mean, cov } => {
            let d = mean.len();
            if cov.len() != d || cov.iter().any(|r| r.len() != d) {
                return Err(Error::InvalidCovariance);
            }
            let flat: Vec<f64> = cov.iter().flatten().copied().collect();
            Box::new(Gaussian::new(mean.clone(), DMatrix::from_row_slice(d, d, &flat))?)
        }
        TargetSpec::StandardNormal { d } => Box::new(Gaussian::standard(*d)),
        TargetSpec::Banana { bananacity, d } => Box::new(Banana::new(*bananacity, *d)?),
        TargetSpec::Glm {
            family,
            csv,
            dispersion,
            v_beta,
            v_u,
        } => Box::new(GlmPosterior::new(GlmData::from_csv(
            csv,
            *family,
            *dispersion,
            *v_beta,
            *v_u,
        )?)),
        TargetSpec::GlmSimulated {
            family,
            n,
            p,
            data_seed,
            v_beta,
            v_u,
        } => Box::new(GlmPosterior::new(
            simulate_glm(*data_seed, *family, *n, *p, *v_beta, *v_u)?.data,
        )),
    })
}

fn positive(path: String, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::config(path, "must be > 0"))
    }
}

fn build_kernel(i: usize, raw: &RawKernel) -> Result<KernelRun> {
    let at = |field: &str| format!("kernels[{i}].{field}");
    if raw.label.is_empty()
        || !raw
            .label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
    {
        return Err(Error::config(
            at("label"),
            "must be non-empty and use only [A-Za-z0-9_-]",
        ));
    }
    let require = |field: &str, v: Option<f64>| {
        v.ok_or_else(|| Error::config(at(field), format!("required for {:?}", raw.flavor)))
    };
    let shape = match raw.flavor {
        Flavor::Dmh => {
            let h = require("h", raw.h)?;
            let s = positive(at("s"), require("s", raw.s)?)?;
            let t = positive(at("t"), require("t", raw.t)?)?;
            ProposalShape { h, s, t }
        }
        Flavor::Mala => {
            let h = require("h", raw.h)?;
            if raw.s.is_some_and(|s| s != 1.0) {
                return Err(Error::config(at("s"), "must be 1 for MALA"));
            }
            let t = positive(at("t"), raw.t.unwrap_or(h * h))?;
            ProposalShape { h, s: 1.0, t }
        }
        Flavor::Rwmh => {
            if raw.h.is_some_and(|h| h != 0.0) {
                return Err(Error::config(at("h"), "must be 0 for RWMH"));
            }
            if raw.s.is_some_and(|s| s != 1.0) {
                return Err(Error::config(at("s"), "must be 1 for RWMH"));
            }
            let t = positive(at("t"), require("t", raw.t)?)?;
            ProposalShape { h: 0.0, s: 1.0, t }
        }
    };
    if !(shape.h.is_finite() && shape.h >= 0.0) {
        return Err(Error::config(at("h"), "must be >= 0"));
    }
    if let GradientMode::Numeric { step } = raw.gradient {
        positive(at("gradient.numeric.step"), step)?;
    }
    let config = KernelConfig::new(raw.flavor, shape, raw.gradient)
        .map_err(|e| Error::config(format!("kernels[{i}]"), e.to_string()))?;
    Ok(KernelRun {
        label: raw.label.clone(),
        config,
        adaptive: raw.adaptive,
    })
}

fn target_dim(spec: &TargetSpec) -> Option<usize> {
    match spec {
        TargetSpec::Gaussian { mean, .. } => Some(mean.len()),
        TargetSpec::StandardNormal { d } | TargetSpec::Banana { d, .. } => Some(*d),
        TargetSpec::GlmSimulated { p, .. } => Some(p + 1),
        TargetSpec::Glm { .. } => None,
    }
}

fn validate_target(spec: &mut TargetSpec, base: &Path) -> Result<()> {
    match spec {
        TargetSpec::Gaussian { mean, cov } => {
            if mean.is_empty() {
                return Err(Error::config("target.mean", "must be non-empty"));
            }
            if cov.len() != mean.len() || cov.iter().any(|r| r.len() != mean.len()) {
                return Err(Error::config("target.cov", "must be a d×d matrix"));
            }
        }
        TargetSpec::StandardNormal { d } => {
            if *d == 0 {
                return Err(Error::config("target.d", "must be >= 1"));
            }
        }
        TargetSpec::Banana { bananacity, d } => {
            positive("target.B".into(), *bananacity)?;
            if *d < 2 {
                return Err(Error::config("target.d", "must be >= 2"));
            }
        }
        TargetSpec::Glm {
            csv,
            dispersion,
            v_beta,
            v_u,
            ..
        } => {
            if csv.is_relative() {
                *csv = base.join(&*csv);
            }
            if !csv.is_file() {
                return Err(Error::config(
                    "target.csv",
                    format!("file {} does not exist", csv.display()),
                ));
            }
            positive("target.dispersion".into(), *dispersion)?;
            positive("target.v_beta".into(), *v_beta)?;
            positive("target.v_u".into(), *v_u)?;
        }
        TargetSpec::GlmSimulated { n, p, v_beta, v_u, .. } => {
            if *n == 0 || *p == 0 {
                return Err(Error::config("target", "n and p must be >= 1"));
            }
            positive("target.v_beta".into(), *v_beta)?;
            positive("target.v_u".into(), *v_u)?;
        }
    }
    Ok(())
}

fn json_error(err: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let mut path = err.path().to_string();
    let inner = err.into_inner();
    let message = inner.to_string();
    // serde reports a missing field at its parent; point at the field itself
    if let Some(rest) = message.strip_prefix("missing field `") {
        if let Some(field) = rest.split('`').next() {
            path = if path == "." {
                field.to_string()
            } else {
                format!("{path}.{field}")
            };
        }
    }
    Error::config(path, message)
}

/// Parse and validate a config document. Relative paths resolve against
/// the current directory.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_in(text, Path::new("."))
}

/// Parse and validate a config file; relative paths inside it resolve
/// against the file's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_in(&text, base)
}

pub fn parse_config_in(text: &str, base: &Path) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut raw: RawConfig = serde_path_to_error::deserialize(de).map_err(json_error)?;

    validate_target(&mut raw.target, base)?;
    if raw.kernels.is_empty() {
        return Err(Error::config("kernels", "at least one kernel is required"));
    }
    let kernels = raw
        .kernels
        .iter()
        .enumerate()
        .map(|(i, k)| build_kernel(i, k))
        .collect::<Result<Vec<_>>>()?;
    for (i, k) in kernels.iter().enumerate() {
        if kernels[..i].iter().any(|o| o.label == k.label) {
            return Err(Error::config(format!("kernels[{i}].label"), "duplicate label"));
        }
    }
    if raw.seeds.is_empty() {
        return Err(Error::config("seeds", "at least one seed is required"));
    }
    let length = RunLength::new(raw.n_steps, raw.burn_in, raw.thin)
        .map_err(|e| Error::config("n_steps", e.to_string()))?;

    let ad = raw.adaptation;
    positive("adaptation.M".into(), ad.clamp)?;
    if !(ad.a > 0.0 && ad.a < 1.0) {
        return Err(Error::config("adaptation.a", "must lie in (0, 1)"));
    }
    if ad.batch_size == 0 {
        return Err(Error::config("adaptation.B", "must be >= 1"));
    }
    let initial_log_sigma = ad.initial_log_sigma.unwrap_or(ad.clamp);
    if !initial_log_sigma.is_finite() || initial_log_sigma.abs() > ad.clamp {
        return Err(Error::config("adaptation.initial_log_sigma", "must lie in [-M, M]"));
    }
    if ad.enabled && kernels.iter().any(|k| k.adaptive) && raw.n_steps < ad.batch_size {
        return Err(Error::config("n_steps", "must be at least the adaptation batch size"));
    }

    if raw.batch_size == Some(0) {
        return Err(Error::config("batch_size", "must be >= 1"));
    }
    if let (Some(x0), Some(d)) = (&raw.x0, target_dim(&raw.target)) {
        if x0.len() != d {
            return Err(Error::config("x0", format!("must have length {d}")));
        }
    }
    let output_dir = if raw.output_dir.is_relative() {
        base.join(&raw.output_dir)
    } else {
        raw.output_dir
    };

    Ok(ExperimentConfig {
        target: raw.target,
        kernels,
        seeds: raw.seeds,
        length,
        adaptation: AdaptationSettings {
            enabled: ad.enabled,
            target_rate: ad.a,
            batch_size: ad.batch_size,
            clamp: ad.clamp,
            initial_log_sigma,
        },
        output_dir,
        batch_size: raw.batch_size,
        x0: raw.x0,
    })
}
