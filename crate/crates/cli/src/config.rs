//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored and
//! later lines override earlier ones. Every key is optional.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use adcluster::{AugRatio, ExperimentConfig, Mode};

/// Everything a run needs: the experiment, the mode and where to write.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { experiment: ExperimentConfig::default(), output_dir: PathBuf::from("adcluster-out") }
    }
}

impl RunConfig {
    pub fn mode(&self) -> Mode {
        self.experiment.adapt.mode
    }

    /// Applies a global seed to every component.
    pub fn set_seed(&mut self, seed: u64) {
        self.experiment = self.experiment.with_seed(seed);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line, absent for whole-file checks.
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.key) {
            (Some(line), Some(key)) => write!(f, "line {line}: '{key}': {}", self.message),
            (Some(line), None) => write!(f, "line {line}: {}", self.message),
            (None, Some(key)) => write!(f, "'{key}': {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Every recognized key, in the order `render_config` writes them.
pub const KEYS: &[&str] = &[
    "seed",
    "output_dir",
    "mode",
    "n_identities_source",
    "n_identities_target",
    "samples_per_identity_per_camera",
    "n_cameras_source",
    "n_cameras_target",
    "raw_dim",
    "prototype_scale",
    "within_identity_noise",
    "camera_style_strength",
    "domain_shift_strength",
    "hidden_dim",
    "feat_dim",
    "margin",
    "n_s",
    "source_instances",
    "pretrain_epochs",
    "pretrain_lr",
    "pretrain_momentum",
    "k1",
    "k2",
    "lambda_rr",
    "eps_quantile",
    "min_pts",
    "lambda",
    "beta_recon",
    "beta_style",
    "gen_lr",
    "gen_momentum",
    "prefit_steps",
    "n_cluster_iterations",
    "epochs_per_iteration",
    "p",
    "k_img",
    "aug_ratio",
    "lr",
    "momentum",
];

fn parse<T: FromStr>(value: &str, what: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("expected {what}, got '{value}'"))
}

fn count(value: &str, min: usize) -> Result<usize, String> {
    let v: usize = parse(value, "a non-negative integer")?;
    if v < min {
        return Err(format!("must be at least {min}, got {v}"));
    }
    Ok(v)
}

fn real(value: &str, lo: f64, hi: f64, lo_open: bool, hi_open: bool) -> Result<f64, String> {
    let v: f64 = parse(value, "a number")?;
    let above = if lo_open { v > lo } else { v >= lo };
    let below = if hi_open { v < hi } else { v <= hi };
    if !(v.is_finite() && above && below) {
        let l = if lo_open { '(' } else { '[' };
        let h = if hi_open { ')' } else { ']' };
        let hi_s = if hi.is_infinite() { "inf".to_string() } else { hi.to_string() };
        return Err(format!("must lie in {l}{lo}, {hi_s}{h}, got {value}"));
    }
    Ok(v)
}

fn non_negative(value: &str) -> Result<f64, String> {
    real(value, 0.0, f64::INFINITY, false, true)
}

fn positive(value: &str) -> Result<f64, String> {
    real(value, 0.0, f64::INFINITY, true, true)
}

fn momentum(value: &str) -> Result<f64, String> {
    real(value, 0.0, 1.0, false, true)
}

fn apply(cfg: &mut RunConfig, key: &str, value: &str) -> Result<(), String> {
    let e = &mut cfg.experiment;
    match key {
        "seed" => e.seed = parse(value, "an unsigned integer")?,
        "output_dir" => {
            if value.is_empty() {
                return Err("must not be empty".into());
            }
            cfg.output_dir = PathBuf::from(value);
        }
        "mode" => e.adapt.mode = value.parse::<Mode>().map_err(|err| err.to_string())?,
        "n_identities_source" => e.synth.n_identities_source = count(value, 2)?,
        "n_identities_target" => e.synth.n_identities_target = count(value, 2)?,
        "samples_per_identity_per_camera" => e.synth.samples_per_identity_per_camera = count(value, 1)?,
        "n_cameras_source" => e.synth.n_cameras_source = count(value, 2)?,
        "n_cameras_target" => e.synth.n_cameras_target = count(value, 2)?,
        "raw_dim" => e.synth.raw_dim = count(value, 1)?,
        "prototype_scale" => e.synth.prototype_scale = non_negative(value)?,
        "within_identity_noise" => e.synth.within_identity_noise = non_negative(value)?,
        "camera_style_strength" => e.synth.camera_style_strength = non_negative(value)?,
        "domain_shift_strength" => e.synth.domain_shift_strength = non_negative(value)?,
        "hidden_dim" => e.hidden_dim = count(value, 1)?,
        "feat_dim" => e.feat_dim = count(value, 1)?,
        "margin" => {
            let m = positive(value)?;
            e.train.margin = m;
            e.adapt.margin = m;
        }
        "n_s" => e.train.n_s = count(value, 4)?,
        "source_instances" => e.train.source_instances = count(value, 2)?,
        "pretrain_epochs" => e.train.epochs = count(value, 0)?,
        "pretrain_lr" => e.pretrain_lr = positive(value)?,
        "pretrain_momentum" => e.pretrain_momentum = momentum(value)?,
        "k1" => e.cluster.k1 = count(value, 1)?,
        "k2" => e.cluster.k2 = count(value, 1)?,
        "lambda_rr" => e.cluster.lambda_rr = real(value, 0.0, 1.0, false, false)?,
        "eps_quantile" => e.cluster.eps_quantile = real(value, 0.0, 1.0, true, true)?,
        "min_pts" => e.cluster.min_pts = count(value, 2)?,
        "lambda" => e.gen.lambda = positive(value)?,
        "beta_recon" => e.gen.beta_recon = non_negative(value)?,
        "beta_style" => e.gen.beta_style = non_negative(value)?,
        "gen_lr" => e.gen.gen_lr = non_negative(value)?,
        "gen_momentum" => e.gen.gen_momentum = momentum(value)?,
        "prefit_steps" => e.gen.prefit_steps = count(value, 0)?,
        "n_cluster_iterations" => e.adapt.n_cluster_iterations = count(value, 0)?,
        "epochs_per_iteration" => e.adapt.epochs_per_iteration = count(value, 0)?,
        "p" => e.adapt.p = count(value, 2)?,
        "k_img" => e.adapt.k_img = count(value, 2)?,
        "aug_ratio" => e.adapt.aug_ratio = value.parse::<AugRatio>().map_err(|err| err.to_string())?,
        "lr" => e.adapt.lr = positive(value)?,
        "momentum" => e.adapt.momentum = momentum(value)?,
        _ => unreachable!("key list and parser disagree on '{key}'"),
    }
    Ok(())
}

/// Parses configuration text. Missing keys keep their defaults; the global
/// `seed` is applied to every component last.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError { line: Some(line), key: None, message: format!("expected 'key = value', got '{content}'") });
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(ConfigError { line: Some(line), key: Some(key.to_string()), message: "unknown key".into() });
        }
        apply(&mut cfg, key, value).map_err(|message| ConfigError { line: Some(line), key: Some(key.to_string()), message })?;
    }
    let seed = cfg.experiment.seed;
    cfg.set_seed(seed);
    validate(&cfg)?;
    Ok(cfg)
}

/// Cross-field checks the per-key parser cannot make.
pub fn validate(cfg: &RunConfig) -> Result<(), ConfigError> {
    let e = &cfg.experiment;
    let fail = |key: &str, message: String| Err(ConfigError { line: None, key: Some(key.into()), message });
    if e.cluster.k2 > e.cluster.k1 {
        return fail("k2", format!("must not exceed k1 = {}, got {}", e.cluster.k1, e.cluster.k2));
    }
    if e.train.n_s / e.train.source_instances < 2 {
        return fail("n_s", format!("must cover at least two identities of {} instances", e.train.source_instances));
    }
    e.validate().map_err(|err| ConfigError { line: None, key: None, message: err.to_string() })
}

/// Writes every setting back in the accepted format.
pub fn render_config(cfg: &RunConfig) -> String {
    let e = &cfg.experiment;
    let value = |key: &str| -> String {
        match key {
            "seed" => e.seed.to_string(),
            "output_dir" => cfg.output_dir.display().to_string(),
            "mode" => e.adapt.mode.to_string(),
            "n_identities_source" => e.synth.n_identities_source.to_string(),
            "n_identities_target" => e.synth.n_identities_target.to_string(),
            "samples_per_identity_per_camera" => e.synth.samples_per_identity_per_camera.to_string(),
            "n_cameras_source" => e.synth.n_cameras_source.to_string(),
            "n_cameras_target" => e.synth.n_cameras_target.to_string(),
            "raw_dim" => e.synth.raw_dim.to_string(),
            "prototype_scale" => e.synth.prototype_scale.to_string(),
            "within_identity_noise" => e.synth.within_identity_noise.to_string(),
            "camera_style_strength" => e.synth.camera_style_strength.to_string(),
            "domain_shift_strength" => e.synth.domain_shift_strength.to_string(),
            "hidden_dim" => e.hidden_dim.to_string(),
            "feat_dim" => e.feat_dim.to_string(),
            "margin" => e.adapt.margin.to_string(),
            "n_s" => e.train.n_s.to_string(),
            "source_instances" => e.train.source_instances.to_string(),
            "pretrain_epochs" => e.train.epochs.to_string(),
            "pretrain_lr" => e.pretrain_lr.to_string(),
            "pretrain_momentum" => e.pretrain_momentum.to_string(),
            "k1" => e.cluster.k1.to_string(),
            "k2" => e.cluster.k2.to_string(),
            "lambda_rr" => e.cluster.lambda_rr.to_string(),
            "eps_quantile" => e.cluster.eps_quantile.to_string(),
            "min_pts" => e.cluster.min_pts.to_string(),
            "lambda" => e.gen.lambda.to_string(),
            "beta_recon" => e.gen.beta_recon.to_string(),
            "beta_style" => e.gen.beta_style.to_string(),
            "gen_lr" => e.gen.gen_lr.to_string(),
            "gen_momentum" => e.gen.gen_momentum.to_string(),
            "prefit_steps" => e.gen.prefit_steps.to_string(),
            "n_cluster_iterations" => e.adapt.n_cluster_iterations.to_string(),
            "epochs_per_iteration" => e.adapt.epochs_per_iteration.to_string(),
            "p" => e.adapt.p.to_string(),
            "k_img" => e.adapt.k_img.to_string(),
            "aug_ratio" => e.adapt.aug_ratio.to_string(),
            "lr" => e.adapt.lr.to_string(),
            "momentum" => e.adapt.momentum.to_string(),
            _ => unreachable!(),
        }
    };
    KEYS.iter().map(|k| format!("{k} = {}\n", value(k))).collect()
}
