//! The four subcommands, independent of argument parsing.

use std::fs;
use std::path::{Path, PathBuf};

use adcluster::pipeline::{pretrain_stage, Adapted, Pretrained};
use adcluster::trainer::{evaluate, Evaluation};
use adcluster::{adapt_observed, assign_pseudo_labels, generate_dataset, split_query_gallery, Mode, StyleGenerator};

use crate::checkpoint::{
    encoder_entries, encoder_from_entries, generator_entries, head_entries, read_checkpoint, write_checkpoint,
    CheckpointError,
};
use crate::config::{parse_config, render_config, validate, RunConfig};
use crate::report;

/// Failure of a command, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<adcluster::Error> for CliError {
    fn from(e: adcluster::Error) -> Self {
        match e {
            adcluster::Error::Config(m) => CliError::Config(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(format!("writing CSV: {e}"))
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Command-line settings that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(mode) = overrides.mode {
        cfg.experiment.adapt.mode = mode;
    }
    if let Some(seed) = overrides.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &overrides.out {
        cfg.output_dir = out.clone();
    }
    validate(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub direct: Evaluation,
    pub adapted: Evaluation,
    pub iterations: usize,
}

/// Adapts from a pretrained state in `cfg`'s mode, writing a checkpoint after
/// every iteration and the history and final metrics at the end.
fn adapt_to_dir(pre: &Pretrained<f64>, cfg: &RunConfig, out: &Path) -> Result<Adapted<f64>, CliError> {
    let exp = &cfg.experiment;
    let ckpt_dir = out.join("checkpoints");
    create_dir(&ckpt_dir)?;
    let mut encoder = pre.encoder.clone();
    let mut generator = StyleGenerator::identity(pre.target.n_cameras, pre.target.raw_dim);
    let adapt_cfg = exp.adapt.clone();
    let mut failure: Option<CheckpointError> = None;
    let result = adapt_observed(
        &mut encoder,
        &mut generator,
        &pre.target,
        &pre.split,
        &adapt_cfg,
        &exp.cluster,
        &exp.gen,
        |record, f, g| {
            let mut entries = encoder_entries(f);
            entries.extend(generator_entries(g));
            let path = ckpt_dir.join(format!("iter_{:03}.adck", record.iteration));
            write_checkpoint(&path, &entries).map_err(|e| {
                let msg = format!("{}: {e}", path.display());
                failure = Some(e);
                adcluster::Error::Interrupted(msg)
            })
        },
    );
    let history = match (result, failure) {
        (_, Some(e)) => return Err(e.into()),
        (r, None) => r?,
    };
    let last = if history.is_empty() { pre.direct } else { evaluate(&encoder, &pre.target, &pre.split)? };
    let adapted = Adapted { mode: adapt_cfg.mode, encoder, generator, history, last };

    let mut entries = encoder_entries(&adapted.encoder);
    entries.extend(generator_entries(&adapted.generator));
    write_checkpoint(&out.join("final.adck"), &entries)?;
    report::write_history(&out.join("history.csv"), &adapted.history)?;
    report::write_final_metrics(&out.join("final_metrics.csv"), &pre.direct, &adapted)?;
    let feats = adapted.encoder.embed(pre.target.raw_matrix().view())?;
    let assignment = assign_pseudo_labels(feats.view(), &exp.cluster)?;
    report::write_assignment(&out.join("pseudo_labels.csv"), &assignment.labels)?;
    Ok(adapted)
}

fn write_pretrained(pre: &Pretrained<f64>, out: &Path) -> Result<(), CliError> {
    let mut entries = encoder_entries(&pre.encoder);
    entries.extend(head_entries(&pre.head));
    write_checkpoint(&out.join("pretrained.adck"), &entries)?;
    Ok(())
}

fn write_config_copy(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let path = out.join("config_used.txt");
    fs::write(&path, render_config(cfg)).map_err(|e| io_error(&path, e))
}

/// Pre-train, adapt and evaluate.
pub fn cmd_run(config_path: &Path, overrides: &Overrides) -> Result<RunSummary, CliError> {
    let cfg = load_config(config_path, overrides)?;
    run_config(&cfg)
}

pub fn run_config(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    let out = cfg.output_dir.clone();
    create_dir(&out)?;
    write_config_copy(cfg, &out)?;
    let pre = pretrain_stage::<f64>(&cfg.experiment)?;
    write_pretrained(&pre, &out)?;
    let adapted = adapt_to_dir(&pre, cfg, &out)?;
    Ok(RunSummary { output_dir: out, direct: pre.direct, adapted: adapted.last, iterations: adapted.history.len() })
}

/// Full-mode runs over several diversity weights, sharing one pre-training.
/// Each value gets its own subdirectory; the summary goes to
/// `lambda_sweep.csv` in input order.
pub fn cmd_sweep_lambda(config_path: &Path, values: &[f64], overrides: &Overrides) -> Result<Vec<(f64, Evaluation)>, CliError> {
    let cfg = load_config(config_path, overrides)?;
    sweep_config(&cfg, values)
}

pub fn sweep_config(cfg: &RunConfig, values: &[f64]) -> Result<Vec<(f64, Evaluation)>, CliError> {
    if values.is_empty() {
        return Err(CliError::Config("no lambda values given".into()));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(CliError::Config(format!("lambda values must be positive, got {v}")));
    }
    let out = cfg.output_dir.clone();
    create_dir(&out)?;
    write_config_copy(cfg, &out)?;
    let pre = pretrain_stage::<f64>(&cfg.experiment)?;
    write_pretrained(&pre, &out)?;
    let mut rows = Vec::with_capacity(values.len());
    for (i, &lambda) in values.iter().enumerate() {
        let mut point = cfg.clone();
        point.experiment.gen.lambda = lambda;
        point.experiment.adapt.mode = Mode::Full;
        let dir = out.join(format!("lambda_{i:02}"));
        create_dir(&dir)?;
        let adapted = adapt_to_dir(&pre, &point, &dir)?;
        rows.push((lambda, adapted.last));
    }
    report::write_sweep(&out.join("lambda_sweep.csv"), &rows)?;
    Ok(rows)
}

/// Re-evaluates a stored encoder on the target split the config describes.
pub fn cmd_eval(config_path: &Path, checkpoint: &Path, overrides: &Overrides) -> Result<Evaluation, CliError> {
    let cfg = load_config(config_path, overrides)?;
    let entries = read_checkpoint(checkpoint).map_err(|e| CliError::Runtime(format!("{}: {e}", checkpoint.display())))?;
    let encoder = encoder_from_entries(&entries)?;
    let (_, target) = generate_dataset(&cfg.experiment.synth)?;
    if encoder.raw_dim() != target.raw_dim {
        return Err(CliError::Runtime(format!(
            "checkpoint encoder takes {} inputs, config describes {}",
            encoder.raw_dim(),
            target.raw_dim
        )));
    }
    let split = split_query_gallery(&target, cfg.experiment.seed)?;
    let e = evaluate(&encoder, &target, &split)?;
    create_dir(&cfg.output_dir)?;
    report::write_evaluation(&cfg.output_dir.join("eval_metrics.csv"), "checkpoint", &e)?;
    Ok(e)
}

/// Writes both synthetic domains and the target query/gallery split as CSV.
pub fn cmd_synth(config_path: &Path, overrides: &Overrides) -> Result<PathBuf, CliError> {
    let cfg = load_config(config_path, overrides)?;
    let (source, target) = generate_dataset(&cfg.experiment.synth)?;
    let split = split_query_gallery(&target, cfg.experiment.seed)?;
    let out = cfg.output_dir.clone();
    create_dir(&out)?;
    report::write_dataset(&out.join("source.csv"), &source)?;
    report::write_dataset(&out.join("target.csv"), &target)?;
    report::write_split(&out.join("target_split.csv"), &split)?;
    Ok(out)
}
