//! End-to-end experiment: synthesize both domains, pre-train on the source,
//! then adapt to the target in one of the ablation modes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::augment::{GenHyper, StyleGenerator};
use crate::cluster::ClusterParams;
use crate::error::{Error, Result};
use crate::nncore::{pretrain_source, ClassifierHead, Encoder, PretrainReport, Sgd, TrainHyper};
use crate::synthdata::{generate_dataset, split_query_gallery, Dataset, QueryGallery, SynthConfig};
use crate::trainer::{adapt, evaluate, AdaptConfig, Evaluation, History, Mode};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub synth: SynthConfig,
    pub hidden_dim: usize,
    pub feat_dim: usize,
    pub train: TrainHyper,
    /// Source-stage learning rate and momentum.
    pub pretrain_lr: f64,
    pub pretrain_momentum: f64,
    pub cluster: ClusterParams,
    pub gen: GenHyper,
    pub adapt: AdaptConfig,
    /// Seeds model initialization, the split and every sampling stream.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            synth: SynthConfig::default(),
            hidden_dim: 32,
            feat_dim: 16,
            train: TrainHyper::default(),
            pretrain_lr: 1e-2,
            pretrain_momentum: 0.9,
            cluster: ClusterParams::default(),
            gen: GenHyper::default(),
            adapt: AdaptConfig::default(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Same experiment with every seed derived from `seed`.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut cfg = self.clone();
        cfg.seed = seed;
        cfg.synth.seed = seed;
        cfg.adapt.seed = seed;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.train.validate()?;
        self.cluster.validate()?;
        self.gen.validate()?;
        self.adapt.validate()?;
        if self.hidden_dim == 0 || self.feat_dim == 0 {
            return Err(Error::Config("hidden_dim and feat_dim must be at least 1".into()));
        }
        if !(self.pretrain_lr.is_finite() && self.pretrain_lr > 0.0) {
            return Err(Error::Config("pretrain_lr must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.pretrain_momentum) {
            return Err(Error::Config("pretrain_momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// State after the source stage, shared by all modes of one seed.
#[derive(Debug, Clone)]
pub struct Pretrained<F> {
    pub source: Dataset,
    pub target: Dataset,
    pub split: QueryGallery,
    pub encoder: Encoder<F>,
    pub head: ClassifierHead<F>,
    pub report: PretrainReport,
    /// The source model applied to the target without adaptation.
    pub direct: Evaluation,
}

#[derive(Debug, Clone)]
pub struct Adapted<F> {
    pub mode: Mode,
    pub encoder: Encoder<F>,
    pub generator: StyleGenerator<F>,
    pub history: History,
    pub last: Evaluation,
}

pub fn pretrain_stage<F: Scalar>(cfg: &ExperimentConfig) -> Result<Pretrained<F>> {
    cfg.validate()?;
    let (source, target) = generate_dataset(&cfg.synth)?;
    let split = split_query_gallery(&target, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(5);
    let mut encoder = Encoder::random(cfg.synth.raw_dim, cfg.hidden_dim, cfg.feat_dim, &mut rng);
    let mut head = ClassifierHead::random(cfg.feat_dim, source.n_identities, &mut rng);
    let lr = F::lit(cfg.pretrain_lr);
    let mu = F::lit(cfg.pretrain_momentum);
    let mut enc_opt = Sgd::new(lr, mu)?;
    let mut head_opt = Sgd::new(lr, mu)?;
    let report = pretrain_source(&mut encoder, &mut head, &source, &cfg.train, &mut enc_opt, &mut head_opt, cfg.seed)?;
    let direct = evaluate(&encoder, &target, &split)?;
    Ok(Pretrained { source, target, split, encoder, head, report, direct })
}

pub fn adapt_stage<F: Scalar>(pre: &Pretrained<F>, cfg: &ExperimentConfig, mode: Mode) -> Result<Adapted<F>> {
    let mut encoder = pre.encoder.clone();
    let mut generator = StyleGenerator::identity(pre.target.n_cameras, pre.target.raw_dim);
    let adapt_cfg = AdaptConfig { mode, ..cfg.adapt.clone() };
    let history = adapt(&mut encoder, &mut generator, &pre.target, &pre.split, &adapt_cfg, &cfg.cluster, &cfg.gen)?;
    let last = match history.last() {
        Some(_) => evaluate(&encoder, &pre.target, &pre.split)?,
        None => pre.direct,
    };
    Ok(Adapted { mode, encoder, generator, history, last })
}

/// Pre-train and adapt in one call.
pub fn run_experiment<F: Scalar>(cfg: &ExperimentConfig, mode: Mode) -> Result<(Pretrained<F>, Adapted<F>)> {
    let pre = pretrain_stage(cfg)?;
    let adapted = adapt_stage(&pre, cfg, mode)?;
    Ok((pre, adapted))
}
