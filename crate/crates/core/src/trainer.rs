//! The adaptation loop: cluster the target features, then alternate
//! generator (max) and encoder (min) updates over pseudo-labeled mini-batches.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::{index, IndexedRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::augment::{max_step, prefit_generator, GenBatch, GenHyper, StyleGenerator, StyleTargets};
use crate::cluster::{assign_pseudo_labels, cluster_centers, ClusterAssignment, ClusterParams};
use crate::error::{Error, Result};
use crate::eval::{map_cmc, pairwise_fscore, scatter_ratio, Metrics};
use crate::nncore::{triplet_batch_hard, Encoder, Sgd};
use crate::synthdata::{Dataset, QueryGallery};
use crate::Scalar;

/// Ablation modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Iterative clustering and triplet training on original samples only.
    Baseline,
    /// Adds cross-camera samples from a fixed, pre-fit generator.
    BaselineAsa,
    /// Full min-max loop: the generator is also trained to increase diversity.
    Full,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Baseline, Mode::BaselineAsa, Mode::Full];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::BaselineAsa => "asa",
            Mode::Full => "full",
        }
    }

    pub fn augments(self) -> bool {
        self != Mode::Baseline
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "baseline" => Ok(Mode::Baseline),
            "asa" | "baseline_asa" | "baseline+asa" => Ok(Mode::BaselineAsa),
            "full" => Ok(Mode::Full),
            other => Err(Error::Config(format!("unknown mode '{other}' (expected baseline, asa or full)"))),
        }
    }
}

/// Original-to-augmented sample ratio inside each identity group of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugRatio {
    pub original: usize,
    pub augmented: usize,
}

impl AugRatio {
    /// Augmented slots out of `k` (rounded down).
    pub fn augmented_of(self, k: usize) -> usize {
        k * self.augmented / (self.original + self.augmented)
    }
}

impl fmt::Display for AugRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.original, self.augmented)
    }
}

impl FromStr for AugRatio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("aug_ratio must look like '3:1', got '{s}'"));
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        let original: usize = a.trim().parse().map_err(|_| bad())?;
        let augmented: usize = b.trim().parse().map_err(|_| bad())?;
        if original == 0 {
            return Err(bad());
        }
        Ok(Self { original, augmented })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptConfig {
    pub n_cluster_iterations: usize,
    pub epochs_per_iteration: usize,
    /// Pseudo-identities per batch.
    pub p: usize,
    /// Samples per pseudo-identity.
    pub k_img: usize,
    pub aug_ratio: AugRatio,
    pub mode: Mode,
    pub lr: f64,
    pub momentum: f64,
    pub margin: f64,
    pub seed: u64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            n_cluster_iterations: 10,
            epochs_per_iteration: 10,
            p: 8,
            k_img: 4,
            aug_ratio: AugRatio { original: 3, augmented: 1 },
            mode: Mode::Full,
            lr: 1e-2,
            momentum: 0.9,
            margin: 0.5,
            seed: 0,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p < 2 || self.k_img < 2 {
            return Err(Error::Config(format!("need p >= 2 and k_img >= 2, got p = {}, k_img = {}", self.p, self.k_img)));
        }
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return Err(Error::Config("margin must be positive".into()));
        }
        if self.mode.augments() && self.k_img - self.aug_ratio.augmented_of(self.k_img) < 1 {
            return Err(Error::Config("aug_ratio leaves no original sample per identity".into()));
        }
        Ok(())
    }
}

/// One batch slot: which sample to use and the pseudo-label it trains with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchEntry {
    Original { index: usize, label: usize },
    Augmented { source: usize, target_camera: usize, label: usize },
}

impl BatchEntry {
    pub fn label(&self) -> usize {
        match *self {
            BatchEntry::Original { label, .. } | BatchEntry::Augmented { label, .. } => label,
        }
    }

    pub fn is_augmented(&self) -> bool {
        matches!(self, BatchEntry::Augmented { .. })
    }
}

/// Where augmented slots come from: every clustered sample translated into
/// each camera other than its own.
#[derive(Debug, Clone, Copy)]
pub struct AugmentPool<'a> {
    pub cameras: &'a [usize],
    pub n_cameras: usize,
    pub ratio: AugRatio,
}

/// PK batch over pseudo-identities: `p` clusters with at least two members
/// are drawn uniformly, each contributing `k_img` slots split between
/// originals and augmented samples according to the pool's ratio. Draws are
/// without replacement unless a cluster is too small.
pub fn sample_pk_batch<R: Rng + ?Sized>(
    assignment_members: &[Vec<usize>],
    p: usize,
    k_img: usize,
    pool: Option<AugmentPool<'_>>,
    rng: &mut R,
) -> Result<Vec<BatchEntry>> {
    let eligible: Vec<usize> = (0..assignment_members.len()).filter(|&c| assignment_members[c].len() >= 2).collect();
    if eligible.len() < p {
        return Err(Error::TooFewClusters { needed: p, found: eligible.len() });
    }
    let n_aug = pool.map_or(0, |pool| pool.ratio.augmented_of(k_img));
    let n_orig = k_img - n_aug;

    let mut batch = Vec::with_capacity(p * k_img);
    for &label in eligible.choose_multiple(rng, p) {
        let members = &assignment_members[label];
        if members.len() >= n_orig {
            batch.extend(members.choose_multiple(rng, n_orig).map(|&index| BatchEntry::Original { index, label }));
        } else {
            batch.extend((0..n_orig).map(|_| BatchEntry::Original { index: members[rng.random_range(0..members.len())], label }));
        }
        if let Some(pool) = pool.filter(|_| n_aug > 0) {
            let per = pool.n_cameras - 1;
            let size = members.len() * per;
            let picks: Vec<usize> = if size >= n_aug {
                index::sample(rng, size, n_aug).into_vec()
            } else {
                (0..n_aug).map(|_| rng.random_range(0..size)).collect()
            };
            for slot in picks {
                let source = members[slot / per];
                let own = pool.cameras[source];
                let other = slot % per;
                let target_camera = if other < own { other } else { other + 1 };
                batch.push(BatchEntry::Augmented { source, target_camera, label });
            }
        }
    }
    Ok(batch)
}

/// One encoder update on the batch-hard triplet loss. Returns the loss
/// before the update.
pub fn min_step<F: Scalar>(
    f: &mut Encoder<F>,
    batch: ArrayView2<'_, F>,
    labels: &[usize],
    margin: F,
    opt: &mut Sgd<F>,
) -> Result<F> {
    let (feats, cache) = f.forward(batch)?;
    let (loss, d_feats) = triplet_batch_hard(feats.view(), labels, margin)?;
    let (grad, _) = f.backward(&cache, d_feats.view())?;
    opt.step(f, &grad)?;
    Ok(loss)
}

/// Per-iteration record. The CSV export writes the first eleven fields.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub n_clusters: usize,
    pub n_noise: usize,
    pub pseudo_fscore: f64,
    pub map: f64,
    pub cmc1: f64,
    pub cmc5: f64,
    pub cmc10: f64,
    pub j: f64,
    /// NaN when the mode never evaluates the diversity loss.
    pub mean_l_div: f64,
    pub mean_l_tri: f64,
    pub max_steps: usize,
    pub min_steps: usize,
    /// Clustering collapsed and the previous pseudo-labels were reused.
    pub reused_labels: bool,
}

pub type History = Vec<IterationRecord>;

/// Retrieval metrics and scatter ratio of an encoder on the target split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub j: f64,
}

/// Converts a stored `f64` matrix to the working precision.
pub fn to_f<F: Scalar>(m: &Array2<f64>) -> Array2<F> {
    m.mapv(F::lit)
}

pub fn evaluate<F: Scalar>(f: &Encoder<F>, target: &Dataset, split: &QueryGallery) -> Result<Evaluation> {
    let feats = f.embed(to_f::<F>(&target.raw_matrix()).view())?;
    evaluate_features(feats.view(), target, split)
}

pub fn evaluate_features<F: Scalar>(feats: ArrayView2<'_, F>, target: &Dataset, split: &QueryGallery) -> Result<Evaluation> {
    let ids = target.identities();
    let metrics = map_cmc(feats, &split.query, &split.gallery, &ids, &target.cameras())?;
    let mut all: Vec<usize> = split.query.iter().chain(&split.gallery).copied().collect();
    all.sort_unstable();
    let sub = feats.select(Axis(0), &all);
    let sub_ids: Vec<usize> = all.iter().map(|&i| ids[i]).collect();
    let j = scatter_ratio(sub.view(), &sub_ids)?;
    Ok(Evaluation { metrics, j })
}

fn eligible_clusters<F: Scalar>(a: &ClusterAssignment<F>) -> usize {
    a.sizes.iter().filter(|&&s| s >= 2).count()
}

/// Runs the clustering iterations on the target domain, mutating the encoder
/// and (in the augmenting modes) the generator.
pub fn adapt<F: Scalar>(
    f: &mut Encoder<F>,
    g: &mut StyleGenerator<F>,
    target: &Dataset,
    split: &QueryGallery,
    cfg: &AdaptConfig,
    cluster: &ClusterParams,
    gen: &GenHyper,
) -> Result<History> {
    adapt_observed(f, g, target, split, cfg, cluster, gen, |_, _, _| Ok(()))
}

/// [`adapt`] with a callback after every iteration, given the new record and
/// the current models. An error from the callback stops the run.
#[allow(clippy::too_many_arguments)]
pub fn adapt_observed<F, O>(
    f: &mut Encoder<F>,
    g: &mut StyleGenerator<F>,
    target: &Dataset,
    split: &QueryGallery,
    cfg: &AdaptConfig,
    cluster: &ClusterParams,
    gen: &GenHyper,
    mut observe: O,
) -> Result<History>
where
    F: Scalar,
    O: FnMut(&IterationRecord, &Encoder<F>, &StyleGenerator<F>) -> Result<()>,
{
    cfg.validate()?;
    cluster.validate()?;
    gen.validate()?;
    let mut history = History::with_capacity(cfg.n_cluster_iterations);
    if cfg.n_cluster_iterations == 0 {
        return Ok(history);
    }
    if g.n_cameras() != target.n_cameras || g.raw_dim() != target.raw_dim {
        return Err(Error::Shape(format!(
            "generator covers {} cameras of dimension {}, target has {} of dimension {}",
            g.n_cameras(),
            g.raw_dim(),
            target.n_cameras,
            target.raw_dim
        )));
    }

    let raw = to_f::<F>(&target.raw_matrix());
    let cameras = target.cameras();
    let truth = target.identities();
    let margin = F::lit(cfg.margin);
    let mut opt = Sgd::new(F::lit(cfg.lr), F::lit(cfg.momentum))?;
    let mut gen_opt = Sgd::new(F::lit(gen.gen_lr), F::lit(gen.gen_momentum))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(4);

    let style = if cfg.mode.augments() {
        let targets = StyleTargets::from_samples(raw.view(), &cameras, target.n_cameras)?;
        prefit_generator(g, raw.view(), &cameras, gen, &targets)?;
        Some(targets)
    } else {
        None
    };
    let pool = cfg.mode.augments().then_some(AugmentPool {
        cameras: &cameras,
        n_cameras: target.n_cameras,
        ratio: cfg.aug_ratio,
    });

    let mut previous: Option<Vec<Option<usize>>> = None;
    for iteration in 0..cfg.n_cluster_iterations {
        let feats = f.embed(raw.view())?;
        let fresh = assign_pseudo_labels(feats.view(), cluster).ok().filter(|a| eligible_clusters(a) >= 2);
        let reused_labels = fresh.is_none();
        let assignment = match fresh {
            Some(a) => Some(a),
            None => match &previous {
                Some(labels) => {
                    let (centers, sizes) = cluster_centers(feats.view(), labels)?;
                    Some(ClusterAssignment { labels: labels.clone(), centers, sizes })
                }
                None => None,
            },
        };

        let mut div_sum = 0.0;
        let mut tri_sum = 0.0;
        let mut max_steps = 0usize;
        let mut min_steps = 0usize;
        let (n_clusters, n_noise, pseudo_fscore) = match &assignment {
            Some(a) => (a.n_clusters(), a.n_noise(), pairwise_fscore(&a.labels, &truth)?.fscore),
            None => (0, target.len(), 0.0),
        };

        if let Some(a) = assignment.as_ref().filter(|a| eligible_clusters(a) >= 2) {
            let members = a.members();
            let p = cfg.p.min(eligible_clusters(a));
            let clustered = target.len() - a.n_noise();
            let batches_per_epoch = clustered.div_ceil(p * cfg.k_img);
            for _ in 0..cfg.epochs_per_iteration {
                for _ in 0..batches_per_epoch {
                    let entries = sample_pk_batch(&members, p, cfg.k_img, pool, &mut rng)?;

                    if cfg.mode == Mode::Full {
                        let originals: Vec<usize> = entries
                            .iter()
                            .filter_map(|e| match *e {
                                BatchEntry::Original { index, .. } => Some(index),
                                BatchEntry::Augmented { .. } => None,
                            })
                            .collect();
                        let own: Vec<usize> = originals.iter().map(|&i| cameras[i]).collect();
                        let targets: Vec<usize> = own
                            .iter()
                            .map(|&c| (c + rng.random_range(1..target.n_cameras)) % target.n_cameras)
                            .collect();
                        let gb = GenBatch {
                            raw: raw.select(Axis(0), &originals),
                            cameras: own,
                            targets,
                            labels: originals.iter().map(|&i| a.labels[i]).collect(),
                        };
                        let report = max_step(g, f, &gb, a.centers.view(), gen, style.as_ref(), &mut gen_opt)?;
                        div_sum += report.l_div.as_f64();
                        max_steps += 1;
                    }

                    let mut x = Array2::<F>::zeros((entries.len(), raw.ncols()));
                    for (mut row, e) in x.rows_mut().into_iter().zip(&entries) {
                        match *e {
                            BatchEntry::Original { index, .. } => row.assign(&raw.row(index)),
                            BatchEntry::Augmented { source, target_camera, .. } => {
                                row.assign(&g.generate(raw.row(source), target_camera)?)
                            }
                        }
                    }
                    let labels: Vec<usize> = entries.iter().map(BatchEntry::label).collect();
                    tri_sum += min_step(f, x.view(), &labels, margin, &mut opt)?.as_f64();
                    min_steps += 1;
                }
            }
        }

        let eval = evaluate(f, target, split)?;
        history.push(IterationRecord {
            iteration,
            n_clusters,
            n_noise,
            pseudo_fscore,
            map: eval.metrics.map,
            cmc1: eval.metrics.cmc1,
            cmc5: eval.metrics.cmc5,
            cmc10: eval.metrics.cmc10,
            j: eval.j,
            mean_l_div: if max_steps > 0 { div_sum / max_steps as f64 } else { f64::NAN },
            mean_l_tri: if min_steps > 0 { tri_sum / min_steps as f64 } else { f64::NAN },
            max_steps,
            min_steps,
            reused_labels,
        });
        observe(history.last().expect("just pushed"), f, g)?;
        if let Some(a) = assignment {
            previous = Some(a.labels);
        }
    }
    Ok(history)
}
