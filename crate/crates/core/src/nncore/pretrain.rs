use ndarray::Array2;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{cross_entropy, triplet_batch_hard, ClassifierHead, Encoder, Sgd};
use crate::error::{Error, Result};
use crate::synthdata::Dataset;
use crate::Scalar;

/// Hyper-parameters of the supervised source stage.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainHyper {
    /// Triplet margin `m`, shared with the target stage.
    pub margin: f64,
    /// Source batch size `n_s`; batches hold `n_s / source_instances` identities.
    pub n_s: usize,
    pub source_instances: usize,
    pub epochs: usize,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self { margin: 0.5, n_s: 32, source_instances: 4, epochs: 30 }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return Err(Error::Config("margin must be positive".into()));
        }
        if self.n_s < 2 || self.source_instances < 2 {
            return Err(Error::Config("batch sizes must be at least 2".into()));
        }
        if self.n_s / self.source_instances < 2 {
            return Err(Error::Config("n_s must cover at least two identities".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainReport {
    /// Mean `L_cls + L_tri` over the batches of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Triplet loss over the whole source set before and after training.
    pub initial_triplet: f64,
    pub final_triplet: f64,
}

/// Identity-balanced batches: shuffled identities in groups of `p`, each
/// contributing `k` samples (drawn with replacement only when an identity has
/// fewer than `k`). Groups with fewer than two identities are dropped.
pub fn pk_batches<R: Rng + ?Sized>(labels: &[usize], p: usize, k: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let n_labels = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); n_labels];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let mut ids: Vec<usize> = (0..n_labels).filter(|&l| !members[l].is_empty()).collect();
    ids.shuffle(rng);

    ids.chunks(p.max(1))
        .filter(|chunk| chunk.len() >= 2)
        .map(|chunk| {
            let mut batch = Vec::with_capacity(chunk.len() * k);
            for &id in chunk {
                let pool = &members[id];
                if pool.len() >= k {
                    batch.extend(pool.choose_multiple(rng, k).copied());
                } else {
                    batch.extend((0..k).map(|_| pool[rng.random_range(0..pool.len())]));
                }
            }
            batch
        })
        .collect()
}

fn to_scalar<F: Scalar>(m: &Array2<f64>) -> Array2<F> {
    m.mapv(F::lit)
}

/// Whole-set batch-hard triplet loss of the encoder on a labeled dataset.
pub(crate) fn dataset_triplet<F: Scalar>(enc: &Encoder<F>, ds: &Dataset, margin: F) -> Result<f64> {
    let feats = enc.embed(to_scalar::<F>(&ds.raw_matrix()).view())?;
    let (loss, _) = triplet_batch_hard(feats.view(), &ds.identities(), margin)?;
    Ok(loss.as_f64())
}

/// Supervised training on the labeled source domain with
/// `L_src = L_cls + L_tri` over identity-balanced mini-batches.
pub fn pretrain_source<F: Scalar>(
    enc: &mut Encoder<F>,
    head: &mut ClassifierHead<F>,
    source: &Dataset,
    hyper: &TrainHyper,
    enc_opt: &mut Sgd<F>,
    head_opt: &mut Sgd<F>,
    seed: u64,
) -> Result<PretrainReport> {
    hyper.validate()?;
    source.validate()?;
    if head.n_classes() != source.n_identities {
        return Err(Error::Shape(format!(
            "classifier has {} classes, source has {} identities",
            head.n_classes(),
            source.n_identities
        )));
    }
    let margin = F::lit(hyper.margin);
    let raw = to_scalar::<F>(&source.raw_matrix());
    let labels = source.identities();
    let initial_triplet = dataset_triplet(enc, source, margin)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = hyper.n_s / hyper.source_instances;
    let mut epoch_losses = Vec::with_capacity(hyper.epochs);
    for _ in 0..hyper.epochs {
        let batches = pk_batches(&labels, p, hyper.source_instances, &mut rng);
        let mut total = 0.0;
        for batch in &batches {
            let x = raw.select(ndarray::Axis(0), batch);
            let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let (feats, cache) = enc.forward(x.view())?;
            let cls = cross_entropy(head, feats.view(), &y)?;
            let (tri, d_tri) = triplet_batch_hard(feats.view(), &y, margin)?;
            let d_feats = cls.d_features + d_tri;
            let (d_enc, _) = enc.backward(&cache, d_feats.view())?;
            enc_opt.step(enc, &d_enc)?;
            head_opt.step(head, &cls.d_head)?;
            total += (cls.loss + tri).as_f64();
        }
        epoch_losses.push(if batches.is_empty() { 0.0 } else { total / batches.len() as f64 });
    }

    let final_triplet = dataset_triplet(enc, source, margin)?;
    Ok(PretrainReport { epoch_losses, initial_triplet, final_triplet })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::map_cmc;
    use crate::synthdata::{generate_dataset, split_query_gallery, SynthConfig};

    #[test]
    fn pk_batches_are_balanced() {
        let labels: Vec<usize> = (0..30).map(|i| i % 6).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batches = pk_batches(&labels, 3, 4, &mut rng);
        assert_eq!(batches.len(), 2);
        for b in &batches {
            assert_eq!(b.len(), 12);
            let mut ids: Vec<usize> = b.iter().map(|&i| labels[i]).collect();
            ids.sort();
            ids.dedup();
            assert_eq!(ids.len(), 3);
        }
    }

    #[test]
    fn separable_source_reaches_perfect_rank1() {
        let cfg = SynthConfig {
            n_identities_source: 20,
            within_identity_noise: 0.0,
            camera_style_strength: 0.0,
            ..SynthConfig::default()
        };
        let (source, _) = generate_dataset(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut enc = Encoder::<f64>::random(16, 32, 16, &mut rng);
        let mut head = ClassifierHead::random(16, 20, &mut rng);
        let hyper = TrainHyper { epochs: 10, ..TrainHyper::default() };
        let mut eo = Sgd::new(0.01, 0.9).unwrap();
        let mut ho = Sgd::new(0.01, 0.9).unwrap();
        let report = pretrain_source(&mut enc, &mut head, &source, &hyper, &mut eo, &mut ho, 2).unwrap();
        assert!(report.epoch_losses.iter().all(|l| l.is_finite()));
        assert!(report.final_triplet <= report.initial_triplet);

        let split = split_query_gallery(&source, 3).unwrap();
        let feats = enc.embed(source.raw_matrix().view()).unwrap();
        let m = map_cmc(feats.view(), &split.query, &split.gallery, &source.identities(), &source.cameras()).unwrap();
        assert_eq!(m.cmc1, 1.0);
    }
}
