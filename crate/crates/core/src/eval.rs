//! Retrieval and clustering metrics: mAP / CMC, pairwise pseudo-label
//! f-score, and the between/within scatter ratio.

use std::collections::HashMap;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub map: f64,
    pub cmc1: f64,
    pub cmc5: f64,
    pub cmc10: f64,
    pub n_queries_evaluated: usize,
    /// Queries without any cross-camera positive in the gallery.
    pub n_queries_skipped: usize,
}

impl Metrics {
    pub fn cmc(&self, rank: usize) -> Option<f64> {
        match rank {
            1 => Some(self.cmc1),
            5 => Some(self.cmc5),
            10 => Some(self.cmc10),
            _ => None,
        }
    }
}

fn row_distance<F: Scalar>(features: &ArrayView2<'_, F>, a: usize, b: usize) -> f64 {
    features
        .row(a)
        .iter()
        .zip(features.row(b))
        .map(|(&x, &y)| {
            let d = (x - y).as_f64();
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Gallery sample indices ranked for `query`, nearest first, with gallery
/// entries of the same identity and camera as the query removed. Ties go to
/// the lower sample index.
pub fn ranked_gallery<F: Scalar>(
    features: ArrayView2<'_, F>,
    query: usize,
    gallery: &[usize],
    identities: &[usize],
    cameras: &[usize],
) -> Vec<usize> {
    let mut ranked: Vec<(f64, usize)> = gallery
        .iter()
        .filter(|&&g| !(identities[g] == identities[query] && cameras[g] == cameras[query]))
        .map(|&g| (row_distance(&features, query, g), g))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ranked.into_iter().map(|(_, g)| g).collect()
}

/// Mean average precision and CMC at ranks 1, 5 and 10 under the
/// cross-camera protocol.
pub fn map_cmc<F: Scalar>(
    features: ArrayView2<'_, F>,
    query: &[usize],
    gallery: &[usize],
    identities: &[usize],
    cameras: &[usize],
) -> Result<Metrics> {
    let n = features.nrows();
    if identities.len() != n || cameras.len() != n {
        return Err(Error::Shape(format!(
            "{} feature rows, {} identities, {} cameras",
            n,
            identities.len(),
            cameras.len()
        )));
    }
    if let Some(&bad) = query.iter().chain(gallery).find(|&&i| i >= n) {
        return Err(Error::Shape(format!("index {bad} out of range for {n} samples")));
    }

    let mut ap_sum = 0.0;
    let mut hits = [0usize; 3];
    let mut evaluated = 0usize;
    for &q in query {
        let ranked = ranked_gallery(features, q, gallery, identities, cameras);
        let mut found = 0usize;
        let mut precision_sum = 0.0;
        let mut first_hit: Option<usize> = None;
        for (rank, &g) in ranked.iter().enumerate() {
            if identities[g] == identities[q] {
                found += 1;
                precision_sum += found as f64 / (rank + 1) as f64;
                first_hit.get_or_insert(rank);
            }
        }
        let Some(first) = first_hit else { continue };
        evaluated += 1;
        ap_sum += precision_sum / found as f64;
        for (slot, k) in hits.iter_mut().zip([1usize, 5, 10]) {
            if first < k {
                *slot += 1;
            }
        }
    }

    if evaluated == 0 {
        return Err(Error::NoValidQueries);
    }
    let frac = |h: usize| h as f64 / evaluated as f64;
    Ok(Metrics {
        map: ap_sum / evaluated as f64,
        cmc1: frac(hits[0]),
        cmc5: frac(hits[1]),
        cmc10: frac(hits[2]),
        n_queries_evaluated: evaluated,
        n_queries_skipped: query.len() - evaluated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScores {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

fn pairs(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

/// Pairwise precision/recall/f-score of pseudo-labels against ground truth,
/// over all pairs of non-noise samples. Degenerate cases (no predicted or no
/// true pairs) score 0.
pub fn pairwise_fscore(pseudo: &[Option<usize>], truth: &[usize]) -> Result<PairScores> {
    if pseudo.len() != truth.len() {
        return Err(Error::Shape(format!("{} pseudo-labels for {} samples", pseudo.len(), truth.len())));
    }
    let mut by_cluster: HashMap<usize, usize> = HashMap::new();
    let mut by_identity: HashMap<usize, usize> = HashMap::new();
    let mut by_both: HashMap<(usize, usize), usize> = HashMap::new();
    for (p, &t) in pseudo.iter().zip(truth) {
        if let Some(c) = *p {
            *by_cluster.entry(c).or_default() += 1;
            *by_identity.entry(t).or_default() += 1;
            *by_both.entry((c, t)).or_default() += 1;
        }
    }
    let predicted: u64 = by_cluster.values().map(|&n| pairs(n)).sum();
    let actual: u64 = by_identity.values().map(|&n| pairs(n)).sum();
    let overlap: u64 = by_both.values().map(|&n| pairs(n)).sum();

    let zero = PairScores { precision: 0.0, recall: 0.0, fscore: 0.0 };
    if predicted == 0 || actual == 0 {
        return Ok(zero);
    }
    let precision = overlap as f64 / predicted as f64;
    let recall = overlap as f64 / actual as f64;
    if overlap == 0 {
        return Ok(PairScores { precision, recall, fscore: 0.0 });
    }
    Ok(PairScores { precision, recall, fscore: 2.0 * precision * recall / (precision + recall) })
}

/// Guards the ratio against zero within-class scatter.
pub const SCATTER_EPS: f64 = 1e-12;

/// `J = tr(S_b) / (tr(S_w) + ε)` with class-size-weighted between-class
/// scatter.
pub fn scatter_ratio<F: Scalar>(features: ArrayView2<'_, F>, identities: &[usize]) -> Result<f64> {
    let (n, d) = features.dim();
    if identities.len() != n {
        return Err(Error::Shape(format!("{} identities for {} feature rows", identities.len(), n)));
    }
    let mut classes: Vec<usize> = identities.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass(classes.len()));
    }
    let slot: HashMap<usize, usize> = classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();

    let mut sums = vec![vec![0.0; d]; classes.len()];
    let mut counts = vec![0usize; classes.len()];
    let mut total = vec![0.0; d];
    for (row, id) in features.rows().into_iter().zip(identities) {
        let s = slot[id];
        counts[s] += 1;
        for (k, &v) in row.iter().enumerate() {
            sums[s][k] += v.as_f64();
            total[k] += v.as_f64();
        }
    }
    let mean: Vec<f64> = total.iter().map(|t| t / n as f64).collect();
    let means: Vec<Vec<f64>> =
        sums.iter().zip(&counts).map(|(s, &c)| s.iter().map(|v| v / c as f64).collect()).collect();

    let mut within = 0.0;
    for (row, id) in features.rows().into_iter().zip(identities) {
        let mu = &means[slot[id]];
        within += row.iter().zip(mu).map(|(&v, m)| (v.as_f64() - m).powi(2)).sum::<f64>();
    }
    let between: f64 = means
        .iter()
        .zip(&counts)
        .map(|(mu, &c)| c as f64 * mu.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .sum();
    Ok(between / (within + SCATTER_EPS))
}
