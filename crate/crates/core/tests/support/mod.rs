//! Independent reference implementations and randomized instances shared by
//! the integration tests and the acceptance suite.
//!
//! The oracles favor a literal reading of each definition over speed: dense
//! matrices, full sorts, transitive closures.

#![allow(dead_code)]

use adcluster::augment::{diversity_objective, loss_recon, GenBatch};
use adcluster::nncore::{cross_entropy, grad_check, triplet_batch_hard, GradCheck};
use adcluster::{ClassifierHead, Encoder, Parameters, StyleGenerator};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRAD_STEP: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
}

pub fn euclidean(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| {
        x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    })
}

// ---------------------------------------------------------------- re-ranking

/// Ranking of row `i`: itself first, then everyone else by distance with ties
/// broken by index.
fn ranking(d: &Array2<f64>, i: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..d.nrows()).filter(|&j| j != i).collect();
    others.sort_by(|&a, &b| d[[i, a]].partial_cmp(&d[[i, b]]).unwrap().then(a.cmp(&b)));
    std::iter::once(i).chain(others).collect()
}

fn knn(d: &Array2<f64>, i: usize, k: usize) -> Vec<usize> {
    ranking(d, i)[..=k].to_vec()
}

fn reciprocal(d: &Array2<f64>, i: usize, k: usize) -> Vec<usize> {
    knn(d, i, k).into_iter().filter(|&j| knn(d, j, k).contains(&i)).collect()
}

/// Dense transcription of k-reciprocal re-ranking.
pub fn rerank_oracle(d: &Array2<f64>, k1: usize, k2: usize, lambda: f64) -> Array2<f64> {
    let n = d.nrows();
    let half = k1.div_ceil(2);

    let mut v = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let r = reciprocal(d, i, k1);
        let mut star: Vec<usize> = r.clone();
        for &j in &r {
            let rj = reciprocal(d, j, half);
            let common = rj.iter().filter(|c| r.contains(c)).count() as f64;
            if common >= 2.0 / 3.0 * rj.len() as f64 {
                star.extend(rj);
            }
        }
        star.sort();
        star.dedup();
        let row_max = d.row(i).iter().cloned().fold(0.0, f64::max);
        let mut total = 0.0;
        for &j in &star {
            let w = (-(d[[i, j]] / row_max).powi(2)).exp();
            v[[i, j]] = w;
            total += w;
        }
        for &j in &star {
            v[[i, j]] /= total;
        }
    }

    if k2 > 1 {
        let mut q = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for &j in &ranking(d, i)[..k2] {
                for c in 0..n {
                    q[[i, c]] += v[[j, c]];
                }
            }
            for c in 0..n {
                q[[i, c]] /= k2 as f64;
            }
        }
        v = q;
    }

    let mut out = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let (mut mins, mut maxs) = (0.0, 0.0);
            for c in 0..n {
                mins += v[[i, c]].min(v[[j, c]]);
                maxs += v[[i, c]].max(v[[j, c]]);
            }
            let jaccard = 1.0 - mins / maxs;
            out[[i, j]] = (1.0 - lambda) * jaccard + lambda * d[[i, j]];
        }
    }
    
    Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { 0.5 * (out[[i, j]] + out[[j, i]]) })
}

// -------------------------------------------------------------------- DBSCAN

/// Partition from the density-reachability closure: core points within `eps`
/// of each other are connected; components are numbered by their smallest
/// member; a border point takes the smallest component id among the cores
/// that reach it.
pub fn dbscan_oracle(d: &Array2<f64>, eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = d.nrows();
    let near = |i: usize, j: usize| d[[i, j]] <= eps;
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();

    // Transitive closure over core-core adjacency.
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            reach[i][j] = core[i] && core[j] && near(i, j);
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }

    let mut component = vec![None; n];
    let mut next = 0;
    for i in 0..n {
        if core[i] && component[i].is_none() {
            for j in 0..n {
                if reach[i][j] {
                    component[j] = Some(next);
                }
            }
            next += 1;
        }
    }
    (0..n)
        .map(|i| {
            if core[i] {
                component[i]
            } else {
                (0..n).filter(|&j| core[j] && near(i, j)).filter_map(|j| component[j]).min()
            }
        })
        .collect()
}

// ------------------------------------------------------------------ mAP / CMC

pub struct BruteMetrics {
    pub map: f64,
    pub cmc: [f64; 3],
    pub evaluated: usize,
}

/// Average precision by enumerating the full ranked gallery of every query.
pub fn map_cmc_oracle(
    features: &Array2<f64>,
    query: &[usize],
    gallery: &[usize],
    ids: &[usize],
    cams: &[usize],
) -> Option<BruteMetrics> {
    let dist = |a: usize, b: usize| {
        features.row(a).iter().zip(features.row(b)).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    let (mut ap_sum, mut hits, mut evaluated) = (0.0, [0usize; 3], 0usize);
    for &q in query {
        let mut list: Vec<usize> = gallery.iter().copied().filter(|&g| !(ids[g] == ids[q] && cams[g] == cams[q])).collect();
        list.sort_by(|&a, &b| dist(q, a).partial_cmp(&dist(q, b)).unwrap().then(a.cmp(&b)));
        let relevant: Vec<bool> = list.iter().map(|&g| ids[g] == ids[q]).collect();
        let n_pos = relevant.iter().filter(|&&r| r).count();
        if n_pos == 0 {
            continue;
        }
        evaluated += 1;
        let mut found = 0;
        let mut ap = 0.0;
        for (rank, &r) in relevant.iter().enumerate() {
            if r {
                found += 1;
                ap += found as f64 / (rank + 1) as f64;
            }
        }
        ap_sum += ap / n_pos as f64;
        let first = relevant.iter().position(|&r| r).unwrap();
        for (slot, k) in [1, 5, 10].into_iter().enumerate() {
            if first < k {
                hits[slot] += 1;
            }
        }
    }
    (evaluated > 0).then(|| BruteMetrics {
        map: ap_sum / evaluated as f64,
        cmc: hits.map(|h| h as f64 / evaluated as f64),
        evaluated,
    })
}

// --------------------------------------------------------- gradient instances

fn split_at(p: &[f64], n: usize) -> (&[f64], &[f64]) {
    p.split_at(n)
}

/// Classification loss through encoder and head, w.r.t. both parameter sets.
pub fn check_cls(seed: u64) -> GradCheck {
    let mut r = rng(seed);
    let enc = Encoder::<f64>::random(5, 7, 4, &mut r);
    let head = ClassifierHead::<f64>::random(4, 3, &mut r);
    let x = uniform_matrix(&mut r, 6, 5, 1.0);
    let labels: Vec<usize> = (0..6).map(|i| i % 3).collect();
    let n_enc = enc.n_params();
    let mut params = enc.to_flat();
    params.extend(head.to_flat());
    grad_check(
        |p| {
            let (pe, ph) = split_at(p, n_enc);
            let mut e = enc.clone();
            e.set_flat(pe);
            let mut h = head.clone();
            h.set_flat(ph);
            let (feats, cache) = e.forward(x.view()).unwrap();
            let cls = cross_entropy(&h, feats.view(), &labels).unwrap();
            let (ge, _) = e.backward(&cache, cls.d_features.view()).unwrap();
            let mut g = ge.to_flat();
            g.extend(cls.d_head.to_flat());
            (cls.loss, g)
        },
        &params,
        GRAD_STEP,
    )
}

/// Batch-hard triplet loss through the encoder. Features are continuous
/// random draws, so hardest positives and negatives are unique.
///
/// The loss only sees feature differences, so the output bias has an exact
/// zero gradient; a relative error against finite differences is then pure
/// rounding noise. The relative check covers every other encoder parameter
/// and the second value is the largest analytic output-bias gradient.
pub fn check_triplet(seed: u64) -> (GradCheck, f64) {
    let mut r = rng(seed);
    let enc = Encoder::<f64>::random(5, 7, 4, &mut r);
    let x = uniform_matrix(&mut r, 8, 5, 1.0);
    let labels = [0, 0, 1, 1, 2, 2, 0, 1];
    // A margin large enough that every hinge is active.
    let margin = 5.0;
    let eval = |e: &Encoder<f64>| {
        let (feats, cache) = e.forward(x.view()).unwrap();
        let (loss, d) = triplet_batch_hard(feats.view(), &labels, margin).unwrap();
        let (ge, _) = e.backward(&cache, d.view()).unwrap();
        (loss, ge)
    };
    let n_free = enc.n_params() - enc.b2.len();
    let full = enc.to_flat();
    let check = grad_check(
        |p| {
            let mut e = enc.clone();
            let mut all = p.to_vec();
            all.extend_from_slice(&full[n_free..]);
            e.set_flat(&all);
            let (loss, ge) = eval(&e);
            (loss, ge.to_flat()[..n_free].to_vec())
        },
        &full[..n_free],
        GRAD_STEP,
    );
    let (_, ge) = eval(&enc);
    let bias = ge.b2.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    (check, bias)
}

pub fn random_generator(r: &mut ChaCha8Rng, k: usize, dim: usize) -> StyleGenerator<f64> {
    let mut g = StyleGenerator::identity(k, dim);
    let mut flat = g.to_flat();
    for v in &mut flat {
        *v += r.random_range(-0.3..0.3);
    }
    g.set_flat(&flat);
    g
}

/// Diversity loss through `f ∘ g`, w.r.t. the generator.
pub fn check_div(seed: u64) -> GradCheck {
    let mut r = rng(seed);
    let (k, dim) = (3, 4);
    let enc = Encoder::<f64>::random(dim, 6, 3, &mut r);
    let g = random_generator(&mut r, k, dim);
    let cameras: Vec<usize> = (0..5).map(|_| r.random_range(0..k)).collect();
    let batch = GenBatch {
        raw: uniform_matrix(&mut r, 5, dim, 1.0),
        targets: cameras.iter().map(|&c| (c + r.random_range(1..k)) % k).collect(),
        cameras,
        labels: (0..5).map(|i| Some(i % 2)).collect(),
    };
    let centers = uniform_matrix(&mut r, 2, 3, 0.5);
    let lambda = r.random_range(0.1..2.0);
    grad_check(
        |p| {
            let mut gg = g.clone();
            gg.set_flat(p);
            let (loss, grad, _) = diversity_objective(&enc, &gg, &batch, centers.view(), lambda).unwrap();
            (loss, grad.to_flat())
        },
        &g.to_flat(),
        GRAD_STEP,
    )
}

/// Reconstruction loss through the generator.
pub fn check_recon(seed: u64) -> GradCheck {
    let mut r = rng(seed);
    let (k, dim) = (3, 4);
    let g = random_generator(&mut r, k, dim);
    let raw = uniform_matrix(&mut r, 6, dim, 1.0);
    let cameras: Vec<usize> = (0..6).map(|i| i % k).collect();
    grad_check(
        |p| {
            let mut gg = g.clone();
            gg.set_flat(p);
            let (loss, grad) = loss_recon(&gg, raw.view(), &cameras).unwrap();
            (loss, grad.to_flat())
        },
        &g.to_flat(),
        GRAD_STEP,
    )
}

/// Random points in a few loose blobs so that DBSCAN instances contain
/// clusters, borders and noise at once.
pub fn blob_points(r: &mut ChaCha8Rng, n: usize, dim: usize) -> Array2<f64> {
    let n_blobs = r.random_range(2..6);
    let centers: Vec<Array1<f64>> = (0..n_blobs).map(|_| Array1::from_shape_fn(dim, |_| r.random_range(-5.0..5.0))).collect();
    Array2::from_shape_fn((n, dim), |(i, j)| {
        let spread = if i % 7 == 0 { 4.0 } else { 1.0 };
        centers[i % n_blobs][j] + r.random_range(-spread..spread)
    })
}
