//! k-reciprocal re-ranking of a distance matrix.
//!
//! Each sample is encoded as a sparse, Gaussian-weighted indicator over its
//! expanded k-reciprocal neighborhood; encodings are smoothed over the `k2`
//! nearest neighbors and compared with the Jaccard distance, which is then
//! blended with the original distance.

use ndarray::Array2;

use super::{ClusterParams, DistanceMatrix};
use crate::error::{Error, Result};
use crate::Scalar;

/// The `k + 1` nearest samples of every row (the row itself first), ties by
/// ascending index.
fn nearest_lists<F: Scalar>(d: &DistanceMatrix<F>, k: usize) -> Vec<Vec<usize>> {
    let n = d.len();
    (0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let by_distance = |a: &usize, b: &usize| d.get(i, *a).partial_cmp(&d.get(i, *b)).unwrap().then(a.cmp(b));
            if k < others.len() {
                others.select_nth_unstable_by(k, by_distance);
                others.truncate(k);
            }
            others.sort_by(by_distance);
            let mut list = Vec::with_capacity(k + 1);
            list.push(i);
            list.extend(others);
            list
        })
        .collect()
}

/// `{ j ∈ kNN(i, k) : i ∈ kNN(j, k) }`, where `kNN(·, k)` is the first `k + 1`
/// entries of the ranking.
fn k_reciprocal(ranks: &[Vec<usize>], i: usize, k: usize) -> Vec<usize> {
    ranks[i][..=k].iter().copied().filter(|&j| ranks[j][..=k].contains(&i)).collect()
}

/// Re-ranked distance `(1 − λ)·d_J + λ·d`, symmetrized.
pub fn k_reciprocal_rerank<F: Scalar>(d: &DistanceMatrix<F>, p: &ClusterParams) -> Result<DistanceMatrix<F>> {
    p.validate()?;
    let n = d.len();
    if n <= p.k1 {
        return Err(Error::TooFewForRerank { n, k1: p.k1 });
    }
    // Every sample is indistinguishable from every other; neighbor lists would
    // only reflect index order.
    if d.upper_triangle().iter().all(|&v| v == F::zero()) {
        return Ok(d.clone());
    }

    let k_half = p.k1.div_ceil(2);
    let ranks = nearest_lists(d, p.k1);

    // Gaussian weights use squared distances normalized by the row maximum.
    let row_max: Vec<F> = (0..n)
        .map(|i| (0..n).map(|j| d.get(i, j)).fold(F::zero(), F::max))
        .collect();
    let weight = |i: usize, j: usize| {
        let m = row_max[i];
        if m > F::zero() {
            let r = d.get(i, j) / m;
            (-(r * r)).exp()
        } else {
            F::one()
        }
    };

    let reciprocal_half: Vec<Vec<usize>> = (0..n).map(|j| k_reciprocal(&ranks, j, k_half)).collect();
    let two_thirds = F::lit(2.0 / 3.0);

    // Sparse encodings: sorted (column, value) pairs per row.
    let mut encodings: Vec<Vec<(usize, F)>> = Vec::with_capacity(n);
    for i in 0..n {
        let base = k_reciprocal(&ranks, i, p.k1);
        let mut expanded = base.clone();
        for &j in &base {
            let candidate = &reciprocal_half[j];
            let overlap = candidate.iter().filter(|c| base.contains(c)).count();
            if F::lit(overlap as f64) >= two_thirds * F::lit(candidate.len() as f64) {
                expanded.extend_from_slice(candidate);
            }
        }
        expanded.sort_unstable();
        expanded.dedup();

        let weights: Vec<F> = expanded.iter().map(|&j| weight(i, j)).collect();
        let total: F = weights.iter().copied().sum();
        encodings.push(expanded.iter().zip(weights).map(|(&j, w)| (j, w / total)).collect());
    }

    // Local query expansion over the k2 nearest (self included).
    if p.k2 > 1 {
        let inv_k2 = F::one() / F::lit(p.k2 as f64);
        let mut acc = vec![F::zero(); n];
        let mut member = vec![false; n];
        let mut expanded = Vec::with_capacity(n);
        for i in 0..n {
            let mut touched: Vec<usize> = Vec::new();
            for &j in &ranks[i][..p.k2] {
                for &(col, v) in &encodings[j] {
                    if !member[col] {
                        member[col] = true;
                        touched.push(col);
                    }
                    acc[col] += v;
                }
            }
            touched.sort_unstable();
            let row: Vec<(usize, F)> = touched
                .iter()
                .map(|&col| {
                    let v = acc[col] * inv_k2;
                    acc[col] = F::zero();
                    member[col] = false;
                    (col, v)
                })
                .collect();
            expanded.push(row);
        }
        encodings = expanded;
    }

    // Jaccard distance through an inverted index over encoding columns.
    let mut inverted: Vec<Vec<(usize, F)>> = vec![Vec::new(); n];
    for (row, enc) in encodings.iter().enumerate() {
        for &(col, v) in enc {
            inverted[col].push((row, v));
        }
    }
    let mass: Vec<F> = encodings.iter().map(|e| e.iter().map(|&(_, v)| v).sum()).collect();

    let lambda = F::lit(p.lambda_rr);
    let keep = F::one() - lambda;
    let mut out = Array2::<F>::zeros((n, n));
    let mut shared = vec![F::zero(); n];
    for i in 0..n {
        for &(col, vi) in &encodings[i] {
            for &(j, vj) in &inverted[col] {
                shared[j] += vi.min(vj);
            }
        }
        for j in 0..n {
            let s = shared[j];
            let union = mass[i] + mass[j] - s;
            let jaccard = if union > F::zero() { F::one() - s / union } else { F::zero() };
            out[[i, j]] = keep * jaccard + lambda * d.get(i, j);
            shared[j] = F::zero();
        }
    }

    let half = F::lit(0.5);
    for i in 0..n {
        out[[i, i]] = F::zero();
        for j in (i + 1)..n {
            let v = (out[[i, j]] + out[[j, i]]) * half;
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    Ok(DistanceMatrix::new_unchecked(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::pairwise_euclidean;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(k1: usize, k2: usize, lambda_rr: f64) -> ClusterParams {
        ClusterParams { k1, k2, lambda_rr, ..ClusterParams::default() }
    }

    fn random_matrix(seed: u64, n: usize) -> DistanceMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = Array2::from_shape_fn((n, 4), |_| rng.random_range(-1.0..1.0));
        pairwise_euclidean(f.view())
    }

    #[test]
    fn lambda_one_is_identity() {
        let d = random_matrix(1, 30);
        let r = k_reciprocal_rerank(&d, &params(6, 3, 1.0)).unwrap();
        assert_eq!(r, d);
    }

    #[test]
    fn output_is_a_distance_matrix() {
        let d = random_matrix(2, 40);
        let r = k_reciprocal_rerank(&d, &params(8, 3, 0.3)).unwrap();
        DistanceMatrix::new(r.into_inner()).unwrap();
    }

    #[test]
    fn too_few_samples() {
        let d = random_matrix(3, 5);
        assert_eq!(k_reciprocal_rerank(&d, &params(5, 2, 0.3)).unwrap_err(), Error::TooFewForRerank { n: 5, k1: 5 });
    }

    #[test]
    fn reciprocal_sets_contain_self() {
        let d = random_matrix(4, 20);
        let ranks = nearest_lists(&d, 5);
        for i in 0..20 {
            assert_eq!(ranks[i][0], i);
            assert_eq!(ranks[i].len(), 6);
            assert!(k_reciprocal(&ranks, i, 5).contains(&i));
        }
    }
}
