use std::collections::VecDeque;

use super::DistanceMatrix;
use crate::Scalar;

/// Density-based clustering on a precomputed distance matrix.
///
/// A point is core when at least `min_pts` points (itself included) lie
/// within `eps` (inclusive). Clusters are grown from unlabeled core points in
/// ascending index order; a border point joins the first cluster that reaches
/// it. Everything else is noise (`None`).
pub fn dbscan<F: Scalar>(d: &DistanceMatrix<F>, eps: F, min_pts: usize) -> Vec<Option<usize>> {
    let n = d.len();
    let neighbors: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| d.get(i, j) <= eps).collect()).collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut next = 0usize;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if !core[start] || labels[start].is_some() {
            continue;
        }
        let cluster = next;
        next += 1;
        labels[start] = Some(cluster);
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbors[p] {
                if labels[q].is_none() {
                    labels[q] = Some(cluster);
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
    }
    labels
}
