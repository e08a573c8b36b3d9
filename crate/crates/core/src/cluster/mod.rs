//! Pseudo-label prediction in the target domain.
//!
//! Features → Euclidean distances → k-reciprocal re-ranking → quantile
//! density threshold → DBSCAN → cluster centers.

mod dbscan;
mod distance;
mod rerank;

use ndarray::{Array2, ArrayView2};

pub use dbscan::dbscan;
pub use distance::{pairwise_euclidean, DistanceMatrix};
pub use rerank::k_reciprocal_rerank;

use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterParams {
    /// Neighborhood size of the k-reciprocal sets.
    pub k1: usize,
    /// Neighborhood size of the local query expansion.
    pub k2: usize,
    /// Weight of the original distance in the blend.
    pub lambda_rr: f64,
    /// Quantile of the re-ranked off-diagonal distances used as DBSCAN `eps`.
    pub eps_quantile: f64,
    /// Minimum neighborhood size of a core point, the point itself included.
    pub min_pts: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self { k1: 20, k2: 6, lambda_rr: 0.3, eps_quantile: 0.005, min_pts: 4 }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if self.k1 == 0 || self.k2 == 0 || self.k2 > self.k1 {
            return Err(Error::Config(format!("need 1 <= k2 <= k1, got k1 = {}, k2 = {}", self.k1, self.k2)));
        }
        if !(0.0..=1.0).contains(&self.lambda_rr) {
            return Err(Error::Config(format!("lambda_rr must lie in [0, 1], got {}", self.lambda_rr)));
        }
        if !(self.eps_quantile > 0.0 && self.eps_quantile < 1.0) {
            return Err(Error::Config(format!("eps_quantile must lie in (0, 1), got {}", self.eps_quantile)));
        }
        if self.min_pts < 2 {
            return Err(Error::Config(format!("min_pts must be at least 2, got {}", self.min_pts)));
        }
        Ok(())
    }
}

/// Pseudo-labels (`None` = noise) with per-cluster centers and sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment<F> {
    pub labels: Vec<Option<usize>>,
    pub centers: Array2<F>,
    pub sizes: Vec<usize>,
}

impl<F: Scalar> ClusterAssignment<F> {
    pub fn n_clusters(&self) -> usize {
        self.sizes.len()
    }

    pub fn n_noise(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    /// Sample indices of each cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.n_clusters()];
        for (i, l) in self.labels.iter().enumerate() {
            if let Some(c) = l {
                members[*c].push(i);
            }
        }
        members
    }
}

/// Lower-index quantile: the entry at position `⌊ρ·(m − 1)⌋` of the sorted
/// values.
pub fn quantile_lower<F: Scalar>(values: &[F], rho: f64) -> Option<F> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    let idx = ((rho * (v.len() - 1) as f64).floor() as usize).min(v.len() - 1);
    let (_, nth, _) = v.select_nth_unstable_by(idx, |a, b| a.partial_cmp(b).unwrap());
    Some(*nth)
}

/// DBSCAN radius as the `rho` quantile of the off-diagonal distances.
pub fn select_eps<F: Scalar>(d: &DistanceMatrix<F>, rho: f64) -> Result<F> {
    if d.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: d.len() });
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Config(format!("eps quantile must lie in (0, 1), got {rho}")));
    }
    Ok(quantile_lower(&d.upper_triangle(), rho).expect("at least one pair"))
}

/// Mean feature of every cluster and the cluster sizes. Noise is ignored.
///
/// Members are summed in a canonical (sorted) order, so the result does not
/// depend on how samples are ordered.
pub fn cluster_centers<F: Scalar>(features: ArrayView2<'_, F>, labels: &[Option<usize>]) -> Result<(Array2<F>, Vec<usize>)> {
    if labels.len() != features.nrows() {
        return Err(Error::Shape(format!("{} labels for {} feature rows", labels.len(), features.nrows())));
    }
    let n_clusters = labels.iter().flatten().max().map_or(0, |&m| m + 1);
    let mut rows: Vec<Vec<Vec<F>>> = vec![Vec::new(); n_clusters];
    for (row, label) in features.rows().into_iter().zip(labels) {
        if let Some(c) = label {
            rows[*c].push(row.to_vec());
        }
    }
    let mut centers = Array2::zeros((n_clusters, features.ncols()));
    let mut sizes = Vec::with_capacity(n_clusters);
    for (c, members) in rows.iter_mut().enumerate() {
        if members.is_empty() {
            return Err(Error::EmptyCluster(c));
        }
        members.sort_by(|a, b| {
            a.iter().zip(b).map(|(x, y)| x.as_f64().total_cmp(&y.as_f64())).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        });
        let count = F::lit(members.len() as f64);
        for (k, v) in centers.row_mut(c).iter_mut().enumerate() {
            let mut sum = F::zero();
            for m in members.iter() {
                sum += m[k];
            }
            *v = sum / count;
        }
        sizes.push(members.len());
    }
    Ok((centers, sizes))
}

/// Full pseudo-labeling pipeline on a feature matrix.
pub fn assign_pseudo_labels<F: Scalar>(features: ArrayView2<'_, F>, p: &ClusterParams) -> Result<ClusterAssignment<F>> {
    p.validate()?;
    let d = pairwise_euclidean(features);
    let reranked = k_reciprocal_rerank(&d, p)?;
    let eps = select_eps(&reranked, p.eps_quantile)?;
    let labels = dbscan(&reranked, eps, p.min_pts);
    let (centers, sizes) = cluster_centers(features, &labels)?;
    Ok(ClusterAssignment { labels, centers, sizes })
}
