use ndarray::{Array2, ArrayView2, Axis};

use super::ClassifierHead;
use crate::error::{Error, Result};
use crate::Scalar;

/// Value and gradients of the softmax cross-entropy.
#[derive(Debug, Clone)]
pub struct ClsLoss<F> {
    pub loss: F,
    pub d_features: Array2<F>,
    pub d_head: ClassifierHead<F>,
}

/// Mean negative log-probability of the true class under a softmax head.
pub fn cross_entropy<F: Scalar>(
    head: &ClassifierHead<F>,
    features: ArrayView2<'_, F>,
    labels: &[usize],
) -> Result<ClsLoss<F>> {
    let n = features.nrows();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {} feature rows", labels.len(), n)));
    }
    if features.ncols() != head.feat_dim() {
        return Err(Error::Shape(format!(
            "head expects {} feature columns, got {}",
            head.feat_dim(),
            features.ncols()
        )));
    }
    let m = head.n_classes();
    if let Some(&label) = labels.iter().find(|&&l| l >= m) {
        return Err(Error::LabelOutOfRange { label, n_classes: m });
    }
    if n == 0 {
        return Ok(ClsLoss { loss: F::zero(), d_features: features.to_owned(), d_head: head.zeros_like() });
    }

    let inv_n = F::one() / F::lit(n as f64);
    let mut probs = features.dot(&head.w) + &head.b;
    let mut loss = F::zero();
    for (mut row, &y) in probs.rows_mut().into_iter().zip(labels) {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        row.mapv_inplace(|z| (z - max).exp());
        let total: F = row.sum();
        loss += total.ln() - row[y].ln();
        row.mapv_inplace(|p| p / total);
    }
    // d logits = (softmax - onehot) / n
    for (mut row, &y) in probs.rows_mut().into_iter().zip(labels) {
        row[y] -= F::one();
        row.mapv_inplace(|v| v * inv_n);
    }
    let d_head = ClassifierHead { w: features.t().dot(&probs), b: probs.sum_axis(Axis(0)) };
    let d_features = probs.dot(&head.w.t());
    Ok(ClsLoss { loss: loss * inv_n, d_features, d_head })
}

/// Euclidean distance matrix between the rows of `features`.
pub fn pairwise_distances<F: Scalar>(features: ArrayView2<'_, F>) -> Array2<F> {
    let n = features.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let s: F = features.row(i).iter().zip(features.row(j)).map(|(&a, &b)| (a - b) * (a - b)).sum();
            let v = s.sqrt();
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

/// Batch-hard triplet loss with every positive and the hardest negative.
///
/// For each anchor with at least one positive and one negative, the hinge
/// `max(0, m + d(a, p) - d(a, n*))` is summed over all positives `p`, where
/// `n*` is the nearest differently-labeled sample (lowest index on ties).
/// The result is averaged over those anchors. The hinge kink and
/// zero-length distance directions contribute a zero subgradient.
pub fn triplet_batch_hard<F: Scalar>(
    features: ArrayView2<'_, F>,
    labels: &[usize],
    margin: F,
) -> Result<(F, Array2<F>)> {
    let n = features.nrows();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {} feature rows", labels.len(), n)));
    }
    if labels.iter().all(|&l| Some(&l) == labels.first()) {
        return Err(Error::SingleLabel);
    }

    let dist = pairwise_distances(features);
    let mut grad = Array2::<F>::zeros(features.dim());
    let mut loss = F::zero();
    let mut anchors = 0usize;

    // Adds the gradient of +d(a, b) w.r.t. rows a and b.
    let push = |grad: &mut Array2<F>, a: usize, b: usize, sign: F| {
        let d = dist[[a, b]];
        if d > F::zero() {
            for k in 0..features.ncols() {
                let u = sign * (features[[a, k]] - features[[b, k]]) / d;
                grad[[a, k]] += u;
                grad[[b, k]] -= u;
            }
        }
    };

    for a in 0..n {
        let mut hardest: Option<usize> = None;
        for j in 0..n {
            if labels[j] != labels[a] && hardest.is_none_or(|h| dist[[a, j]] < dist[[a, h]]) {
                hardest = Some(j);
            }
        }
        let Some(neg) = hardest else { continue };
        let positives: Vec<usize> = (0..n).filter(|&j| j != a && labels[j] == labels[a]).collect();
        if positives.is_empty() {
            continue;
        }
        anchors += 1;
        for p in positives {
            let hinge = margin + dist[[a, p]] - dist[[a, neg]];
            if hinge > F::zero() {
                loss += hinge;
                push(&mut grad, a, p, F::one());
                push(&mut grad, a, neg, -F::one());
            }
        }
    }

    if anchors == 0 {
        return Ok((F::zero(), grad));
    }
    let scale = F::one() / F::lit(anchors as f64);
    grad.mapv_inplace(|g| g * scale);
    Ok((loss * scale, grad))
}
