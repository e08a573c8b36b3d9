use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::Scalar;

/// Symmetric, non-negative, zero-diagonal matrix of pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<F> {
    d: Array2<F>,
}

impl<F: Scalar> DistanceMatrix<F> {
    /// Validates and wraps a square matrix.
    pub fn new(d: Array2<F>) -> Result<Self> {
        let (r, c) = d.dim();
        if r != c {
            return Err(Error::Shape(format!("distance matrix is {r}x{c}")));
        }
        for i in 0..r {
            if d[[i, i]] != F::zero() {
                return Err(Error::Shape(format!("diagonal entry {i} is not zero")));
            }
            for j in (i + 1)..r {
                let v = d[[i, j]];
                if !(v.is_finite() && v >= F::zero()) || v != d[[j, i]] {
                    return Err(Error::Shape(format!("entry ({i}, {j}) is negative, non-finite or asymmetric")));
                }
            }
        }
        Ok(Self { d })
    }

    /// Wraps a matrix the caller has built to satisfy the invariants.
    pub(crate) fn new_unchecked(d: Array2<F>) -> Self {
        debug_assert!(d.nrows() == d.ncols());
        Self { d }
    }

    pub fn len(&self) -> usize {
        self.d.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> F {
        self.d[[i, j]]
    }

    pub fn view(&self) -> ArrayView2<'_, F> {
        self.d.view()
    }

    pub fn into_inner(self) -> Array2<F> {
        self.d
    }

    /// Off-diagonal upper-triangle entries in row-major order.
    pub fn upper_triangle(&self) -> Vec<F> {
        let n = self.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(self.d[[i, j]]);
            }
        }
        out
    }

    /// Same matrix with every entry multiplied by `factor > 0`.
    pub fn scaled(&self, factor: F) -> Self {
        Self { d: self.d.mapv(|v| v * factor) }
    }
}

/// Euclidean distances between feature rows.
pub fn pairwise_euclidean<F: Scalar>(features: ArrayView2<'_, F>) -> DistanceMatrix<F> {
    DistanceMatrix::new_unchecked(crate::nncore::pairwise_distances(features))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn three_four_five() {
        let d = pairwise_euclidean(array![[0.0, 0.0], [3.0, 4.0], [0.0, 0.0]].view());
        assert_eq!(d.get(0, 1), 5.0);
        assert_eq!(d.get(0, 2), 0.0);
        DistanceMatrix::new(d.into_inner()).unwrap();
    }

    #[test]
    fn rejects_asymmetric() {
        assert!(DistanceMatrix::new(array![[0.0, 1.0], [2.0, 0.0]]).is_err());
        assert!(DistanceMatrix::new(array![[1.0, 1.0], [1.0, 0.0]]).is_err());
    }

    proptest! {
        #[test]
        fn triangle_inequality(vals in proptest::collection::vec(-10.0f64..10.0, 30)) {
            let f = Array2::from_shape_vec((10, 3), vals).unwrap();
            let d = pairwise_euclidean(f.view());
            for i in 0..10 {
                for j in 0..10 {
                    for k in 0..10 {
                        prop_assert!(d.get(i, k) <= d.get(i, j) + d.get(j, k) + 1e-12);
                    }
                }
            }
        }
    }
}
