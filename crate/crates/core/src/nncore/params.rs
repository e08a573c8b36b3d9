use ndarray::{ArrayViewD, ArrayViewMutD};

use crate::Scalar;

/// A model whose trainable state is an ordered list of dense tensors.
///
/// Gradients use the same type as the model they belong to, so optimizers
/// can pair tensors positionally.
pub trait Parameters<F: Scalar> {
    fn tensors(&self) -> Vec<ArrayViewD<'_, F>>;
    fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, F>>;

    /// All parameters flattened in tensor order, each tensor row-major.
    fn to_flat(&self) -> Vec<F> {
        self.tensors().iter().flat_map(|t| t.iter().copied().collect::<Vec<_>>()).collect()
    }

    /// Inverse of [`Parameters::to_flat`]. Panics if the length differs.
    fn set_flat(&mut self, flat: &[F]) {
        let mut it = flat.iter();
        for mut t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v = *it.next().expect("flat parameter vector too short");
            }
        }
        assert!(it.next().is_none(), "flat parameter vector too long");
    }

    fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}
