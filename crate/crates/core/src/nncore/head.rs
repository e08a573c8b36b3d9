use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::Rng;

use super::encoder::glorot;
use super::Parameters;
use crate::Scalar;

/// Softmax classifier over the source identities: `logits = features · W + b`
/// with `W` of shape `feat_dim × n_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead<F> {
    pub w: Array2<F>,
    pub b: Array1<F>,
}

impl<F: Scalar> ClassifierHead<F> {
    pub fn zeros(feat_dim: usize, n_classes: usize) -> Self {
        Self { w: Array2::zeros((feat_dim, n_classes)), b: Array1::zeros(n_classes) }
    }

    pub fn random<R: Rng + ?Sized>(feat_dim: usize, n_classes: usize, rng: &mut R) -> Self {
        let mut head = Self::zeros(feat_dim, n_classes);
        glorot(&mut head.w, rng);
        head
    }

    pub fn n_classes(&self) -> usize {
        self.w.ncols()
    }

    pub fn feat_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.feat_dim(), self.n_classes())
    }
}

impl<F: Scalar> Parameters<F> for ClassifierHead<F> {
    fn tensors(&self) -> Vec<ArrayViewD<'_, F>> {
        vec![self.w.view().into_dyn(), self.b.view().into_dyn()]
    }

    fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, F>> {
        vec![self.w.view_mut().into_dyn(), self.b.view_mut().into_dyn()]
    }
}
