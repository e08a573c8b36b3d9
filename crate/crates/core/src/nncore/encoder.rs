use ndarray::{Array1, Array2, ArrayView2, ArrayViewD, ArrayViewMutD, Axis};
use rand::Rng;

use super::Parameters;
use crate::error::{Error, Result};
use crate::Scalar;

/// Two-layer perceptron `raw_dim → hidden_dim → feat_dim`.
///
/// The hidden layer uses `tanh`; the output layer is linear. Weights are
/// stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder<F> {
    pub w1: Array2<F>,
    pub b1: Array1<F>,
    pub w2: Array2<F>,
    pub b2: Array1<F>,
}

/// Activations kept from the forward pass.
#[derive(Debug, Clone)]
pub struct EncoderCache<F> {
    input: Array2<F>,
    hidden: Array2<F>,
}

impl<F: Scalar> Encoder<F> {
    pub fn zeros(raw_dim: usize, hidden_dim: usize, feat_dim: usize) -> Self {
        Self {
            w1: Array2::zeros((hidden_dim, raw_dim)),
            b1: Array1::zeros(hidden_dim),
            w2: Array2::zeros((feat_dim, hidden_dim)),
            b2: Array1::zeros(feat_dim),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn random<R: Rng + ?Sized>(raw_dim: usize, hidden_dim: usize, feat_dim: usize, rng: &mut R) -> Self {
        let mut enc = Self::zeros(raw_dim, hidden_dim, feat_dim);
        glorot(&mut enc.w1, rng);
        glorot(&mut enc.w2, rng);
        enc
    }

    pub fn raw_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn feat_dim(&self) -> usize {
        self.w2.nrows()
    }

    pub fn check_shapes(&self) -> Result<()> {
        let ok = self.b1.len() == self.w1.nrows() && self.w2.ncols() == self.w1.nrows() && self.b2.len() == self.w2.nrows();
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("encoder layer shapes are inconsistent".into()))
        }
    }

    pub fn forward(&self, batch: ArrayView2<'_, F>) -> Result<(Array2<F>, EncoderCache<F>)> {
        if batch.ncols() != self.raw_dim() {
            return Err(Error::Shape(format!(
                "encoder expects {} input columns, got {}",
                self.raw_dim(),
                batch.ncols()
            )));
        }
        let hidden = (batch.dot(&self.w1.t()) + &self.b1).mapv(F::tanh);
        let out = hidden.dot(&self.w2.t()) + &self.b2;
        Ok((out, EncoderCache { input: batch.to_owned(), hidden }))
    }

    /// Forward pass without keeping a cache.
    pub fn embed(&self, batch: ArrayView2<'_, F>) -> Result<Array2<F>> {
        self.forward(batch).map(|(out, _)| out)
    }

    /// Returns parameter gradients and the gradient w.r.t. the input batch.
    pub fn backward(&self, cache: &EncoderCache<F>, d_out: ArrayView2<'_, F>) -> Result<(Encoder<F>, Array2<F>)> {
        if d_out.dim() != (cache.hidden.nrows(), self.feat_dim()) {
            return Err(Error::Shape(format!(
                "output gradient has shape {:?}, expected ({}, {})",
                d_out.dim(),
                cache.hidden.nrows(),
                self.feat_dim()
            )));
        }
        let w2 = d_out.t().dot(&cache.hidden);
        let b2 = d_out.sum_axis(Axis(0));
        let d_hidden = d_out.dot(&self.w2);
        let d_pre = d_hidden * cache.hidden.mapv(|h| F::one() - h * h);
        let w1 = d_pre.t().dot(&cache.input);
        let b1 = d_pre.sum_axis(Axis(0));
        let d_input = d_pre.dot(&self.w1);
        Ok((Encoder { w1, b1, w2, b2 }, d_input))
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.raw_dim(), self.hidden_dim(), self.feat_dim())
    }

    pub fn cast<G: Scalar>(&self) -> Encoder<G> {
        let c = |v: &F| G::lit(v.as_f64());
        Encoder { w1: self.w1.map(c), b1: self.b1.map(c), w2: self.w2.map(c), b2: self.b2.map(c) }
    }
}

pub(crate) fn glorot<F: Scalar, R: Rng + ?Sized>(w: &mut Array2<F>, rng: &mut R) {
    let (fan_out, fan_in) = w.dim();
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in w.iter_mut() {
        *v = F::lit(rng.random_range(-limit..limit));
    }
}

impl<F: Scalar> Parameters<F> for Encoder<F> {
    fn tensors(&self) -> Vec<ArrayViewD<'_, F>> {
        vec![self.w1.view().into_dyn(), self.b1.view().into_dyn(), self.w2.view().into_dyn(), self.b2.view().into_dyn()]
    }

    fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, F>> {
        vec![
            self.w1.view_mut().into_dyn(),
            self.b1.view_mut().into_dyn(),
            self.w2.view_mut().into_dyn(),
            self.b2.view_mut().into_dyn(),
        ]
    }
}
