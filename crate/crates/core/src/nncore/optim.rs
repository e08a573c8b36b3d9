use ndarray::ArrayD;

use super::Parameters;
use crate::error::{Error, Result};
use crate::Scalar;

/// SGD with classical momentum: `v ← μ·v − lr·g`, `θ ← θ + v`.
#[derive(Debug, Clone)]
pub struct Sgd<F> {
    pub lr: F,
    pub momentum: F,
    velocity: Vec<ArrayD<F>>,
}

impl<F: Scalar> Sgd<F> {
    pub fn new(lr: F, momentum: F) -> Result<Self> {
        if !(lr.is_finite() && lr >= F::zero()) {
            return Err(Error::Config(format!("learning rate must be finite and non-negative, got {lr}")));
        }
        if !(momentum >= F::zero() && momentum < F::one()) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {momentum}")));
        }
        Ok(Self { lr, momentum, velocity: Vec::new() })
    }

    pub fn velocity(&self) -> &[ArrayD<F>] {
        &self.velocity
    }

    pub fn reset(&mut self) {
        self.velocity.clear();
    }

    pub fn step<P: Parameters<F>>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let grads = grads.tensors();
        let mut params = params.tensors_mut();
        if params.len() != grads.len() || params.iter().zip(&grads).any(|(p, g)| p.shape() != g.shape()) {
            return Err(Error::Shape("gradient tensors do not match parameter tensors".into()));
        }
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|p| ArrayD::zeros(p.raw_dim())).collect();
        } else if self.velocity.len() != params.len()
            || self.velocity.iter().zip(&params).any(|(v, p)| v.shape() != p.shape())
        {
            return Err(Error::Shape("optimizer state belongs to a different parameter set".into()));
        }
        for ((p, g), v) in params.iter_mut().zip(&grads).zip(&mut self.velocity) {
            ndarray::Zip::from(&mut **p).and(g).and(v).for_each(|p, &g, v| {
                *v = self.momentum * *v - self.lr * g;
                *p += *v;
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{ArrayViewD, ArrayViewMutD, IxDyn};

    #[derive(Clone)]
    struct Scalar1(ArrayD<f64>);

    impl Scalar1 {
        fn new(v: f64) -> Self {
            Self(ArrayD::from_elem(IxDyn(&[1]), v))
        }
    }

    impl Parameters<f64> for Scalar1 {
        fn tensors(&self) -> Vec<ArrayViewD<'_, f64>> {
            vec![self.0.view()]
        }
        fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
            vec![self.0.view_mut()]
        }
    }

    #[test]
    fn plain_gradient_step() {
        let mut opt = Sgd::new(1.0, 0.0).unwrap();
        let mut p = Scalar1::new(3.0);
        opt.step(&mut p, &Scalar1::new(1.25)).unwrap();
        assert_eq!(p.0[0], 1.75);
    }

    #[test]
    fn momentum_unrolled() {
        let mut opt = Sgd::new(0.1, 0.9).unwrap();
        let mut p = Scalar1::new(0.0);
        opt.step(&mut p, &Scalar1::new(1.0)).unwrap();
        opt.step(&mut p, &Scalar1::new(1.0)).unwrap();
        assert!((p.0[0] - (-0.29)).abs() < 1e-15);
    }

    #[test]
    fn velocity_decays_without_gradient() {
        let mut opt = Sgd::new(0.5, 0.8).unwrap();
        let mut p = Scalar1::new(0.0);
        opt.step(&mut p, &Scalar1::new(2.0)).unwrap();
        let mut v = opt.velocity()[0][0];
        assert_eq!(v, -1.0);
        for _ in 0..5 {
            opt.step(&mut p, &Scalar1::new(0.0)).unwrap();
            let next = opt.velocity()[0][0];
            assert!((next - 0.8 * v).abs() < 1e-15);
            v = next;
        }
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(Sgd::<f64>::new(0.1, 1.0).is_err());
        assert!(Sgd::<f64>::new(-0.1, 0.5).is_err());
    }

    #[test]
    fn rejects_shape_mismatch() {
        let mut opt = Sgd::new(0.1, 0.0).unwrap();
        let mut p = Scalar1::new(0.0);
        let g = Scalar1(ArrayD::zeros(IxDyn(&[2])));
        assert!(opt.step(&mut p, &g).is_err());
    }
}
