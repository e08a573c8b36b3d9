//! Camera-style generator `g` and its objectives.
//!
//! `g` holds one affine map `x ↦ U_c x + v_c` per target camera. It is
//! trained with three terms:
//!
//! * the diversity loss `mean(exp(−λ·D))`, where `D` is the feature-space
//!   distance of a translated sample from its cluster center;
//! * a cycle + same-camera reconstruction loss that keeps translations
//!   invertible;
//! * a moment-matching style loss that pulls the distribution of samples
//!   translated into camera `c` onto the first two moments of the real
//!   samples of camera `c`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewD, ArrayViewMutD, Axis};

use crate::error::{Error, Result};
use crate::nncore::{Encoder, Parameters, Sgd};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct StyleGenerator<F> {
    pub u: Vec<Array2<F>>,
    pub v: Vec<Array1<F>>,
}

impl<F: Scalar> StyleGenerator<F> {
    /// Every camera map is the identity.
    pub fn identity(n_cameras: usize, raw_dim: usize) -> Self {
        Self { u: vec![Array2::eye(raw_dim); n_cameras], v: vec![Array1::zeros(raw_dim); n_cameras] }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            u: self.u.iter().map(|u| Array2::zeros(u.raw_dim())).collect(),
            v: self.v.iter().map(|v| Array1::zeros(v.raw_dim())).collect(),
        }
    }

    pub fn n_cameras(&self) -> usize {
        self.u.len()
    }

    pub fn raw_dim(&self) -> usize {
        self.v.first().map_or(0, |v| v.len())
    }

    fn check_camera(&self, camera: usize) -> Result<()> {
        if camera < self.n_cameras() {
            Ok(())
        } else {
            Err(Error::CameraOutOfRange { camera, n_cameras: self.n_cameras() })
        }
    }

    /// Translates one sample into the style of `target_camera`.
    pub fn generate(&self, raw: ArrayView1<'_, F>, target_camera: usize) -> Result<Array1<F>> {
        self.check_camera(target_camera)?;
        if raw.len() != self.raw_dim() {
            return Err(Error::Shape(format!("generator expects length {}, got {}", self.raw_dim(), raw.len())));
        }
        Ok(self.u[target_camera].dot(&raw) + &self.v[target_camera])
    }

    /// Row-wise translation, row `i` into camera `targets[i]`.
    pub fn generate_batch(&self, raw: ArrayView2<'_, F>, targets: &[usize]) -> Result<Array2<F>> {
        if raw.nrows() != targets.len() {
            return Err(Error::Shape(format!("{} rows but {} target cameras", raw.nrows(), targets.len())));
        }
        let mut out = Array2::zeros((raw.nrows(), self.raw_dim()));
        for ((mut o, x), &c) in out.rows_mut().into_iter().zip(raw.rows()).zip(targets) {
            o.assign(&self.generate(x, c)?);
        }
        Ok(out)
    }

    pub fn cast<G: Scalar>(&self) -> StyleGenerator<G> {
        let c = |v: &F| G::lit(v.as_f64());
        StyleGenerator { u: self.u.iter().map(|u| u.map(c)).collect(), v: self.v.iter().map(|v| v.map(c)).collect() }
    }

    /// Accumulates the gradient of `⟨d_out, U_c x + v_c⟩` into `self`.
    fn accumulate(&mut self, camera: usize, x: ArrayView1<'_, F>, d_out: ArrayView1<'_, F>) {
        let u = &mut self.u[camera];
        for (r, &g) in d_out.iter().enumerate() {
            for (k, &xv) in x.iter().enumerate() {
                u[[r, k]] += g * xv;
            }
        }
        self.v[camera] += &d_out;
    }

    fn add_scaled(&mut self, other: &Self, scale: F) {
        for (a, b) in self.u.iter_mut().zip(&other.u) {
            a.scaled_add(scale, b);
        }
        for (a, b) in self.v.iter_mut().zip(&other.v) {
            a.scaled_add(scale, b);
        }
    }
}

impl<F: Scalar> Parameters<F> for StyleGenerator<F> {
    fn tensors(&self) -> Vec<ArrayViewD<'_, F>> {
        self.u.iter().zip(&self.v).flat_map(|(u, v)| [u.view().into_dyn(), v.view().into_dyn()]).collect()
    }

    fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, F>> {
        self.u
            .iter_mut()
            .zip(self.v.iter_mut())
            .flat_map(|(u, v)| [u.view_mut().into_dyn(), v.view_mut().into_dyn()])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSample<F> {
    pub raw: Array1<F>,
    pub pseudo_label: usize,
    pub source_index: usize,
    pub target_camera: usize,
}

/// One translated copy of every clustered sample for every camera other than
/// its own; noise samples produce nothing.
pub fn augment_cluster_samples<F: Scalar>(
    g: &StyleGenerator<F>,
    raw: ArrayView2<'_, F>,
    cameras: &[usize],
    labels: &[Option<usize>],
) -> Result<Vec<AugmentedSample<F>>> {
    if raw.nrows() != cameras.len() || raw.nrows() != labels.len() {
        return Err(Error::Shape("raw rows, cameras and labels differ in length".into()));
    }
    let mut out = Vec::new();
    for (i, (x, &own)) in raw.rows().into_iter().zip(cameras).enumerate() {
        let Some(label) = labels[i] else { continue };
        for target in (0..g.n_cameras()).filter(|&c| c != own) {
            out.push(AugmentedSample { raw: g.generate(x, target)?, pseudo_label: label, source_index: i, target_camera: target });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenHyper {
    /// Attenuation `λ` of the diversity loss.
    pub lambda: f64,
    pub beta_recon: f64,
    pub beta_style: f64,
    pub gen_lr: f64,
    pub gen_momentum: f64,
    /// Full-batch steps of the style pre-fit run before adaptation.
    pub prefit_steps: usize,
}

impl Default for GenHyper {
    fn default() -> Self {
        Self { lambda: 0.03, beta_recon: 1.0, beta_style: 1.0, gen_lr: 1e-3, gen_momentum: 0.9, prefit_steps: 300 }
    }
}

impl GenHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        for (name, v) in [("beta_recon", self.beta_recon), ("beta_style", self.beta_style), ("gen_lr", self.gen_lr)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.gen_momentum) {
            return Err(Error::Config(format!("gen_momentum must lie in [0, 1), got {}", self.gen_momentum)));
        }
        Ok(())
    }
}

/// Samples the generator is trained on: originals with their own camera, the
/// camera each is translated into, and its pseudo-label.
#[derive(Debug, Clone)]
pub struct GenBatch<F> {
    pub raw: Array2<F>,
    pub cameras: Vec<usize>,
    pub targets: Vec<usize>,
    pub labels: Vec<Option<usize>>,
}

impl<F: Scalar> GenBatch<F> {
    fn check(&self) -> Result<()> {
        let n = self.raw.nrows();
        if self.cameras.len() != n || self.targets.len() != n || self.labels.len() != n {
            return Err(Error::Shape("generator batch fields differ in length".into()));
        }
        Ok(())
    }
}

/// `D(x) = ‖f(g(x, c)) − center(label(x))‖₂` for every batch row.
pub fn diversity<F: Scalar>(
    f: &Encoder<F>,
    g: &StyleGenerator<F>,
    batch: &GenBatch<F>,
    centers: ArrayView2<'_, F>,
) -> Result<Array1<F>> {
    diversity_parts(f, g, batch, centers).map(|(d, _, _)| d)
}

/// Diversity values plus the generated features and their center offsets.
fn diversity_parts<F: Scalar>(
    f: &Encoder<F>,
    g: &StyleGenerator<F>,
    batch: &GenBatch<F>,
    centers: ArrayView2<'_, F>,
) -> Result<(Array1<F>, Array2<F>, crate::nncore::EncoderCache<F>)> {
    batch.check()?;
    let labels: Vec<usize> = batch
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| l.ok_or(Error::NoiseSample(i)))
        .collect::<Result<_>>()?;
    if let Some(&c) = labels.iter().find(|&&c| c >= centers.nrows()) {
        return Err(Error::LabelOutOfRange { label: c, n_classes: centers.nrows() });
    }
    let generated = g.generate_batch(batch.raw.view(), &batch.targets)?;
    let (feats, cache) = f.forward(generated.view())?;
    let mut offsets = feats;
    for (mut row, &c) in offsets.rows_mut().into_iter().zip(&labels) {
        row -= &centers.row(c);
    }
    let d = offsets.map_axis(Axis(1), |r| r.iter().map(|&v| v * v).sum::<F>().sqrt());
    Ok((d, offsets, cache))
}

/// `L_div = mean(exp(−λ·D))` and its derivative w.r.t. each `D`.
pub fn loss_div<F: Scalar>(d: ArrayView1<'_, F>, lambda: F) -> (F, Array1<F>) {
    let n = d.len();
    if n == 0 {
        return (F::zero(), Array1::zeros(0));
    }
    let inv_n = F::one() / F::lit(n as f64);
    let e = d.mapv(|v| (-lambda * v).exp());
    let loss = e.sum() * inv_n;
    let grad = e.mapv(|v| -lambda * v * inv_n);
    (loss, grad)
}

/// Diversity loss through `f ∘ g` with its gradient w.r.t. `g`.
pub fn diversity_objective<F: Scalar>(
    f: &Encoder<F>,
    g: &StyleGenerator<F>,
    batch: &GenBatch<F>,
    centers: ArrayView2<'_, F>,
    lambda: F,
) -> Result<(F, StyleGenerator<F>, Array1<F>)> {
    let (d, offsets, cache) = diversity_parts(f, g, batch, centers)?;
    let (loss, d_dist) = loss_div(d.view(), lambda);
    let mut d_feats = offsets;
    for ((mut row, &dist), &dl) in d_feats.rows_mut().into_iter().zip(&d).zip(&d_dist) {
        let scale = if dist > F::zero() { dl / dist } else { F::zero() };
        row.mapv_inplace(|v| v * scale);
    }
    let (_, d_gen) = f.backward(&cache, d_feats.view())?;
    let mut grad = g.zeros_like();
    for ((x, &c), dx) in batch.raw.rows().into_iter().zip(&batch.targets).zip(d_gen.rows()) {
        grad.accumulate(c, x, dx);
    }
    Ok((loss, grad, d))
}

/// Cycle and same-camera reconstruction:
/// mean over samples `x` and cameras `c' ≠ c_x` of
/// `‖g(g(x, c'), c_x) − x‖² + ‖g(x, c_x) − x‖²`.
pub fn loss_recon<F: Scalar>(
    g: &StyleGenerator<F>,
    raw: ArrayView2<'_, F>,
    cameras: &[usize],
) -> Result<(F, StyleGenerator<F>)> {
    if raw.nrows() != cameras.len() {
        return Err(Error::Shape(format!("{} rows but {} cameras", raw.nrows(), cameras.len())));
    }
    let k = g.n_cameras();
    let mut grad = g.zeros_like();
    if raw.nrows() == 0 || k < 2 {
        return Ok((F::zero(), grad));
    }
    let weight = F::one() / F::lit((raw.nrows() * (k - 1)) as f64);
    let two_w = weight + weight;
    let mut loss = F::zero();
    for (x, &own) in raw.rows().into_iter().zip(cameras) {
        g.check_camera(own)?;
        let same = g.generate(x, own)? - x;
        let same_sq: F = same.iter().map(|&v| v * v).sum();
        for other in (0..k).filter(|&c| c != own) {
            let there = g.generate(x, other)?;
            let back = g.generate(there.view(), own)?;
            let cycle = &back - &x;
            loss += (cycle.iter().map(|&v| v * v).sum::<F>() + same_sq) * weight;

            let d_back = cycle.mapv(|v| v * two_w);
            grad.accumulate(own, there.view(), d_back.view());
            let d_there = g.u[own].t().dot(&d_back);
            grad.accumulate(other, x, d_there.view());
            grad.accumulate(own, x, same.mapv(|v| v * two_w).view());
        }
    }
    Ok((loss, grad))
}

/// First and second moments of each camera's samples and of the samples
/// outside that camera.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleTargets<F> {
    pub mean: Vec<Array1<F>>,
    pub cov: Vec<Array2<F>>,
    pub mean_other: Vec<Array1<F>>,
    pub cov_other: Vec<Array2<F>>,
}

fn moments<F: Scalar>(rows: &[ArrayView1<'_, F>], dim: usize) -> (Array1<F>, Array2<F>) {
    let n = F::lit(rows.len().max(1) as f64);
    let mut mean = Array1::zeros(dim);
    for r in rows {
        mean += r;
    }
    mean.mapv_inplace(|v| v / n);
    let mut cov = Array2::zeros((dim, dim));
    for r in rows {
        let c = r - &mean;
        for a in 0..dim {
            for b in 0..dim {
                cov[[a, b]] += c[a] * c[b];
            }
        }
    }
    cov.mapv_inplace(|v| v / n);
    (mean, cov)
}

impl<F: Scalar> StyleTargets<F> {
    pub fn from_samples(raw: ArrayView2<'_, F>, cameras: &[usize], n_cameras: usize) -> Result<Self> {
        if raw.nrows() != cameras.len() {
            return Err(Error::Shape(format!("{} rows but {} cameras", raw.nrows(), cameras.len())));
        }
        let dim = raw.ncols();
        let mut out = Self { mean: Vec::new(), cov: Vec::new(), mean_other: Vec::new(), cov_other: Vec::new() };
        for c in 0..n_cameras {
            let own: Vec<_> = raw.rows().into_iter().zip(cameras).filter(|(_, &k)| k == c).map(|(r, _)| r).collect();
            let rest: Vec<_> = raw.rows().into_iter().zip(cameras).filter(|(_, &k)| k != c).map(|(r, _)| r).collect();
            if own.is_empty() || rest.is_empty() {
                return Err(Error::Config(format!("camera {c} needs samples both inside and outside it")));
            }
            let (m, s) = moments(&own, dim);
            let (mo, so) = moments(&rest, dim);
            out.mean.push(m);
            out.cov.push(s);
            out.mean_other.push(mo);
            out.cov_other.push(so);
        }
        Ok(out)
    }
}

/// Moment-matching style loss
/// `(1/K) Σ_c ‖U_c m̄_c + v_c − μ_c‖² + ‖U_c S̄_c U_cᵀ − Σ_c‖²_F`,
/// where `m̄_c, S̄_c` are the moments of samples outside camera `c` and
/// `μ_c, Σ_c` those of camera `c`.
pub fn loss_style<F: Scalar>(g: &StyleGenerator<F>, t: &StyleTargets<F>) -> Result<(F, StyleGenerator<F>)> {
    let k = g.n_cameras();
    if t.mean.len() != k {
        return Err(Error::Shape(format!("style targets for {} cameras, generator has {k}", t.mean.len())));
    }
    let inv_k = F::one() / F::lit(k as f64);
    let two = F::lit(2.0);
    let four = F::lit(4.0);
    let mut loss = F::zero();
    let mut grad = g.zeros_like();
    for c in 0..k {
        let u = &g.u[c];
        let r = u.dot(&t.mean_other[c]) + &g.v[c] - &t.mean[c];
        loss += r.iter().map(|&v| v * v).sum::<F>() * inv_k;
        let us = u.dot(&t.cov_other[c]);
        let diff = us.dot(&u.t()) - &t.cov[c];
        loss += diff.iter().map(|&v| v * v).sum::<F>() * inv_k;

        let r_scaled = r.mapv(|v| v * two * inv_k);
        grad.accumulate(c, t.mean_other[c].view(), r_scaled.view());
        grad.u[c].scaled_add(four * inv_k, &diff.dot(&us));
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxStepReport<F> {
    pub l_div: F,
    pub l_rec: F,
    pub l_style: F,
    pub mean_diversity: F,
}

/// One generator update on `L_div + β_rec·L_rec (+ β_style·L_style)` with the
/// encoder held fixed.
pub fn max_step<F: Scalar>(
    g: &mut StyleGenerator<F>,
    f: &Encoder<F>,
    batch: &GenBatch<F>,
    centers: ArrayView2<'_, F>,
    hyper: &GenHyper,
    style: Option<&StyleTargets<F>>,
    opt: &mut Sgd<F>,
) -> Result<MaxStepReport<F>> {
    let (l_div, mut grad, d) = diversity_objective(f, g, batch, centers, F::lit(hyper.lambda))?;
    let (l_rec, g_rec) = loss_recon(g, batch.raw.view(), &batch.cameras)?;
    grad.add_scaled(&g_rec, F::lit(hyper.beta_recon));
    let mut l_style = F::zero();
    if let Some(targets) = style {
        let (ls, g_style) = loss_style(g, targets)?;
        grad.add_scaled(&g_style, F::lit(hyper.beta_style));
        l_style = ls;
    }
    opt.step(g, &grad)?;
    let mean_diversity = if d.is_empty() { F::zero() } else { d.sum() / F::lit(d.len() as f64) };
    Ok(MaxStepReport { l_div, l_rec, l_style, mean_diversity })
}

/// Combined generator objective without the diversity term, as used by the
/// style pre-fit.
pub fn style_objective<F: Scalar>(
    g: &StyleGenerator<F>,
    raw: ArrayView2<'_, F>,
    cameras: &[usize],
    hyper: &GenHyper,
    style: &StyleTargets<F>,
) -> Result<(F, StyleGenerator<F>)> {
    let (l_rec, mut grad) = loss_recon(g, raw, cameras)?;
    grad.mapv_scale(F::lit(hyper.beta_recon));
    let (l_style, g_style) = loss_style(g, style)?;
    grad.add_scaled(&g_style, F::lit(hyper.beta_style));
    Ok((F::lit(hyper.beta_recon) * l_rec + F::lit(hyper.beta_style) * l_style, grad))
}

impl<F: Scalar> StyleGenerator<F> {
    fn mapv_scale(&mut self, s: F) {
        for u in &mut self.u {
            u.mapv_inplace(|v| v * s);
        }
        for v in &mut self.v {
            v.mapv_inplace(|x| x * s);
        }
    }
}

/// Full-batch pre-fit of the generator on reconstruction + style, standing in
/// for training the cross-camera translator before clustering starts.
/// Returns the objective before and after.
pub fn prefit_generator<F: Scalar>(
    g: &mut StyleGenerator<F>,
    raw: ArrayView2<'_, F>,
    cameras: &[usize],
    hyper: &GenHyper,
    style: &StyleTargets<F>,
) -> Result<(F, F)> {
    let mut opt = Sgd::new(F::lit(hyper.gen_lr), F::lit(hyper.gen_momentum))?;
    let (initial, _) = style_objective(g, raw, cameras, hyper, style)?;
    for _ in 0..hyper.prefit_steps {
        let (_, grad) = style_objective(g, raw, cameras, hyper, style)?;
        opt.step(g, &grad)?;
    }
    let (last, _) = style_objective(g, raw, cameras, hyper, style)?;
    Ok((initial, last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::grad_check;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_generator(rng: &mut ChaCha8Rng, k: usize, dim: usize, spread: f64) -> StyleGenerator<f64> {
        let mut g = StyleGenerator::identity(k, dim);
        for u in &mut g.u {
            u.mapv_inplace(|v| v + rng.random_range(-spread..spread));
        }
        for v in &mut g.v {
            v.mapv_inplace(|_| rng.random_range(-spread..spread));
        }
        g
    }

    #[test]
    fn identity_and_scaling() {
        let g = StyleGenerator::<f64>::identity(3, 2);
        let x = array![0.3, -1.2];
        for c in 0..3 {
            assert_eq!(g.generate(x.view(), c).unwrap(), x);
        }
        let mut g2 = g.clone();
        g2.u[1] = Array2::eye(2) * 2.0;
        assert_eq!(g2.generate(array![1.0, 1.0].view(), 1).unwrap(), array![2.0, 2.0]);
        assert_eq!(g.generate(x.view(), 3).unwrap_err(), Error::CameraOutOfRange { camera: 3, n_cameras: 3 });
    }

    #[test]
    fn augmentation_counts_and_labels() {
        let g = StyleGenerator::<f64>::identity(4, 2);
        let raw = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let aug = augment_cluster_samples(&g, raw.view(), &[0, 2, 3], &[Some(1), None, Some(0)]).unwrap();
        assert_eq!(aug.len(), 6);
        for a in &aug {
            let expected = if a.source_index == 0 { 1 } else { 0 };
            assert_eq!(a.pseudo_label, expected);
            assert_ne!(a.target_camera, [0, 2, 3][a.source_index]);
            assert_eq!(a.raw, raw.row(a.source_index));
        }
        let none = augment_cluster_samples(&g, raw.view(), &[0, 1, 2], &[None, None, None]).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn diversity_examples() {
        let f = Encoder::<f64> { w1: Array2::eye(2), b1: Array1::zeros(2), w2: Array2::eye(2), b2: Array1::zeros(2) };
        let g = StyleGenerator::identity(2, 2);
        // tanh(0) = 0: a zero sample sits exactly on a zero center.
        let batch =
            GenBatch { raw: array![[0.0, 0.0]], cameras: vec![0], targets: vec![1], labels: vec![Some(0)] };
        assert_eq!(diversity(&f, &g, &batch, array![[0.0, 0.0]].view()).unwrap()[0], 0.0);

        // Linear encoder: center (1, 0), f(g(x)) = (3, 0) → D = 2.
        let mut lin = Encoder::<f64>::zeros(1, 1, 2);
        lin.b2 = array![3.0, 0.0];
        let g1 = StyleGenerator::identity(2, 1);
        let batch = GenBatch { raw: array![[0.7]], cameras: vec![0], targets: vec![1], labels: vec![Some(0)] };
        assert_eq!(diversity(&lin, &g1, &batch, array![[1.0, 0.0]].view()).unwrap()[0], 2.0);

        let noisy = GenBatch { labels: vec![None], ..batch };
        assert_eq!(diversity(&lin, &g1, &noisy, array![[1.0, 0.0]].view()).unwrap_err(), Error::NoiseSample(0));
    }

    #[test]
    fn singleton_cluster_at_identity_has_zero_diversity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = Encoder::<f64>::random(3, 5, 2, &mut rng);
        let g = StyleGenerator::identity(2, 3);
        let raw = array![[0.2, -0.4, 1.0]];
        let center = f.embed(raw.view()).unwrap();
        let batch = GenBatch { raw, cameras: vec![0], targets: vec![1], labels: vec![Some(0)] };
        assert_eq!(diversity(&f, &g, &batch, center.view()).unwrap()[0], 0.0);
    }

    #[test]
    fn diversity_loss_closed_forms() {
        let (l, _) = loss_div(array![0.0, 0.0, 0.0].view(), 0.03);
        assert_eq!(l, 1.0);
        let lambda = 0.03;
        let (l, _) = loss_div(array![2f64.ln() / lambda].view(), lambda);
        assert!((l - 0.5).abs() < 1e-15);
    }

    #[test]
    fn reconstruction_examples() {
        let g = StyleGenerator::<f64>::identity(3, 2);
        let raw = array![[1.0, 2.0], [-1.0, 0.5]];
        let (l, grad) = loss_recon(&g, raw.view(), &[0, 2]).unwrap();
        assert_eq!(l, 0.0);
        assert!(grad.to_flat().iter().all(|&v| v == 0.0));

        // 1-D: g(·, 1) = x + 1, g(·, 0) = x − 1; samples from camera 0.
        let mut g = StyleGenerator::<f64>::identity(2, 1);
        g.v[1][0] = 1.0;
        g.v[0][0] = -1.0;
        let (l, _) = loss_recon(&g, array![[0.5], [2.0]].view(), &[0, 0]).unwrap();
        assert_eq!(l, 1.0);
    }

    fn random_batch(rng: &mut ChaCha8Rng, n: usize, dim: usize, k: usize, n_clusters: usize) -> GenBatch<f64> {
        let raw = Array2::from_shape_fn((n, dim), |_| rng.random_range(-1.0..1.0));
        let cameras: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let targets = cameras.iter().map(|&c| (c + rng.random_range(1..k)) % k).collect();
        let labels = (0..n).map(|i| Some(i % n_clusters)).collect();
        GenBatch { raw, cameras, targets, labels }
    }

    #[test]
    fn diversity_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let f = Encoder::<f64>::random(4, 6, 3, &mut rng);
            let g = random_generator(&mut rng, 3, 4, 0.3);
            let batch = random_batch(&mut rng, 6, 4, 3, 2);
            let centers = Array2::from_shape_fn((2, 3), |_| rng.random_range(-1.0..1.0));
            let mut probe = g.clone();
            let r = grad_check(
                |p| {
                    probe.set_flat(p);
                    let (l, grad, _) = diversity_objective(&f, &probe, &batch, centers.view(), 0.7).unwrap();
                    (l, grad.to_flat())
                },
                &g.to_flat(),
                1e-5,
            );
            assert!(r.max_rel_error < 1e-4, "{r:?}");
        }
    }

    #[test]
    fn reconstruction_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = random_generator(&mut rng, 3, 3, 0.4);
        let batch = random_batch(&mut rng, 5, 3, 3, 1);
        let mut probe = g.clone();
        let r = grad_check(
            |p| {
                probe.set_flat(p);
                let (l, grad) = loss_recon(&probe, batch.raw.view(), &batch.cameras).unwrap();
                (l, grad.to_flat())
            },
            &g.to_flat(),
            1e-5,
        );
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn style_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let g = random_generator(&mut rng, 3, 3, 0.4);
        let batch = random_batch(&mut rng, 30, 3, 3, 1);
        let t = StyleTargets::from_samples(batch.raw.view(), &batch.cameras, 3).unwrap();
        let mut probe = g.clone();
        let r = grad_check(
            |p| {
                probe.set_flat(p);
                let (l, grad) = loss_style(&probe, &t).unwrap();
                (l, grad.to_flat())
            },
            &g.to_flat(),
            1e-5,
        );
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn prefit_reduces_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let batch = random_batch(&mut rng, 60, 3, 3, 1);
        let mut raw = batch.raw.clone();
        // Give each camera its own offset so there is a style to learn.
        for (mut row, &c) in raw.rows_mut().into_iter().zip(&batch.cameras) {
            row[0] += c as f64;
        }
        let t = StyleTargets::from_samples(raw.view(), &batch.cameras, 3).unwrap();
        let mut g = StyleGenerator::identity(3, 3);
        let hyper = GenHyper { gen_lr: 0.01, prefit_steps: 200, ..GenHyper::default() };
        let (before, after) = prefit_generator(&mut g, raw.view(), &batch.cameras, &hyper, &t).unwrap();
        assert!(after < before, "{before} -> {after}");
    }

    #[test]
    fn max_step_leaves_encoder_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let f = Encoder::<f64>::random(4, 6, 3, &mut rng);
        let snapshot: Vec<u64> = f.to_flat().iter().map(|v| v.to_bits()).collect();
        let mut g = StyleGenerator::identity(3, 4);
        let batch = random_batch(&mut rng, 8, 4, 3, 2);
        let centers = Array2::from_shape_fn((2, 3), |_| rng.random_range(-1.0..1.0));
        let mut opt = Sgd::new(1e-2, 0.9).unwrap();
        for _ in 0..5 {
            max_step(&mut g, &f, &batch, centers.view(), &GenHyper::default(), None, &mut opt).unwrap();
        }
        let after: Vec<u64> = f.to_flat().iter().map(|v| v.to_bits()).collect();
        assert_eq!(snapshot, after);
    }

    #[test]
    fn heavy_reconstruction_keeps_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let f = Encoder::<f64>::random(4, 6, 3, &mut rng);
        let batch = random_batch(&mut rng, 8, 4, 3, 2);
        let centers = f.embed(batch.raw.view()).unwrap().slice(ndarray::s![..2, ..]).to_owned();
        let hyper = GenHyper { beta_recon: 1e4, gen_lr: 1e-6, gen_momentum: 0.0, ..GenHyper::default() };
        let mut g = StyleGenerator::identity(3, 4);
        let d0 = diversity(&f, &g, &batch, centers.view()).unwrap();
        let mut opt = Sgd::new(hyper.gen_lr, hyper.gen_momentum).unwrap();
        for _ in 0..50 {
            max_step(&mut g, &f, &batch, centers.view(), &hyper, None, &mut opt).unwrap();
        }
        let id = StyleGenerator::<f64>::identity(3, 4).to_flat();
        let drift = g.to_flat().iter().zip(&id).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-3, "drift {drift}");
        let d1 = diversity(&f, &g, &batch, centers.view()).unwrap();
        assert!((&d1 - &d0).iter().all(|v| v.abs() < 1e-3));
    }

    #[test]
    fn huge_lambda_barely_moves_generator() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let f = Encoder::<f64>::random(4, 6, 3, &mut rng);
        let batch = random_batch(&mut rng, 8, 4, 3, 2);
        let centers = Array2::from_shape_fn((2, 3), |_| rng.random_range(2.0..3.0));
        let (_, grad, d) = diversity_objective(&f, &StyleGenerator::identity(3, 4), &batch, centers.view(), 1e3).unwrap();
        assert!(d.iter().all(|&v| v > 0.5));
        assert!(grad.to_flat().iter().all(|v| v.abs() < 1e-100));
    }
}
