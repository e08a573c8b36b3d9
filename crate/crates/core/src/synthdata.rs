//! Synthetic multi-camera identity data.
//!
//! Each identity owns a prototype vector. A sample of identity `i` seen by
//! camera `c` is `A_c (z_i + noise) + b_c`, where `(A_c, b_c)` is a random
//! affine camera style. The target domain draws its own prototypes and
//! styles and is additionally passed through one global affine map, which
//! is the domain gap the adaptation has to close.
//!
//! All randomness flows from `SynthConfig::seed` through ChaCha streams, so
//! a configuration always produces bit-identical datasets.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Ground-truth identity. Target identities are only used for evaluation.
    pub identity: usize,
    pub camera: usize,
    pub raw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub domain: Domain,
    pub samples: Vec<Sample>,
    pub n_identities: usize,
    pub n_cameras: usize,
    pub raw_dim: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn identities(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.identity).collect()
    }

    pub fn cameras(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.camera).collect()
    }

    /// Raw vectors as an `n × raw_dim` matrix.
    pub fn raw_matrix(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.len(), self.raw_dim));
        for (mut row, s) in m.rows_mut().into_iter().zip(&self.samples) {
            row.assign(&Array1::from(s.raw.clone()));
        }
        m
    }

    /// Raw vectors of the selected samples, in the given order.
    pub fn raw_rows(&self, indices: &[usize]) -> Array2<f64> {
        let mut m = Array2::zeros((indices.len(), self.raw_dim));
        for (mut row, &i) in m.rows_mut().into_iter().zip(indices) {
            for (dst, &src) in row.iter_mut().zip(&self.samples[i].raw) {
                *dst = src;
            }
        }
        m
    }

    /// Checks the structural invariants: camera range, vector length,
    /// finiteness and cross-camera identity coverage.
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![Vec::<usize>::new(); self.n_identities];
        for (i, s) in self.samples.iter().enumerate() {
            if s.camera >= self.n_cameras {
                return Err(Error::CameraOutOfRange { camera: s.camera, n_cameras: self.n_cameras });
            }
            if s.raw.len() != self.raw_dim {
                return Err(Error::Shape(format!(
                    "sample {i} has {} entries, expected {}",
                    s.raw.len(),
                    self.raw_dim
                )));
            }
            if s.raw.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("sample {i} has non-finite entries")));
            }
            if s.identity >= self.n_identities {
                return Err(Error::LabelOutOfRange { label: s.identity, n_classes: self.n_identities });
            }
            if !seen[s.identity].contains(&s.camera) {
                seen[s.identity].push(s.camera);
            }
        }
        if let Some(id) = seen.iter().position(|cams| cams.len() < 2) {
            return Err(Error::Config(format!("identity {id} is seen by fewer than two cameras")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_identities_source: usize,
    pub n_identities_target: usize,
    pub samples_per_identity_per_camera: usize,
    pub n_cameras_source: usize,
    pub n_cameras_target: usize,
    pub raw_dim: usize,
    pub prototype_scale: f64,
    pub within_identity_noise: f64,
    pub camera_style_strength: f64,
    pub domain_shift_strength: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_identities_source: 100,
            n_identities_target: 50,
            samples_per_identity_per_camera: 5,
            n_cameras_source: 4,
            n_cameras_target: 4,
            raw_dim: 16,
            prototype_scale: 1.0,
            within_identity_noise: 0.25,
            camera_style_strength: 0.5,
            domain_shift_strength: 0.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_identities_source", self.n_identities_source),
            ("n_identities_target", self.n_identities_target),
            ("samples_per_identity_per_camera", self.samples_per_identity_per_camera),
            ("n_cameras_source", self.n_cameras_source),
            ("n_cameras_target", self.n_cameras_target),
            ("raw_dim", self.raw_dim),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        for (name, v) in [("n_cameras_source", self.n_cameras_source), ("n_cameras_target", self.n_cameras_target)] {
            if v < 2 {
                return Err(Error::Config(format!("{name} must be at least 2 for cross-camera evaluation")));
            }
        }
        let strengths = [
            ("prototype_scale", self.prototype_scale),
            ("within_identity_noise", self.within_identity_noise),
            ("camera_style_strength", self.camera_style_strength),
            ("domain_shift_strength", self.domain_shift_strength),
        ];
        for (name, v) in strengths {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be a finite non-negative number")));
            }
        }
        Ok(())
    }
}

/// Affine map `x ↦ A x + b`.
#[derive(Debug, Clone)]
struct Affine {
    a: Array2<f64>,
    b: Array1<f64>,
}

impl Affine {
    fn random(rng: &mut ChaCha8Rng, dim: usize, strength: f64, offset_scale: f64) -> Self {
        let inv_sqrt = 1.0 / (dim as f64).sqrt();
        let mut a = Array2::eye(dim);
        for v in a.iter_mut() {
            let r: f64 = StandardNormal.sample(rng);
            *v += strength * r * inv_sqrt;
        }
        let b = Array1::from_shape_fn(dim, |_| {
            let r: f64 = StandardNormal.sample(rng);
            strength * offset_scale * r
        });
        Self { a, b }
    }

    fn apply(&self, x: &Array1<f64>) -> Array1<f64> {
        self.a.dot(x) + &self.b
    }
}

fn gaussian_vector(rng: &mut ChaCha8Rng, dim: usize, std: f64) -> Array1<f64> {
    Array1::from_shape_fn(dim, |_| {
        let r: f64 = StandardNormal.sample(rng);
        std * r
    })
}

fn generate_domain(
    cfg: &SynthConfig,
    domain: Domain,
    n_identities: usize,
    n_cameras: usize,
    rng: &mut ChaCha8Rng,
) -> Dataset {
    let dim = cfg.raw_dim;
    let prototypes: Vec<Array1<f64>> =
        (0..n_identities).map(|_| gaussian_vector(rng, dim, cfg.prototype_scale)).collect();
    let styles: Vec<Affine> = (0..n_cameras)
        .map(|_| Affine::random(rng, dim, cfg.camera_style_strength, cfg.prototype_scale))
        .collect();
    let shift = match domain {
        Domain::Source => None,
        Domain::Target => Some(Affine::random(rng, dim, cfg.domain_shift_strength, cfg.prototype_scale)),
    };

    let mut samples = Vec::with_capacity(n_identities * n_cameras * cfg.samples_per_identity_per_camera);
    for (identity, proto) in prototypes.iter().enumerate() {
        for (camera, style) in styles.iter().enumerate() {
            for _ in 0..cfg.samples_per_identity_per_camera {
                let noisy = proto + &gaussian_vector(rng, dim, cfg.within_identity_noise);
                let mut x = style.apply(&noisy);
                if let Some(shift) = &shift {
                    x = shift.apply(&x);
                }
                samples.push(Sample { identity, camera, raw: x.to_vec() });
            }
        }
    }
    Dataset { domain, samples, n_identities, n_cameras, raw_dim: dim }
}

/// Generates the labeled source domain and the (label-hidden) target domain.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<(Dataset, Dataset)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let source = generate_domain(cfg, Domain::Source, cfg.n_identities_source, cfg.n_cameras_source, &mut rng);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);
    let target = generate_domain(cfg, Domain::Target, cfg.n_identities_target, cfg.n_cameras_target, &mut rng);
    Ok((source, target))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryGallery {
    pub query: Vec<usize>,
    pub gallery: Vec<usize>,
}

/// Cross-camera query/gallery split.
///
/// For every identity the cameras are visited in random order and one random
/// sample per camera is moved to the query set, as long as every query of
/// that identity keeps at least one gallery match in another camera.
pub fn split_query_gallery(ds: &Dataset, seed: u64) -> Result<QueryGallery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);

    let mut by_identity: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); ds.n_cameras]; ds.n_identities];
    for (i, s) in ds.samples.iter().enumerate() {
        if s.identity >= ds.n_identities || s.camera >= ds.n_cameras {
            return Err(Error::Split(format!("sample {i} has out-of-range identity or camera")));
        }
        by_identity[s.identity][s.camera].push(i);
    }

    let mut is_query = vec![false; ds.len()];
    for (identity, cams) in by_identity.iter().enumerate() {
        let mut order: Vec<usize> = (0..ds.n_cameras).filter(|&c| !cams[c].is_empty()).collect();
        if order.len() < 2 {
            return Err(Error::Split(format!("identity {identity} is seen by fewer than two cameras")));
        }
        order.shuffle(&mut rng);

        // Remaining gallery count per camera for this identity.
        let mut remaining: Vec<usize> = cams.iter().map(Vec::len).collect();
        let mut query_cams: Vec<usize> = Vec::new();
        for c in order {
            remaining[c] -= 1;
            let ok = query_cams.iter().chain(std::iter::once(&c)).all(|&qc| {
                remaining.iter().enumerate().any(|(gc, &n)| gc != qc && n > 0)
            });
            if ok {
                let pick = cams[c][rng.random_range(0..cams[c].len())];
                is_query[pick] = true;
                query_cams.push(c);
            } else {
                remaining[c] += 1;
            }
        }
        if query_cams.is_empty() {
            return Err(Error::Split(format!("identity {identity} cannot contribute a query")));
        }
    }

    let query = (0..ds.len()).filter(|&i| is_query[i]).collect();
    let gallery = (0..ds.len()).filter(|&i| !is_query[i]).collect();
    Ok(QueryGallery { query, gallery })
}
