//! Clustering-based domain adaptation for re-identification, on synthetic
//! multi-camera data.
//!
//! A small encoder is trained on a labeled source domain, then adapted to an
//! unlabeled target domain by alternating density clustering over re-ranked
//! feature distances with triplet training on the resulting pseudo-labels.
//! A per-camera affine generator adds cross-camera samples to each cluster
//! and is itself trained to push them away from their cluster center.
//!
//! Every numeric routine is generic over [`Scalar`] (`f32` or `f64`). The
//! `*64` aliases below name the double-precision instantiations.

pub mod augment;
pub mod cluster;
mod error;
pub mod eval;
pub mod nncore;
pub mod pipeline;
mod scalar;
pub mod synthdata;
pub mod trainer;

pub use augment::{GenHyper, StyleGenerator, StyleTargets};
pub use cluster::{assign_pseudo_labels, dbscan, k_reciprocal_rerank, ClusterAssignment, ClusterParams, DistanceMatrix};
pub use error::{Error, Result};
pub use eval::{map_cmc, pairwise_fscore, scatter_ratio, Metrics, PairScores};
pub use nncore::{ClassifierHead, Encoder, Parameters, Sgd, TrainHyper};
pub use pipeline::{adapt_stage, pretrain_stage, run_experiment, ExperimentConfig};
pub use scalar::Scalar;
pub use synthdata::{generate_dataset, split_query_gallery, Dataset, QueryGallery, SynthConfig};
pub use trainer::{adapt, adapt_observed, AdaptConfig, AugRatio, History, IterationRecord, Mode};

pub type Encoder64 = Encoder<f64>;
pub type ClassifierHead64 = ClassifierHead<f64>;
pub type StyleGenerator64 = StyleGenerator<f64>;
pub type DistanceMatrix64 = DistanceMatrix<f64>;
pub type ClusterAssignment64 = ClusterAssignment<f64>;
pub type Sgd64 = Sgd<f64>;
