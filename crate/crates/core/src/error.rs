use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },

    #[error("batch contains a single label; triplet loss needs negatives")]
    SingleLabel,

    #[error("camera {camera} out of range for {n_cameras} cameras")]
    CameraOutOfRange { camera: usize, n_cameras: usize },

    #[error("need more than k1 = {k1} samples for re-ranking, got {n}")]
    TooFewForRerank { n: usize, k1: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("cluster {0} has no members")]
    EmptyCluster(usize),

    #[error("sample {0} is noise but was used where a pseudo-label is required")]
    NoiseSample(usize),

    #[error("need {needed} clusters with at least two members, found {found}")]
    TooFewClusters { needed: usize, found: usize },

    #[error("query/gallery split impossible: {0}")]
    Split(String),

    #[error("no query has a cross-camera positive in the gallery")]
    NoValidQueries,

    #[error("need at least two classes, found {0}")]
    SingleClass(usize),

    #[error("stopped by caller: {0}")]
    Interrupted(String),
}
