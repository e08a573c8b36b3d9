//! Dense encoder, classifier head, the training losses with hand-written
//! gradients, SGD with momentum and a finite-difference checker.

mod encoder;
mod gradcheck;
mod head;
mod loss;
mod optim;
mod params;
mod pretrain;

pub use encoder::{Encoder, EncoderCache};
pub use gradcheck::{grad_check, GradCheck};
pub use head::ClassifierHead;
pub use loss::{cross_entropy, pairwise_distances, triplet_batch_hard, ClsLoss};
pub use optim::Sgd;
pub use params::Parameters;
pub use pretrain::{pk_batches, pretrain_source, PretrainReport, TrainHyper};
