//! Behavior-embedding trainer.
//!
//! Clips are mapped to unit embeddings by a small temporal-convolution
//! encoder trained with a multi-similarity metric-learning objective: per
//! anchor, hard positive and negative pairs are mined from the in-batch
//! cosine similarity matrix, soft-weighted, and pulled/pushed through a
//! log-sum-exp loss. All gradients are derived and propagated by hand.

mod encoder;
mod loss;
mod mining;
mod sampler;
mod similarity;
mod train;

pub use encoder::{
    load_checkpoint, normalize_embedding, normalize_embedding_vjp, save_checkpoint, EncoderGrad,
    EncoderParams, Layer, Tape,
};
pub use loss::{ms_loss, ms_loss_grad, pair_weights, MsLossConfig, PairWeights};
pub use mining::{mine_pairs, MiningResult};
pub use sampler::{sample_batch, ClipIndex, ClipSource, IdentityClips};
pub use similarity::{cosine_similarity, pairwise_similarity, SimilarityMatrix};
pub use train::{train, TrainConfig, TrainLog};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricLearningError {
    #[error("zero-norm vector")]
    ZeroVector,
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("embedding {index} is not unit length (norm {norm})")]
    NonUnitInput { index: usize, norm: f64 },
    #[error("(near-)constant vector cannot be normalized to zero mean and unit length")]
    DegenerateVector,
    #[error("encoder shape mismatch at layer {layer}: {detail}")]
    ShapeMismatch { layer: usize, detail: String },
    #[error("need {needed} identities with usable clips, found {found}")]
    InsufficientIdentities { needed: usize, found: usize },
    #[error("loss became non-finite at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error("{path}: bad magic (expected \"BNET\")")]
    BadMagic { path: std::path::PathBuf },
    #[error("{path}: unsupported checkpoint version {found} (expected {expected})")]
    VersionMismatch { path: std::path::PathBuf, found: u32, expected: u32 },
    #[error("{path}: truncated checkpoint ({detail})")]
    TruncatedPayload { path: std::path::PathBuf, detail: String },
    #[error("{path}: invalid checkpoint ({detail})")]
    InvalidData { path: std::path::PathBuf, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}
