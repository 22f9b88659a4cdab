//! Per-clip biometric signatures: the learned behavior embedding and the
//! temporally averaged appearance descriptor.

use thiserror::Error;

use crate::feature_store::{ClipFeatureMatrix, FrameFeatureSequence};
use crate::metric_learning::{EncoderParams, MetricLearningError};

#[derive(Debug, Error)]
pub enum BiometricError {
    #[error(transparent)]
    Encoder(#[from] MetricLearningError),
    #[error("appearance window degenerates to a (near-)zero mean")]
    DegenerateVector,
    #[error("window [{start}, {end}) exceeds the {frames}-frame sequence")]
    WindowOutOfBounds { start: usize, end: usize, frames: usize },
}

/// Unit-length, zero-sum behavior embedding of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorEmbedding(pub Vec<f64>);

/// Unit-length appearance descriptor of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceDescriptor(pub Vec<f64>);

/// Runs the encoder and discards the tape.
pub fn behavior_embed(
    params: &EncoderParams,
    clip: &ClipFeatureMatrix,
) -> Result<BehaviorEmbedding, BiometricError> {
    let (embedding, _) = params.forward(clip)?;
    Ok(BehaviorEmbedding(embedding))
}

/// Component-wise mean over a t-frame window, scaled to unit length. The
/// normalization makes every downstream dot product a cosine similarity.
pub fn appearance_descriptor(
    seq: &FrameFeatureSequence,
    start: usize,
    t: usize,
) -> Result<AppearanceDescriptor, BiometricError> {
    let end = start + t;
    if end > seq.frames() || t == 0 {
        return Err(BiometricError::WindowOutOfBounds { start, end, frames: seq.frames() });
    }
    let dim = seq.dim();
    let mut mean = vec![0.0; dim];
    for frame in start..end {
        for (m, v) in mean.iter_mut().zip(seq.row(frame)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= t as f64;
    }
    let norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= 1e-12 {
        return Err(BiometricError::DegenerateVector);
    }
    for m in &mut mean {
        *m /= norm;
    }
    Ok(AppearanceDescriptor(mean))
}
