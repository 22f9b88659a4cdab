//! Similarity distributions: appearance of fakes against their source and
//! target identities, and pairwise behavior similarity grouped by identity
//! and recording context.

use super::{EmbeddedClip, EvaluationError};
use crate::authentication::ReferenceSet;
use crate::feature_store::VideoLabel;

pub const HISTOGRAM_BINS: usize = 100;
const BIN_WIDTH: f64 = 0.02;

/// Fixed-bin histogram over [-1, 1] (width 0.02) with a running mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub counts: Vec<u64>,
    sum: f64,
    n: u64,
}

impl Default for Histogram {
    fn default() -> Self {
        Self { counts: vec![0; HISTOGRAM_BINS], sum: 0.0, n: 0 }
    }
}

impl Histogram {
    pub fn add(&mut self, value: f64) {
        let clamped = value.clamp(-1.0, 1.0);
        let bin = (((clamped + 1.0) / BIN_WIDTH) as usize).min(HISTOGRAM_BINS - 1);
        self.counts[bin] += 1;
        self.sum += clamped;
        self.n += 1;
    }

    pub fn total(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    pub fn bin_bounds(&self, bin: usize) -> (f64, f64) {
        let low = -1.0 + bin as f64 * BIN_WIDTH;
        (low, low + BIN_WIDTH)
    }
}

/// Which identity a fake clip is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    VsSource,
    VsTarget,
}

/// For each fake clip, the best appearance similarity against the named
/// (source or target) identity's gallery. In a convincing swap the source
/// similarity dominates; a failed swap leaves the target dominant.
pub fn similarity_distributions(
    fake_clips: &[EmbeddedClip],
    refs: &ReferenceSet,
    grouping: Grouping,
) -> Result<Histogram, EvaluationError> {
    let mut hist = Histogram::default();
    for clip in fake_clips {
        debug_assert_eq!(clip.truth, VideoLabel::Fake);
        let named = match grouping {
            Grouping::VsSource => clip.source_identity.as_deref(),
            Grouping::VsTarget => clip.target_identity.as_deref(),
        };
        let named = named.ok_or_else(|| {
            EvaluationError::UnknownIdentity("<missing source/target label>".to_string())
        })?;
        let gallery = refs
            .gallery(named)
            .ok_or_else(|| EvaluationError::UnknownIdentity(named.to_string()))?;
        let best = gallery
            .appearance
            .iter()
            .map(|col| col.iter().zip(&clip.descriptor.0).map(|(c, q)| c * q).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        hist.add(best);
    }
    Ok(hist)
}

/// Pairwise behavior similarities of real clips, split into the three
/// informative groupings. Pairs of different people in different contexts
/// are not collected.
#[derive(Debug, Clone)]
pub struct ContextHistograms {
    pub same_person_same_context: Histogram,
    pub same_person_diff_context: Histogram,
    pub diff_people_same_context: Histogram,
}

pub fn behavior_context_distributions(
    real_clips: &[EmbeddedClip],
) -> Result<ContextHistograms, EvaluationError> {
    let mut same_same = Histogram::default();
    let mut same_diff = Histogram::default();
    let mut diff_same = Histogram::default();

    for (i, a) in real_clips.iter().enumerate() {
        let (id_a, ctx_a) = keys(a)?;
        for b in &real_clips[i + 1..] {
            let (id_b, ctx_b) = keys(b)?;
            let hist = match (id_a == id_b, ctx_a == ctx_b) {
                (true, true) => &mut same_same,
                (true, false) => &mut same_diff,
                (false, true) => &mut diff_same,
                (false, false) => continue,
            };
            let sim: f64 =
                a.embedding.0.iter().zip(&b.embedding.0).map(|(x, y)| x * y).sum();
            hist.add(sim);
        }
    }

    if same_same.total() == 0 {
        return Err(EvaluationError::InsufficientGroups("same person, same context"));
    }
    if same_diff.total() == 0 {
        return Err(EvaluationError::InsufficientGroups("same person, different contexts"));
    }
    if diff_same.total() == 0 {
        return Err(EvaluationError::InsufficientGroups("different people, same context"));
    }
    Ok(ContextHistograms {
        same_person_same_context: same_same,
        same_person_diff_context: same_diff,
        diff_people_same_context: diff_same,
    })
}

fn keys(clip: &EmbeddedClip) -> Result<(&str, &str), EvaluationError> {
    let id = clip
        .identity
        .as_deref()
        .ok_or_else(|| EvaluationError::UnknownIdentity(clip.video_id.clone()))?;
    Ok((id, clip.context.as_deref().unwrap_or("")))
}
