//! P×K batch sampling: P identities, K clips each, every clip a uniformly
//! random t-frame window of one of the identity's videos.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::MetricLearningError;
use crate::feature_store::{window_clips_in_range, ClipFeatureMatrix, FrameFeatureSequence};

/// One video usable for sampling: its behavior sequence plus the window
/// starts the split protocol allows.
#[derive(Debug, Clone)]
pub struct ClipSource {
    pub video_id: String,
    pub seq: FrameFeatureSequence,
    /// Inclusive range of permitted window start frames.
    pub start_min: usize,
    pub start_max: usize,
}

#[derive(Debug, Clone)]
pub struct IdentityClips {
    pub label: String,
    pub sources: Vec<ClipSource>,
}

/// Training index: identities sorted by label, each with at least one video
/// long enough for a t-frame window.
#[derive(Debug, Clone)]
pub struct ClipIndex {
    pub identities: Vec<IdentityClips>,
    pub t: usize,
}

impl ClipIndex {
    /// Builds the index, dropping videos shorter than t (within their
    /// permitted range) and identities left with no usable video.
    pub fn new(mut identities: Vec<IdentityClips>, t: usize) -> Self {
        for identity in &mut identities {
            identity.sources.retain(|s| s.start_max >= s.start_min);
        }
        identities.retain(|i| !i.sources.is_empty());
        identities.sort_by(|a, b| a.label.cmp(&b.label));
        Self { identities, t }
    }

    /// Helper for whole-video sources.
    pub fn source_for(video_id: &str, seq: FrameFeatureSequence, t: usize) -> Option<ClipSource> {
        if seq.frames() < t {
            return None;
        }
        let start_max = seq.frames() - t;
        Some(ClipSource { video_id: video_id.to_string(), seq, start_min: 0, start_max })
    }
}

/// Draws a batch of P·K (clip, identity-index) pairs. Identities are drawn
/// without replacement; an identity's videos are drawn without replacement
/// when it has at least K, otherwise with replacement; window starts are
/// uniform over the permitted range.
pub fn sample_batch(
    index_set: &ClipIndex,
    identities_per_batch: usize,
    clips_per_identity: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(ClipFeatureMatrix, usize)>, MetricLearningError> {
    let available = index_set.identities.len();
    if available < identities_per_batch {
        return Err(MetricLearningError::InsufficientIdentities {
            needed: identities_per_batch,
            found: available,
        });
    }
    let t = index_set.t;
    let chosen = index::sample(rng, available, identities_per_batch);
    let mut batch = Vec::with_capacity(identities_per_batch * clips_per_identity);
    for id_idx in chosen {
        let identity = &index_set.identities[id_idx];
        let n_videos = identity.sources.len();
        let video_picks: Vec<usize> = if n_videos >= clips_per_identity {
            index::sample(rng, n_videos, clips_per_identity).into_vec()
        } else {
            (0..clips_per_identity).map(|_| rng.gen_range(0..n_videos)).collect()
        };
        for v in video_picks {
            let source = &identity.sources[v];
            let start = rng.gen_range(source.start_min..=source.start_max);
            let clip = window_clips_in_range(
                &source.seq,
                &source.video_id,
                start..start + t,
                t,
                t,
            )
            .pop()
            .expect("window within permitted range");
            batch.push((clip, id_idx));
        }
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature_store::StreamKind;
    use rand::SeedableRng;

    fn index_of(n_identities: usize, videos_each: usize, frames: usize, t: usize) -> ClipIndex {
        let identities = (0..n_identities)
            .map(|i| IdentityClips {
                label: format!("id{i:02}"),
                sources: (0..videos_each)
                    .filter_map(|v| {
                        let data: Vec<f64> =
                            (0..frames * 2).map(|k| (i * 1000 + v * 100 + k) as f64).collect();
                        let seq = FrameFeatureSequence::from_rows(StreamKind::Behavior, 2, data);
                        ClipIndex::source_for(&format!("id{i:02}_v{v}"), seq, t)
                    })
                    .collect(),
            })
            .collect();
        ClipIndex::new(identities, t)
    }

    #[test]
    fn forced_composition() {
        let index_set = index_of(2, 1, 50, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = sample_batch(&index_set, 2, 2, &mut rng).unwrap();
        assert_eq!(batch.len(), 4);
        let mut labels: Vec<usize> = batch.iter().map(|(_, l)| *l).collect();
        labels.sort();
        assert_eq!(labels, vec![0, 0, 1, 1]);
    }

    #[test]
    fn canonical_batch_size() {
        let index_set = index_of(32, 2, 120, 100);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch = sample_batch(&index_set, 32, 8, &mut rng).unwrap();
        assert_eq!(batch.len(), 256);
    }

    #[test]
    fn deterministic_given_rng_state() {
        let index_set = index_of(4, 3, 60, 20);
        let draw = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample_batch(&index_set, 3, 4, &mut rng).unwrap()
        };
        let a = draw(7);
        let b = draw(7);
        assert_eq!(a.len(), b.len());
        for ((ca, la), (cb, lb)) in a.iter().zip(&b) {
            assert_eq!(la, lb);
            assert_eq!(ca.origin, cb.origin);
            assert_eq!(ca.data, cb.data);
        }
    }

    #[test]
    fn too_few_identities_rejected() {
        let index_set = index_of(3, 1, 50, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(
            sample_batch(&index_set, 4, 2, &mut rng),
            Err(MetricLearningError::InsufficientIdentities { needed: 4, found: 3 })
        ));
    }

    #[test]
    fn short_videos_dropped_from_index() {
        let index_set = index_of(2, 1, 5, 10);
        assert!(index_set.identities.is_empty());
    }
}
