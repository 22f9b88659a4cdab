//! Reference/test splits.
//!
//! Two protocols: a per-identity 80/20 split over whole real videos, and a
//! per-video half split for corpora without enough videos per person. Fake
//! videos always land on the test side.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    DatasetManifest, FeatureStoreError, FrameFeatureSequence, SplitEntry, SplitResult, VideoLabel,
    VideoRecord,
};

/// Per identity, shuffles that identity's real videos with a seeded RNG and
/// sends the first `round(ratio * count)` to the reference side (clamped so
/// each side keeps at least one). Fake videos all go to test.
pub fn split_identity_videos(
    manifest: &DatasetManifest,
    ratio: f64,
    seed: u64,
) -> Result<SplitResult, FeatureStoreError> {
    assert!(ratio > 0.0 && ratio < 1.0, "ratio must lie in (0, 1)");

    // BTreeMap keeps identity iteration order independent of manifest order.
    let mut by_identity: BTreeMap<&str, Vec<&VideoRecord>> = BTreeMap::new();
    for rec in manifest.real_records() {
        let id = rec.identity.as_deref().expect("real record has identity");
        by_identity.entry(id).or_default().push(rec);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reference = Vec::new();
    let mut test = Vec::new();
    for (identity, mut videos) in by_identity {
        if videos.len() < 2 {
            return Err(FeatureStoreError::TooFewVideos(identity.to_string()));
        }
        videos.sort_by(|a, b| a.video_id.cmp(&b.video_id));
        videos.shuffle(&mut rng);
        let n = videos.len();
        let n_ref = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
        for (i, rec) in videos.into_iter().enumerate() {
            let entry = SplitEntry { record: rec.clone(), frames: None };
            if i < n_ref {
                reference.push(entry);
            } else {
                test.push(entry);
            }
        }
    }
    for rec in manifest.fake_records() {
        test.push(SplitEntry { record: rec.clone(), frames: None });
    }
    Ok(SplitResult { reference, test, seed })
}

/// Frame ranges produced by the half-video split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HalfSplit {
    /// Empty for fake videos (their first half is discarded because the real
    /// counterpart of those frames sits in the reference set).
    pub reference: std::ops::Range<usize>,
    pub test: std::ops::Range<usize>,
}

/// Splits one video in half: a real video contributes its first
/// `ceil(frames/2)` frames to reference and the rest to test; a fake video
/// contributes only its second half, to test.
pub fn split_video_halves(
    seq: &FrameFeatureSequence,
    video_id: &str,
    label: VideoLabel,
    t: usize,
) -> Result<HalfSplit, FeatureStoreError> {
    let frames = seq.frames();
    if frames < 2 * t {
        return Err(FeatureStoreError::TooShort {
            video_id: video_id.to_string(),
            frames,
            min_frames: 2 * t,
        });
    }
    let half = frames.div_ceil(2);
    Ok(match label {
        VideoLabel::Real => HalfSplit { reference: 0..half, test: half..frames },
        VideoLabel::Fake => HalfSplit { reference: 0..0, test: half..frames },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature_store::StreamKind;
    use std::path::PathBuf;

    fn record(video_id: &str, identity: &str) -> VideoRecord {
        VideoRecord {
            video_id: video_id.to_string(),
            identity: Some(identity.to_string()),
            label: VideoLabel::Real,
            source_identity: None,
            target_identity: None,
            context: None,
            behavior_path: PathBuf::from("b"),
            appearance_path: PathBuf::from("a"),
            fps: 25,
        }
    }

    fn manifest_of(records: Vec<VideoRecord>) -> DatasetManifest {
        DatasetManifest { records, root: PathBuf::from(".") }
    }

    #[test]
    fn eighty_twenty_over_ten_videos() {
        let records = (0..10).map(|i| record(&format!("v{i}"), "alice")).collect();
        let split = split_identity_videos(&manifest_of(records), 0.8, 11).unwrap();
        assert_eq!(split.reference.len(), 8);
        assert_eq!(split.test.len(), 2);
    }

    #[test]
    fn two_videos_clamp_to_one_each() {
        let records = vec![record("v0", "alice"), record("v1", "alice")];
        let split = split_identity_videos(&manifest_of(records), 0.8, 11).unwrap();
        assert_eq!(split.reference.len(), 1);
        assert_eq!(split.test.len(), 1);
    }

    #[test]
    fn same_seed_same_partition() {
        let records: Vec<VideoRecord> = (0..7)
            .map(|i| record(&format!("v{i}"), if i < 4 { "alice" } else { "bob" }))
            .collect();
        let a = split_identity_videos(&manifest_of(records.clone()), 0.6, 99).unwrap();
        let b = split_identity_videos(&manifest_of(records), 0.6, 99).unwrap();
        let ids = |entries: &[SplitEntry]| {
            entries.iter().map(|e| e.record.video_id.clone()).collect::<Vec<_>>()
        };
        assert_eq!(ids(&a.reference), ids(&b.reference));
        assert_eq!(ids(&a.test), ids(&b.test));
    }

    #[test]
    fn single_video_identity_rejected() {
        let records = vec![record("v0", "alice")];
        assert!(matches!(
            split_identity_videos(&manifest_of(records), 0.8, 1),
            Err(FeatureStoreError::TooFewVideos(id)) if id == "alice"
        ));
    }

    fn seq_of(frames: usize) -> FrameFeatureSequence {
        FrameFeatureSequence::from_rows(StreamKind::Behavior, 1, vec![0.0; frames])
    }

    #[test]
    fn real_half_split() {
        let split = split_video_halves(&seq_of(200), "v", VideoLabel::Real, 100).unwrap();
        assert_eq!(split.reference, 0..100);
        assert_eq!(split.test, 100..200);
    }

    #[test]
    fn fake_discards_first_half() {
        let split = split_video_halves(&seq_of(200), "f", VideoLabel::Fake, 100).unwrap();
        assert!(split.reference.is_empty());
        assert_eq!(split.test, 100..200);
    }

    #[test]
    fn odd_length_reference_gets_extra_frame() {
        let split = split_video_halves(&seq_of(201), "v", VideoLabel::Real, 100).unwrap();
        assert_eq!(split.reference, 0..101);
        assert_eq!(split.test, 101..201);
    }

    #[test]
    fn too_short_rejected() {
        assert!(matches!(
            split_video_halves(&seq_of(199), "v", VideoLabel::Real, 100),
            Err(FeatureStoreError::TooShort { frames: 199, min_frames: 200, .. })
        ));
    }
}
