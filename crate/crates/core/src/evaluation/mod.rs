//! Measurement protocol: per-clip scoring, ROC sweeps over the facial
//! threshold, crossover accuracy, AUC, similarity distributions, and the
//! reference-set-size ablation.

mod ablation;
mod distributions;
mod roc;

pub use ablation::{reference_ablation, AblationPoint};
pub use distributions::{
    behavior_context_distributions, similarity_distributions, ContextHistograms, Grouping,
    Histogram,
};
pub use roc::{
    accuracy_at, auc, auc_trapezoid, crossover, default_threshold_grid, roc_sweep, Accuracy,
    RocCurve,
};

use rayon::prelude::*;
use thiserror::Error;

use crate::authentication::{fakeness_score, AuthenticationError, MatchResult, ReferenceSet};
use crate::biometric::{AppearanceDescriptor, BehaviorEmbedding};
use crate::feature_store::VideoLabel;

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("need at least one real and one fake record")]
    DegenerateLabels,
    #[error("real and fake accuracy curves never intersect on the grid")]
    NoCrossover,
    #[error("identity {0:?} is not enrolled in the reference set")]
    UnknownIdentity(String),
    #[error("grouping {0:?} has no pairs; need at least 2 identities and 2 contexts")]
    InsufficientGroups(&'static str),
    #[error("identity {identity:?} has {have} enrollment clips, ablation size needs {need}")]
    InsufficientClips { identity: String, have: usize, need: usize },
    #[error(transparent)]
    Authentication(#[from] AuthenticationError),
}

/// A test clip reduced to its biometric signatures and bookkeeping.
#[derive(Debug, Clone)]
pub struct EmbeddedClip {
    pub video_id: String,
    pub start_frame: usize,
    pub truth: VideoLabel,
    /// Real clips carry their identity; fakes usually do not.
    pub identity: Option<String>,
    pub source_identity: Option<String>,
    pub target_identity: Option<String>,
    pub context: Option<String>,
    pub descriptor: AppearanceDescriptor,
    pub embedding: BehaviorEmbedding,
}

/// One scored test clip.
#[derive(Debug, Clone)]
pub struct EvalRecord {
    pub video_id: String,
    pub start_frame: usize,
    pub truth: VideoLabel,
    /// Fakeness score in [0, 2].
    pub score: f64,
    pub match_result: MatchResult,
    pub source_identity: Option<String>,
    pub target_identity: Option<String>,
}

/// Scores every clip against the reference set. Clip order is preserved;
/// scoring is pure, so the records do not depend on thread count.
pub fn evaluate_clips(
    clips: &[EmbeddedClip],
    refs: &ReferenceSet,
) -> Result<Vec<EvalRecord>, EvaluationError> {
    clips
        .par_iter()
        .map(|clip| {
            let (score, match_result) = fakeness_score(&clip.descriptor, &clip.embedding, refs)?;
            Ok(EvalRecord {
                video_id: clip.video_id.clone(),
                start_frame: clip.start_frame,
                truth: clip.truth,
                score,
                match_result,
                source_identity: clip.source_identity.clone(),
                target_identity: clip.target_identity.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::authentication::enroll;

    fn unit(v: &[f64]) -> Vec<f64> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect()
    }

    #[test]
    fn empty_test_set_gives_empty_records() {
        let refs = enroll(&[(
            "a".to_string(),
            BehaviorEmbedding(vec![1.0, 0.0]),
            AppearanceDescriptor(vec![0.0, 1.0]),
        )])
        .unwrap();
        assert!(evaluate_clips(&[], &refs).unwrap().is_empty());
    }

    #[test]
    fn reference_column_self_matches_with_zero_score() {
        let beh = unit(&[0.4, -0.6, 0.7]);
        let app = unit(&[0.2, 0.9, -0.1]);
        let refs = enroll(&[
            ("a".to_string(), BehaviorEmbedding(beh.clone()), AppearanceDescriptor(app.clone())),
            (
                "b".to_string(),
                BehaviorEmbedding(unit(&[-0.9, 0.1, 0.2])),
                AppearanceDescriptor(unit(&[-0.2, -0.9, 0.3])),
            ),
        ])
        .unwrap();
        let clip = EmbeddedClip {
            video_id: "v".to_string(),
            start_frame: 0,
            truth: VideoLabel::Real,
            identity: Some("a".to_string()),
            source_identity: None,
            target_identity: None,
            context: None,
            descriptor: AppearanceDescriptor(app),
            embedding: BehaviorEmbedding(beh),
        };
        let records = evaluate_clips(&[clip], &refs).unwrap();
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert!(r.score.abs() < 1e-9, "score {}", r.score);
        assert_eq!(r.match_result.appearance_identity, "a");
        assert_eq!(r.match_result.behavior_identity, "a");
        assert!((r.match_result.appearance_similarity - 1.0).abs() < 1e-9);
        assert!((r.match_result.behavior_similarity - 1.0).abs() < 1e-9);
    }
}
