//! Face-swap detection from paired appearance and behavior biometrics.
//!
//! A face swap replaces the facial identity in a video but leaves the
//! original person's temporal behavior (expressions, head motion) in place.
//! This crate matches two per-clip signatures against enrolled reference
//! galleries — a static appearance descriptor and a learned temporal
//! behavior embedding — and classifies a clip as fake when the matched
//! identities disagree or the facial match is weak.
//!
//! Modules:
//! - [`feature_store`]: dataset manifests, binary frame-feature files,
//!   clip windowing, and reference/test splits.
//! - [`metric_learning`]: the behavior-embedding trainer (multi-similarity
//!   loss with hard pair mining, a small temporal conv encoder with manual
//!   backprop, P×K batch sampling).
//! - [`biometric`]: clip → embedding / descriptor extraction.
//! - [`authentication`]: gallery enrollment, identity matching, and the
//!   real/fake decision rules.
//! - [`evaluation`]: ROC sweeps, crossover, AUC, similarity distributions,
//!   and the reference-set-size ablation.
//! - [`synthetic`]: a seeded desk-scale world generator for end-to-end runs.
//! - [`pipeline`]: orchestration glue shared by the CLI subcommands.

pub mod authentication;
pub mod biometric;
pub mod evaluation;
pub mod feature_store;
pub mod metric_learning;
pub mod pipeline;
pub mod synthetic;

pub use authentication::{MatchResult, ReferenceSet, Verdict, VerdictLabel, VerdictReason};
pub use biometric::{AppearanceDescriptor, BehaviorEmbedding};
pub use feature_store::{
    ClipFeatureMatrix, DatasetManifest, FrameFeatureSequence, SplitResult, VideoLabel, VideoRecord,
};
pub use metric_learning::{EncoderParams, MsLossConfig, TrainConfig, TrainLog};
pub use synthetic::WorldConfig;
