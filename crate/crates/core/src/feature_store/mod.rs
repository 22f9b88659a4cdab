//! Dataset manifests, frame-feature files, clip windowing, and splits.
//!
//! A dataset is a tab-separated manifest plus one behavior and one
//! appearance feature file per video. Feature files hold a frames × dim
//! float32 matrix (one row per frame); windowing slices a file into
//! fixed-length clips and transposes each into a dim × t matrix.

mod feature_file;
mod manifest;
mod split;
mod window;

pub use feature_file::{read_feature_file, write_feature_file, StreamKind};
pub use manifest::{parse_manifest, write_manifest};
pub use split::{split_identity_videos, split_video_halves, HalfSplit};
pub use window::{window_clips, window_clips_in_range};

use std::ops::Range;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureStoreError {
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate video_id {0:?}")]
    DuplicateVideoId(String),
    #[error("missing feature file {0}")]
    MissingFeatureFile(PathBuf),
    #[error("{path}: bad magic (expected \"BGF1\")")]
    BadMagic { path: PathBuf },
    #[error("{path}: unsupported format version {found} (expected {expected})")]
    VersionMismatch { path: PathBuf, found: u32, expected: u32 },
    #[error("{path}: truncated payload ({detail})")]
    TruncatedPayload { path: PathBuf, detail: String },
    #[error("{path}: malformed header ({detail})")]
    MalformedHeader { path: PathBuf, detail: String },
    #[error("{path}: non-finite value at frame {frame}, component {component}")]
    NonFiniteValue { path: PathBuf, frame: usize, component: usize },
    #[error("identity {0:?} has fewer than 2 real videos")]
    TooFewVideos(String),
    #[error("video {video_id:?} too short: {frames} frames, need at least {min_frames}")]
    TooShort { video_id: String, frames: usize, min_frames: usize },
    #[error("manifest mixes frame rates ({0} vs {1}); re-encode upstream")]
    MixedFps(u32, u32),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Real or face-swap video.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VideoLabel {
    Real,
    Fake,
}

impl VideoLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            VideoLabel::Real => "real",
            VideoLabel::Fake => "fake",
        }
    }
}

/// One manifest row: a video with its identity bookkeeping and feature paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoRecord {
    pub video_id: String,
    /// Set for real videos; fakes may leave it empty.
    pub identity: Option<String>,
    pub label: VideoLabel,
    /// Identity whose face was mapped in (fakes only).
    pub source_identity: Option<String>,
    /// Identity whose video was overwritten (fakes only).
    pub target_identity: Option<String>,
    /// Free-form recording context; used only by the behavior analysis.
    pub context: Option<String>,
    /// Resolved (absolute or manifest-relative already joined) paths.
    pub behavior_path: PathBuf,
    pub appearance_path: PathBuf,
    pub fps: u32,
}

/// A validated dataset manifest.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub records: Vec<VideoRecord>,
    /// Directory the manifest's relative paths were resolved against.
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn real_records(&self) -> impl Iterator<Item = &VideoRecord> {
        self.records.iter().filter(|r| r.label == VideoLabel::Real)
    }

    pub fn fake_records(&self) -> impl Iterator<Item = &VideoRecord> {
        self.records.iter().filter(|r| r.label == VideoLabel::Fake)
    }

    /// Rejects manifests mixing frame rates; feature resampling is out of scope.
    pub fn require_uniform_fps(&self) -> Result<u32, FeatureStoreError> {
        let mut fps = None;
        for rec in &self.records {
            match fps {
                None => fps = Some(rec.fps),
                Some(f) if f != rec.fps => {
                    return Err(FeatureStoreError::MixedFps(f, rec.fps));
                }
                _ => {}
            }
        }
        Ok(fps.unwrap_or(25))
    }
}

/// A frames × dim feature matrix loaded from one feature file.
///
/// Stored row-major per frame in double precision; the on-disk format is
/// single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatureSequence {
    dim: usize,
    frames: usize,
    stream: StreamKind,
    data: Vec<f64>,
}

impl FrameFeatureSequence {
    /// Builds a sequence from row-major frame data. Panics on shape mismatch
    /// or non-finite values; callers constructing from untrusted bytes go
    /// through [`read_feature_file`] which reports errors instead.
    pub fn from_rows(stream: StreamKind, dim: usize, data: Vec<f64>) -> Self {
        assert!(dim >= 1, "dim must be >= 1");
        assert!(data.len() % dim == 0, "data length not a multiple of dim");
        let frames = data.len() / dim;
        assert!(frames >= 1, "need at least one frame");
        assert!(data.iter().all(|v| v.is_finite()), "non-finite feature value");
        Self { dim, frames, stream, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn stream(&self) -> StreamKind {
        self.stream
    }

    /// One frame's feature vector.
    pub fn row(&self, frame: usize) -> &[f64] {
        &self.data[frame * self.dim..(frame + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

/// A dim × t clip cut from a feature sequence (column per frame).
#[derive(Debug, Clone, PartialEq)]
pub struct ClipFeatureMatrix {
    pub dim: usize,
    pub t: usize,
    /// Row-major dim × t: element (d, tau) at `d * t + tau`.
    pub data: Vec<f64>,
    pub origin: ClipOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipOrigin {
    pub video_id: String,
    pub start_frame: usize,
}

impl ClipFeatureMatrix {
    /// The values of one feature component across the clip's t frames.
    pub fn component(&self, d: usize) -> &[f64] {
        &self.data[d * self.t..(d + 1) * self.t]
    }
}

/// One side of a split: a record plus an optional frame range restriction.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitEntry {
    pub record: VideoRecord,
    /// Frames usable by this side; `None` means the whole video.
    pub frames: Option<Range<usize>>,
}

/// Reference/test partition of a manifest.
#[derive(Debug, Clone)]
pub struct SplitResult {
    pub reference: Vec<SplitEntry>,
    pub test: Vec<SplitEntry>,
    pub seed: u64,
}
