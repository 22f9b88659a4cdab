//! Enrollment galleries and the real/fake decision rules.
//!
//! A clip is authenticated by matching its appearance descriptor and its
//! behavior embedding independently against per-identity galleries. It is
//! real only when both matches name the same identity and the facial match
//! is confident; a mismatch or a weak facial match means fake. Only the
//! facial confidence is thresholded: a face swap alters appearance, so a
//! weak facial match is itself suspicious, while the behavior match is
//! trusted to name whoever is actually moving.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::biometric::{AppearanceDescriptor, BehaviorEmbedding};

#[derive(Debug, Error)]
pub enum AuthenticationError {
    #[error("cannot enroll an empty clip list")]
    EmptyEnrollment,
    #[error("query has {query} components, gallery columns have {gallery}")]
    DimensionMismatch { query: usize, gallery: usize },
    #[error("reference set has no identities")]
    EmptyReferenceSet,
    #[error("{path}: bad magic (expected \"BREF\")")]
    BadMagic { path: std::path::PathBuf },
    #[error("{path}: unsupported reference-set version {found} (expected {expected})")]
    VersionMismatch { path: std::path::PathBuf, found: u32, expected: u32 },
    #[error("{path}: truncated reference set ({detail})")]
    TruncatedPayload { path: std::path::PathBuf, detail: String },
    #[error("{path}: invalid reference set ({detail})")]
    InvalidData { path: std::path::PathBuf, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One identity's enrolled galleries; appearance and behavior columns are
/// aligned per clip.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityGallery {
    pub label: String,
    pub appearance: Vec<Vec<f64>>,
    pub behavior: Vec<Vec<f64>>,
}

impl IdentityGallery {
    pub fn clip_count(&self) -> usize {
        self.appearance.len()
    }
}

/// All enrolled identities, sorted by label.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    pub galleries: Vec<IdentityGallery>,
}

/// Which gallery a query is matched against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GalleryKind {
    Appearance,
    Behavior,
}

/// Best identities per biometric with their similarities.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub appearance_identity: String,
    pub appearance_similarity: f64,
    pub behavior_identity: String,
    /// Diagnostic only; the decision rules never threshold it.
    pub behavior_similarity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictLabel {
    Real,
    Fake,
}

impl VerdictLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictLabel::Real => "real",
            VerdictLabel::Fake => "fake",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictReason {
    Matched,
    IdentityMismatch,
    LowConfidence,
}

impl VerdictReason {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictReason::Matched => "matched",
            VerdictReason::IdentityMismatch => "identity_mismatch",
            VerdictReason::LowConfidence => "low_confidence",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub label: VerdictLabel,
    pub reason: VerdictReason,
    pub match_result: MatchResult,
    pub threshold: f64,
}

impl ReferenceSet {
    pub fn identity_labels(&self) -> impl Iterator<Item = &str> {
        self.galleries.iter().map(|g| g.label.as_str())
    }

    pub fn contains(&self, label: &str) -> bool {
        self.galleries.binary_search_by(|g| g.label.as_str().cmp(label)).is_ok()
    }

    pub fn gallery(&self, label: &str) -> Option<&IdentityGallery> {
        self.galleries
            .binary_search_by(|g| g.label.as_str().cmp(label))
            .ok()
            .map(|i| &self.galleries[i])
    }
}

/// Assembles per-identity galleries from enrollment clips. Identities come
/// out sorted lexicographically; every enrolled identity holds at least one
/// aligned column pair.
pub fn enroll(
    clips: &[(String, BehaviorEmbedding, AppearanceDescriptor)],
) -> Result<ReferenceSet, AuthenticationError> {
    if clips.is_empty() {
        return Err(AuthenticationError::EmptyEnrollment);
    }
    let mut by_identity: BTreeMap<&str, (Vec<Vec<f64>>, Vec<Vec<f64>>)> = BTreeMap::new();
    for (identity, behavior, appearance) in clips {
        let entry = by_identity.entry(identity).or_default();
        entry.0.push(appearance.0.clone());
        entry.1.push(behavior.0.clone());
    }
    let galleries = by_identity
        .into_iter()
        .map(|(label, (appearance, behavior))| IdentityGallery {
            label: label.to_string(),
            appearance,
            behavior,
        })
        .collect();
    Ok(ReferenceSet { galleries })
}

/// Finds the identity whose gallery holds the column most similar to the
/// query (exhaustive max over columns, argmax over identities). Ties go to
/// the lexicographically smallest identity; the winning similarity is
/// clamped to [-1, 1] so confidence scores derived from it stay in range.
pub fn match_identity(
    query: &[f64],
    refs: &ReferenceSet,
    kind: GalleryKind,
) -> Result<(String, f64), AuthenticationError> {
    if refs.galleries.is_empty() {
        return Err(AuthenticationError::EmptyReferenceSet);
    }
    let mut best: Option<(&str, f64)> = None;
    for gallery in &refs.galleries {
        let columns = match kind {
            GalleryKind::Appearance => &gallery.appearance,
            GalleryKind::Behavior => &gallery.behavior,
        };
        let mut gallery_best = f64::NEG_INFINITY;
        for column in columns {
            if column.len() != query.len() {
                return Err(AuthenticationError::DimensionMismatch {
                    query: query.len(),
                    gallery: column.len(),
                });
            }
            let dot: f64 = column.iter().zip(query).map(|(c, q)| c * q).sum();
            gallery_best = gallery_best.max(dot);
        }
        // Galleries are sorted, so strict > keeps the smallest label on ties.
        if best.map_or(true, |(_, s)| gallery_best > s) {
            best = Some((&gallery.label, gallery_best));
        }
    }
    let (label, similarity) = best.expect("non-empty reference set");
    Ok((label.to_string(), similarity.clamp(-1.0, 1.0)))
}

/// Matches both biometrics and applies the decision rules:
/// real iff the matched identities agree and the facial similarity reaches
/// `tau_f`; otherwise fake, reporting the identity mismatch first.
pub fn classify(
    appearance: &AppearanceDescriptor,
    behavior: &BehaviorEmbedding,
    refs: &ReferenceSet,
    tau_f: f64,
) -> Result<Verdict, AuthenticationError> {
    let match_result = match_both(appearance, behavior, refs)?;
    let (label, reason) = if match_result.appearance_identity != match_result.behavior_identity {
        (VerdictLabel::Fake, VerdictReason::IdentityMismatch)
    } else if match_result.appearance_similarity < tau_f {
        (VerdictLabel::Fake, VerdictReason::LowConfidence)
    } else {
        (VerdictLabel::Real, VerdictReason::Matched)
    };
    Ok(Verdict { label, reason, match_result, threshold: tau_f })
}

/// Threshold-free scalarization of the decision rules: 2 on an identity
/// mismatch (dominates every confidence-based score), otherwise
/// 1 − facial similarity. `score > 1 − tau_f` reproduces [`classify`]
/// exactly for any `tau_f` in [0, 1].
pub fn fakeness_score(
    appearance: &AppearanceDescriptor,
    behavior: &BehaviorEmbedding,
    refs: &ReferenceSet,
) -> Result<(f64, MatchResult), AuthenticationError> {
    let match_result = match_both(appearance, behavior, refs)?;
    let score = score_of(&match_result);
    Ok((score, match_result))
}

/// Score of an already-computed match (see [`fakeness_score`]).
pub fn score_of(match_result: &MatchResult) -> f64 {
    if match_result.appearance_identity != match_result.behavior_identity {
        2.0
    } else {
        1.0 - match_result.appearance_similarity
    }
}

fn match_both(
    appearance: &AppearanceDescriptor,
    behavior: &BehaviorEmbedding,
    refs: &ReferenceSet,
) -> Result<MatchResult, AuthenticationError> {
    let (appearance_identity, appearance_similarity) =
        match_identity(&appearance.0, refs, GalleryKind::Appearance)?;
    let (behavior_identity, behavior_similarity) =
        match_identity(&behavior.0, refs, GalleryKind::Behavior)?;
    Ok(MatchResult {
        appearance_identity,
        appearance_similarity,
        behavior_identity,
        behavior_similarity,
    })
}

const REFS_MAGIC: [u8; 4] = *b"BREF";
const REFS_VERSION: u32 = 1;

pub fn save_reference_set(path: &Path, refs: &ReferenceSet) -> Result<(), AuthenticationError> {
    let file = File::create(path)
        .map_err(|source| AuthenticationError::Io { path: path.to_path_buf(), source })?;
    let mut w = BufWriter::new(file);
    write_reference_set_to(&mut w, refs, path)?;
    w.flush().map_err(|source| AuthenticationError::Io { path: path.to_path_buf(), source })
}

pub fn load_reference_set(path: &Path) -> Result<ReferenceSet, AuthenticationError> {
    let file = File::open(path)
        .map_err(|source| AuthenticationError::Io { path: path.to_path_buf(), source })?;
    read_reference_set_from(BufReader::new(file), path)
}

pub fn write_reference_set_to<W: Write>(
    w: &mut W,
    refs: &ReferenceSet,
    path: &Path,
) -> Result<(), AuthenticationError> {
    let io_err = |source| AuthenticationError::Io { path: path.to_path_buf(), source };
    let mut buf = Vec::new();
    buf.extend_from_slice(&REFS_MAGIC);
    buf.extend_from_slice(&REFS_VERSION.to_le_bytes());
    buf.extend_from_slice(&(refs.galleries.len() as u32).to_le_bytes());
    for gallery in &refs.galleries {
        let label = gallery.label.as_bytes();
        buf.extend_from_slice(&(label.len() as u16).to_le_bytes());
        buf.extend_from_slice(label);
        let m = gallery.appearance.len();
        let appearance_dim = gallery.appearance.first().map_or(0, Vec::len);
        let behavior_dim = gallery.behavior.first().map_or(0, Vec::len);
        buf.extend_from_slice(&(m as u32).to_le_bytes());
        buf.extend_from_slice(&(appearance_dim as u32).to_le_bytes());
        buf.extend_from_slice(&(behavior_dim as u32).to_le_bytes());
        for column in &gallery.appearance {
            for &v in column {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        for column in &gallery.behavior {
            for &v in column {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    w.write_all(&buf).map_err(io_err)
}

pub fn read_reference_set_from<R: Read>(
    mut r: R,
    path: &Path,
) -> Result<ReferenceSet, AuthenticationError> {
    let truncated = |detail: &str| AuthenticationError::TruncatedPayload {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    };
    let invalid = |detail: String| AuthenticationError::InvalidData {
        path: path.to_path_buf(),
        detail,
    };

    let mut head = [0u8; 12];
    r.read_exact(&mut head).map_err(|_| truncated("header"))?;
    if head[0..4] != REFS_MAGIC {
        return Err(AuthenticationError::BadMagic { path: path.to_path_buf() });
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != REFS_VERSION {
        return Err(AuthenticationError::VersionMismatch {
            path: path.to_path_buf(),
            found: version,
            expected: REFS_VERSION,
        });
    }
    let count = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    if count > 1 << 20 {
        return Err(invalid(format!("implausible identity count {count}")));
    }

    let mut galleries = Vec::with_capacity(count);
    let mut dims: Option<(usize, usize)> = None;
    for _ in 0..count {
        let mut len_bytes = [0u8; 2];
        r.read_exact(&mut len_bytes).map_err(|_| truncated("label length"))?;
        let label_len = u16::from_le_bytes(len_bytes) as usize;
        let mut label_bytes = vec![0u8; label_len];
        r.read_exact(&mut label_bytes).map_err(|_| truncated("label"))?;
        let label = String::from_utf8(label_bytes)
            .map_err(|_| invalid("identity label is not UTF-8".to_string()))?;

        let mut shape = [0u8; 12];
        r.read_exact(&mut shape).map_err(|_| truncated("gallery shape"))?;
        let m = u32::from_le_bytes(shape[0..4].try_into().unwrap()) as usize;
        let appearance_dim = u32::from_le_bytes(shape[4..8].try_into().unwrap()) as usize;
        let behavior_dim = u32::from_le_bytes(shape[8..12].try_into().unwrap()) as usize;
        if m == 0 {
            return Err(invalid(format!("identity {label:?} has an empty gallery")));
        }
        if appearance_dim == 0 || behavior_dim == 0 {
            return Err(invalid(format!("identity {label:?} declares a zero dimension")));
        }
        match dims {
            None => dims = Some((appearance_dim, behavior_dim)),
            Some(d) if d != (appearance_dim, behavior_dim) => {
                return Err(invalid(format!(
                    "identity {label:?} dimensions {appearance_dim}/{behavior_dim} disagree with earlier {}/{}",
                    d.0, d.1
                )));
            }
            _ => {}
        }

        let mut read_columns = |cols: usize, dim: usize, what: &str| -> Result<Vec<Vec<f64>>, AuthenticationError> {
            let mut bytes = vec![0u8; cols * dim * 4];
            r.read_exact(&mut bytes).map_err(|_| truncated(what))?;
            Ok(bytes
                .chunks_exact(dim * 4)
                .map(|col| {
                    col.chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                        .collect()
                })
                .collect())
        };
        let appearance = read_columns(m, appearance_dim, "appearance gallery")?;
        let behavior = read_columns(m, behavior_dim, "behavior gallery")?;
        galleries.push(IdentityGallery { label, appearance, behavior });
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra).map_err(|_| truncated("eof probe"))? != 0 {
        return Err(invalid("trailing bytes after reference set".to_string()));
    }
    let sorted = galleries.windows(2).all(|w| w[0].label < w[1].label);
    if !sorted {
        return Err(invalid("identities are not sorted/unique".to_string()));
    }
    Ok(ReferenceSet { galleries })
}
