//! Binary frame-feature file format.
//!
//! Layout (little-endian):
//! - magic `b"BGF1"`
//! - version: u32 = 1
//! - stream tag: u8 (0 = behavior, 1 = appearance)
//! - reserved: 3 zero bytes
//! - frames: u32
//! - dim: u32
//! - payload: frames · dim f32 values, row-major by frame

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{FeatureStoreError, FrameFeatureSequence};

const MAGIC: [u8; 4] = *b"BGF1";
const VERSION: u32 = 1;

/// Which biometric stream a feature file carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    Behavior,
    Appearance,
}

impl StreamKind {
    fn tag(self) -> u8 {
        match self {
            StreamKind::Behavior => 0,
            StreamKind::Appearance => 1,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(StreamKind::Behavior),
            1 => Some(StreamKind::Appearance),
            _ => None,
        }
    }
}

pub fn read_feature_file(path: &Path) -> Result<FrameFeatureSequence, FeatureStoreError> {
    let file = File::open(path).map_err(|source| FeatureStoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let len = file
        .metadata()
        .map_err(|source| FeatureStoreError::Io { path: path.to_path_buf(), source })?
        .len();
    read_from(BufReader::new(file), len, path)
}

pub fn write_feature_file(
    path: &Path,
    seq: &FrameFeatureSequence,
) -> Result<(), FeatureStoreError> {
    let file = File::create(path).map_err(|source| FeatureStoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    write_to(&mut w, seq, path)?;
    w.flush().map_err(|source| FeatureStoreError::Io { path: path.to_path_buf(), source })
}

/// Serializes a sequence to the binary format. `path` is used in error
/// messages only.
pub fn write_to<W: Write>(
    w: &mut W,
    seq: &FrameFeatureSequence,
    path: &Path,
) -> Result<(), FeatureStoreError> {
    let io_err = |source| FeatureStoreError::Io { path: path.to_path_buf(), source };
    w.write_all(&MAGIC).map_err(io_err)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&[seq.stream().tag(), 0, 0, 0]).map_err(io_err)?;
    w.write_all(&(seq.frames() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(seq.dim() as u32).to_le_bytes()).map_err(io_err)?;
    let mut payload = Vec::with_capacity(seq.frames() * seq.dim() * 4);
    for row in seq.rows() {
        for &v in row {
            payload.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    w.write_all(&payload).map_err(io_err)
}

/// Parses a sequence from a reader of known total length. `path` is used in
/// error messages only.
pub fn read_from<R: Read>(
    mut r: R,
    total_len: u64,
    path: &Path,
) -> Result<FrameFeatureSequence, FeatureStoreError> {
    let truncated = |detail: &str| FeatureStoreError::TruncatedPayload {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    };
    let malformed = |detail: String| FeatureStoreError::MalformedHeader {
        path: path.to_path_buf(),
        detail,
    };

    let mut header = [0u8; 20];
    r.read_exact(&mut header).map_err(|_| truncated("header"))?;
    if header[0..4] != MAGIC {
        return Err(FeatureStoreError::BadMagic { path: path.to_path_buf() });
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(FeatureStoreError::VersionMismatch {
            path: path.to_path_buf(),
            found: version,
            expected: VERSION,
        });
    }
    let stream = StreamKind::from_tag(header[8])
        .ok_or_else(|| malformed(format!("unknown stream tag {}", header[8])))?;
    if header[9..12] != [0, 0, 0] {
        return Err(malformed("nonzero reserved bytes".to_string()));
    }
    let frames = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(header[16..20].try_into().unwrap()) as usize;
    if frames == 0 || dim == 0 {
        return Err(malformed(format!("frames={frames}, dim={dim}; both must be >= 1")));
    }

    let expected_payload = frames as u64 * dim as u64 * 4;
    let available = total_len.saturating_sub(20);
    if available < expected_payload {
        return Err(truncated(&format!(
            "payload holds {} values, header declares {}",
            available / 4,
            frames * dim
        )));
    }
    if available > expected_payload {
        return Err(malformed(format!(
            "{} trailing bytes after declared payload",
            available - expected_payload
        )));
    }

    let mut payload = vec![0u8; expected_payload as usize];
    r.read_exact(&mut payload).map_err(|_| truncated("payload"))?;
    let mut data = Vec::with_capacity(frames * dim);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(FeatureStoreError::NonFiniteValue {
                path: path.to_path_buf(),
                frame: i / dim,
                component: i % dim,
            });
        }
        data.push(v as f64);
    }
    Ok(FrameFeatureSequence::from_rows(stream, dim, data))
}
