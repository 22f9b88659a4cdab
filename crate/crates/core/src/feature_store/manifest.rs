//! Tab-separated dataset manifest.
//!
//! First line is the fixed header; each following line is one video record.
//! Empty optional fields are encoded as `-`. Feature paths are relative to
//! the manifest's directory.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{DatasetManifest, FeatureStoreError, VideoLabel, VideoRecord};

pub const MANIFEST_HEADER: &str = "video_id\tidentity\tlabel\tsource_identity\ttarget_identity\tcontext\tbehavior_path\tappearance_path\tfps";

pub fn parse_manifest(path: &Path) -> Result<DatasetManifest, FeatureStoreError> {
    let text = fs::read_to_string(path).map_err(|source| FeatureStoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let root = path.parent().unwrap_or(Path::new(".")).to_path_buf();

    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == MANIFEST_HEADER => {}
        Some((_, header)) => {
            return Err(FeatureStoreError::MalformedRecord {
                line: 1,
                reason: format!("unexpected header {header:?}"),
            })
        }
        None => {
            return Err(FeatureStoreError::MalformedRecord {
                line: 1,
                reason: "empty manifest".to_string(),
            })
        }
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let record = parse_record(line, line_no, &root)?;
        if !seen.insert(record.video_id.clone()) {
            return Err(FeatureStoreError::DuplicateVideoId(record.video_id));
        }
        for p in [&record.behavior_path, &record.appearance_path] {
            if !p.is_file() {
                return Err(FeatureStoreError::MissingFeatureFile(p.clone()));
            }
        }
        records.push(record);
    }
    Ok(DatasetManifest { records, root })
}

fn parse_record(line: &str, line_no: usize, root: &Path) -> Result<VideoRecord, FeatureStoreError> {
    let bad = |reason: String| FeatureStoreError::MalformedRecord { line: line_no, reason };
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 9 {
        return Err(bad(format!("expected 9 tab-separated fields, found {}", fields.len())));
    }
    let opt = |s: &str| if s == "-" || s.is_empty() { None } else { Some(s.to_string()) };

    let video_id = fields[0].to_string();
    if video_id.is_empty() || video_id == "-" {
        return Err(bad("empty video_id".to_string()));
    }
    let identity = opt(fields[1]);
    let label = match fields[2] {
        "real" => VideoLabel::Real,
        "fake" => VideoLabel::Fake,
        other => return Err(bad(format!("label must be real or fake, found {other:?}"))),
    };
    let source_identity = opt(fields[3]);
    let target_identity = opt(fields[4]);
    let context = opt(fields[5]);
    if fields[6] == "-" || fields[6].is_empty() {
        return Err(bad("empty behavior_path".to_string()));
    }
    if fields[7] == "-" || fields[7].is_empty() {
        return Err(bad("empty appearance_path".to_string()));
    }
    let fps: u32 = fields[8]
        .parse()
        .map_err(|_| bad(format!("fps must be a positive integer, found {:?}", fields[8])))?;
    if fps == 0 {
        return Err(bad("fps must be positive".to_string()));
    }

    match label {
        VideoLabel::Real => {
            if identity.is_none() {
                return Err(bad("real record requires identity".to_string()));
            }
            if source_identity.is_some() || target_identity.is_some() {
                return Err(bad("real record must leave source/target identity empty".to_string()));
            }
        }
        VideoLabel::Fake => {
            if source_identity.is_none() {
                return Err(bad("fake record requires source_identity".to_string()));
            }
            if target_identity.is_none() {
                return Err(bad("fake record requires target_identity".to_string()));
            }
        }
    }

    Ok(VideoRecord {
        video_id,
        identity,
        label,
        source_identity,
        target_identity,
        context,
        behavior_path: root.join(fields[6]),
        appearance_path: root.join(fields[7]),
        fps,
    })
}

/// Writes a manifest with paths relative to `root`. Records are written in
/// the given order; the generator keeps that order deterministic.
pub fn write_manifest(
    path: &Path,
    records: &[VideoRecord],
    root: &Path,
) -> Result<(), FeatureStoreError> {
    let io_err = |source| FeatureStoreError::Io { path: path.to_path_buf(), source };
    let mut out = String::new();
    out.push_str(MANIFEST_HEADER);
    out.push('\n');
    for rec in records {
        let opt = |v: &Option<String>| v.clone().unwrap_or_else(|| "-".to_string());
        let rel = |p: &PathBuf| {
            p.strip_prefix(root).unwrap_or(p).to_string_lossy().into_owned()
        };
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            rec.video_id,
            opt(&rec.identity),
            rec.label.as_str(),
            opt(&rec.source_identity),
            opt(&rec.target_identity),
            opt(&rec.context),
            rel(&rec.behavior_path),
            rel(&rec.appearance_path),
            rec.fps,
        ));
    }
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(out.as_bytes()).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature_store::{write_feature_file, FrameFeatureSequence, StreamKind};

    fn touch_features(dir: &Path, stem: &str) -> (String, String) {
        let seq = FrameFeatureSequence::from_rows(StreamKind::Behavior, 2, vec![0.0, 1.0]);
        let b = format!("{stem}.beh.bgf");
        let a = format!("{stem}.app.bgf");
        write_feature_file(&dir.join(&b), &seq).unwrap();
        write_feature_file(&dir.join(&a), &seq).unwrap();
        (b, a)
    }

    #[test]
    fn two_real_records_parse() {
        let dir = tempfile::tempdir().unwrap();
        let (b0, a0) = touch_features(dir.path(), "v0");
        let (b1, a1) = touch_features(dir.path(), "v1");
        let manifest = format!(
            "{MANIFEST_HEADER}\nv0\talice\treal\t-\t-\tdesk\t{b0}\t{a0}\t25\nv1\tbob\treal\t-\t-\t-\t{b1}\t{a1}\t25\n"
        );
        let path = dir.path().join("manifest.tsv");
        fs::write(&path, manifest).unwrap();
        let parsed = parse_manifest(&path).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.records[0].identity.as_deref(), Some("alice"));
        assert_eq!(parsed.records[1].context, None);
        assert_eq!(parsed.require_uniform_fps().unwrap(), 25);
    }

    #[test]
    fn fake_without_target_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (b, a) = touch_features(dir.path(), "f0");
        let manifest =
            format!("{MANIFEST_HEADER}\nf0\t-\tfake\talice\t-\t-\t{b}\t{a}\t25\n");
        let path = dir.path().join("manifest.tsv");
        fs::write(&path, manifest).unwrap();
        match parse_manifest(&path) {
            Err(FeatureStoreError::MalformedRecord { line: 2, reason }) => {
                assert!(reason.contains("target_identity"), "{reason}");
            }
            other => panic!("expected MalformedRecord, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_video_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (b, a) = touch_features(dir.path(), "v0");
        let manifest = format!(
            "{MANIFEST_HEADER}\nv0\talice\treal\t-\t-\t-\t{b}\t{a}\t25\nv0\tbob\treal\t-\t-\t-\t{b}\t{a}\t25\n"
        );
        let path = dir.path().join("manifest.tsv");
        fs::write(&path, manifest).unwrap();
        assert!(matches!(parse_manifest(&path), Err(FeatureStoreError::DuplicateVideoId(id)) if id == "v0"));
    }

    #[test]
    fn missing_feature_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = format!(
            "{MANIFEST_HEADER}\nv0\talice\treal\t-\t-\t-\tnope.bgf\tnope2.bgf\t25\n"
        );
        let path = dir.path().join("manifest.tsv");
        fs::write(&path, manifest).unwrap();
        assert!(matches!(parse_manifest(&path), Err(FeatureStoreError::MissingFeatureFile(_))));
    }

    #[test]
    fn write_then_parse_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (b, a) = touch_features(dir.path(), "v0");
        let records = vec![VideoRecord {
            video_id: "v0".to_string(),
            identity: Some("alice".to_string()),
            label: VideoLabel::Real,
            source_identity: None,
            target_identity: None,
            context: Some("desk".to_string()),
            behavior_path: dir.path().join(&b),
            appearance_path: dir.path().join(&a),
            fps: 25,
        }];
        let path = dir.path().join("manifest.tsv");
        write_manifest(&path, &records, dir.path()).unwrap();
        let parsed = parse_manifest(&path).unwrap();
        assert_eq!(parsed.records, records);
    }
}
