//! Orchestration shared by the CLI subcommands: splitting, loading, clip
//! embedding, enrollment, and report writing.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::authentication::{AuthenticationError, ReferenceSet};
use crate::biometric::{appearance_descriptor, AppearanceDescriptor, BehaviorEmbedding, BiometricError};
use crate::evaluation::{
    behavior_context_distributions, crossover, evaluate_clips, similarity_distributions, Accuracy,
    ContextHistograms, EmbeddedClip, EvalRecord, EvaluationError, Grouping, Histogram, RocCurve,
};
use crate::feature_store::{
    read_feature_file, split_identity_videos, split_video_halves, window_clips_in_range,
    DatasetManifest, FeatureStoreError, FrameFeatureSequence, SplitEntry, SplitResult, VideoLabel,
};
use crate::metric_learning::{ClipIndex, EncoderParams, IdentityClips, MetricLearningError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    FeatureStore(#[from] FeatureStoreError),
    #[error(transparent)]
    MetricLearning(#[from] MetricLearningError),
    #[error(transparent)]
    Biometric(#[from] BiometricError),
    #[error(transparent)]
    Authentication(#[from] AuthenticationError),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error("video {video_id:?}: behavior stream has {behavior} frames, appearance has {appearance}")]
    FrameCountMismatch { video_id: String, behavior: usize, appearance: usize },
    #[error("no {side} clips produced; videos shorter than t={t} or empty split")]
    NoClips { side: &'static str, t: usize },
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Which reference/test protocol to run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitProtocol {
    /// Per identity, a ratio of whole real videos goes to reference.
    Identity { ratio: f64 },
    /// Every video is split in half (fakes keep only their test half).
    Halves,
}

/// Computes the reference/test partition. The halves protocol reads each
/// behavior file to learn its length.
pub fn compute_split(
    manifest: &DatasetManifest,
    protocol: SplitProtocol,
    seed: u64,
    t: usize,
) -> Result<SplitResult, PipelineError> {
    match protocol {
        SplitProtocol::Identity { ratio } => Ok(split_identity_videos(manifest, ratio, seed)?),
        SplitProtocol::Halves => {
            let mut reference = Vec::new();
            let mut test = Vec::new();
            for record in &manifest.records {
                let seq = read_feature_file(&record.behavior_path)?;
                let halves = split_video_halves(&seq, &record.video_id, record.label, t)?;
                if !halves.reference.is_empty() {
                    reference
                        .push(SplitEntry { record: record.clone(), frames: Some(halves.reference) });
                }
                test.push(SplitEntry { record: record.clone(), frames: Some(halves.test) });
            }
            Ok(SplitResult { reference, test, seed })
        }
    }
}

/// Builds the training index from the (real) entries' behavior streams.
pub fn build_clip_index(entries: &[SplitEntry], t: usize) -> Result<ClipIndex, PipelineError> {
    let mut by_identity: BTreeMap<String, IdentityClips> = BTreeMap::new();
    let loaded = entries
        .par_iter()
        .filter(|e| e.record.label == VideoLabel::Real)
        .map(|entry| {
            let seq = read_feature_file(&entry.record.behavior_path)?;
            Ok((entry, seq))
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    for (entry, seq) in loaded {
        let identity = entry.record.identity.clone().expect("real record has identity");
        let range = entry.frames.clone().unwrap_or(0..seq.frames());
        if range.end > seq.frames() || range.len() < t {
            continue;
        }
        let source = crate::metric_learning::ClipSource {
            video_id: entry.record.video_id.clone(),
            seq,
            start_min: range.start,
            start_max: range.end - t,
        };
        by_identity
            .entry(identity.clone())
            .or_insert_with(|| IdentityClips { label: identity, sources: Vec::new() })
            .sources
            .push(source);
    }
    let index = ClipIndex::new(by_identity.into_values().collect(), t);
    if index.identities.is_empty() {
        return Err(PipelineError::NoClips { side: "training", t });
    }
    Ok(index)
}

fn load_pair(
    entry: &SplitEntry,
) -> Result<(FrameFeatureSequence, FrameFeatureSequence), PipelineError> {
    let behavior = read_feature_file(&entry.record.behavior_path)?;
    let appearance = read_feature_file(&entry.record.appearance_path)?;
    if behavior.frames() != appearance.frames() {
        return Err(PipelineError::FrameCountMismatch {
            video_id: entry.record.video_id.clone(),
            behavior: behavior.frames(),
            appearance: appearance.frames(),
        });
    }
    Ok((behavior, appearance))
}

/// Windows each entry's streams and reduces every window to its two
/// signatures. Clip order is (entry order, start frame); work is parallel
/// per entry, so thread count never changes the output.
pub fn embed_entries(
    entries: &[SplitEntry],
    encoder: &EncoderParams,
    t: usize,
    stride: usize,
) -> Result<Vec<EmbeddedClip>, PipelineError> {
    let per_entry = entries
        .par_iter()
        .map(|entry| {
            let (behavior, appearance) = load_pair(entry)?;
            let range = entry.frames.clone().unwrap_or(0..behavior.frames());
            let record = &entry.record;
            let clips = window_clips_in_range(&behavior, &record.video_id, range, t, stride);
            clips
                .into_iter()
                .map(|clip| {
                    let start = clip.origin.start_frame;
                    let descriptor = appearance_descriptor(&appearance, start, t)?;
                    let (embedding, _) = encoder.forward(&clip)?;
                    Ok(EmbeddedClip {
                        video_id: record.video_id.clone(),
                        start_frame: start,
                        truth: record.label,
                        identity: record.identity.clone(),
                        source_identity: record.source_identity.clone(),
                        target_identity: record.target_identity.clone(),
                        context: record.context.clone(),
                        descriptor,
                        embedding: BehaviorEmbedding(embedding),
                    })
                })
                .collect::<Result<Vec<_>, PipelineError>>()
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(per_entry.into_iter().flatten().collect())
}

/// Rearranges embedded reference clips into enrollment form.
pub fn enrollment_clips(
    embedded: &[EmbeddedClip],
) -> Vec<(String, BehaviorEmbedding, AppearanceDescriptor)> {
    embedded
        .iter()
        .filter_map(|clip| {
            clip.identity.as_ref().map(|id| {
                (id.clone(), clip.embedding.clone(), clip.descriptor.clone())
            })
        })
        .collect()
}

/// Per-identity enrollment pools for the reference ablation.
pub fn enrollment_pools(
    embedded: &[EmbeddedClip],
) -> Vec<(String, Vec<(BehaviorEmbedding, AppearanceDescriptor)>)> {
    let mut pools: BTreeMap<String, Vec<(BehaviorEmbedding, AppearanceDescriptor)>> =
        BTreeMap::new();
    for clip in embedded {
        if let Some(id) = &clip.identity {
            pools
                .entry(id.clone())
                .or_default()
                .push((clip.embedding.clone(), clip.descriptor.clone()));
        }
    }
    pools.into_iter().collect()
}

/// Everything the evaluate subcommand reports.
pub struct EvaluationReport {
    pub records: Vec<EvalRecord>,
    pub curve: RocCurve,
    pub crossover: Option<(f64, f64)>,
    pub auc: f64,
    pub clip_accuracy: Accuracy,
    pub video_accuracy: Accuracy,
    pub tau_f: f64,
    pub vs_source: Option<Histogram>,
    pub vs_target: Option<Histogram>,
    pub context_histograms: Option<ContextHistograms>,
    pub warnings: Vec<String>,
}

/// Runs the full measurement protocol over embedded test clips.
pub fn evaluate_protocol(
    test_clips: &[EmbeddedClip],
    refs: &ReferenceSet,
    thresholds: &[f64],
    tau_f: f64,
) -> Result<EvaluationReport, PipelineError> {
    let records = evaluate_clips(test_clips, refs)?;
    let curve = crate::evaluation::roc_sweep(&records, thresholds)?;
    let cross = match crossover(&curve) {
        Ok(pair) => Some(pair),
        Err(EvaluationError::NoCrossover) => None,
        Err(e) => return Err(e.into()),
    };
    let auc = crate::evaluation::auc(&records)?;
    let clip_accuracy = crate::evaluation::accuracy_at(&records, tau_f)?;
    let video_accuracy = video_vote_accuracy(&records, tau_f)?;

    let mut warnings = Vec::new();
    let missing_real = test_clips
        .iter()
        .filter(|c| {
            c.truth == VideoLabel::Real
                && c.identity.as_deref().map_or(false, |id| !refs.contains(id))
        })
        .count();
    if missing_real > 0 {
        warnings.push(format!(
            "coverage gap: {missing_real} real test clips belong to identities absent from the reference set"
        ));
    }

    let fakes: Vec<EmbeddedClip> = test_clips
        .iter()
        .filter(|c| c.truth == VideoLabel::Fake)
        .cloned()
        .collect();
    let covered: Vec<EmbeddedClip> = fakes
        .iter()
        .filter(|c| {
            c.source_identity.as_deref().map_or(false, |id| refs.contains(id))
                && c.target_identity.as_deref().map_or(false, |id| refs.contains(id))
        })
        .cloned()
        .collect();
    if covered.len() < fakes.len() {
        warnings.push(format!(
            "coverage gap: {} fake clips reference identities absent from the reference set; excluded from similarity distributions",
            fakes.len() - covered.len()
        ));
    }
    let (vs_source, vs_target) = if covered.is_empty() {
        (None, None)
    } else {
        (
            Some(similarity_distributions(&covered, refs, Grouping::VsSource)?),
            Some(similarity_distributions(&covered, refs, Grouping::VsTarget)?),
        )
    };

    let reals: Vec<EmbeddedClip> = test_clips
        .iter()
        .filter(|c| c.truth == VideoLabel::Real && c.identity.is_some())
        .cloned()
        .collect();
    let context_histograms = match behavior_context_distributions(&reals) {
        Ok(h) => Some(h),
        Err(EvaluationError::InsufficientGroups(which)) => {
            warnings.push(format!(
                "behavior/context distributions skipped: grouping {which:?} has no pairs"
            ));
            None
        }
        Err(e) => return Err(e.into()),
    };

    Ok(EvaluationReport {
        records,
        curve,
        crossover: cross,
        auc,
        clip_accuracy,
        video_accuracy,
        tau_f,
        vs_source,
        vs_target,
        context_histograms,
        warnings,
    })
}

/// Video-level accuracy by majority vote over clip verdicts at `tau_f`;
/// tied votes count as fake.
pub fn video_vote_accuracy(
    records: &[EvalRecord],
    tau_f: f64,
) -> Result<Accuracy, PipelineError> {
    let cutoff = 1.0 - tau_f;
    let mut votes: BTreeMap<&str, (VideoLabel, usize, usize)> = BTreeMap::new();
    for r in records {
        let entry = votes.entry(&r.video_id).or_insert((r.truth, 0, 0));
        if r.score <= cutoff {
            entry.1 += 1;
        } else {
            entry.2 += 1;
        }
    }
    let mut real_total = 0usize;
    let mut real_correct = 0usize;
    let mut fake_total = 0usize;
    let mut fake_correct = 0usize;
    for (_, (truth, real_votes, fake_votes)) in votes {
        let verdict_real = real_votes > fake_votes;
        match truth {
            VideoLabel::Real => {
                real_total += 1;
                if verdict_real {
                    real_correct += 1;
                }
            }
            VideoLabel::Fake => {
                fake_total += 1;
                if !verdict_real {
                    fake_correct += 1;
                }
            }
        }
    }
    if real_total == 0 || fake_total == 0 {
        return Err(EvaluationError::DegenerateLabels.into());
    }
    let real = real_correct as f64 / real_total as f64;
    let fake = fake_correct as f64 / fake_total as f64;
    Ok(Accuracy { real, fake, average: 0.5 * (real + fake) })
}

fn opt_str(v: &Option<String>) -> &str {
    v.as_deref().unwrap_or("-")
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })
}

fn histogram_csv(hist: &Histogram) -> String {
    let mut out = String::from("bin_low,bin_high,count\n");
    for (bin, &count) in hist.counts.iter().enumerate() {
        let (low, high) = hist.bin_bounds(bin);
        out.push_str(&format!("{low},{high},{count}\n"));
    }
    out
}

/// Writes roc.csv, records.csv, the hist_*.csv files, and summary.txt into
/// `out_dir`. Byte-identical output for identical report content.
pub fn write_reports(out_dir: &Path, report: &EvaluationReport) -> Result<(), PipelineError> {
    fs::create_dir_all(out_dir)
        .map_err(|source| PipelineError::Io { path: out_dir.to_path_buf(), source })?;

    let mut roc = String::from("tau,real_acc,fake_acc\n");
    for ((tau, real), fake) in report
        .curve
        .thresholds
        .iter()
        .zip(&report.curve.real_acc)
        .zip(&report.curve.fake_acc)
    {
        roc.push_str(&format!("{tau},{real},{fake}\n"));
    }
    write_text(&out_dir.join("roc.csv"), &roc)?;

    let mut records = String::from(
        "video_id,start_frame,truth,score,appearance_identity,appearance_similarity,behavior_identity,behavior_similarity,source_identity,target_identity\n",
    );
    for r in &report.records {
        records.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.video_id,
            r.start_frame,
            r.truth.as_str(),
            r.score,
            r.match_result.appearance_identity,
            r.match_result.appearance_similarity,
            r.match_result.behavior_identity,
            r.match_result.behavior_similarity,
            opt_str(&r.source_identity),
            opt_str(&r.target_identity),
        ));
    }
    write_text(&out_dir.join("records.csv"), &records)?;

    if let Some(hist) = &report.vs_source {
        write_text(&out_dir.join("hist_appearance_vs_source.csv"), &histogram_csv(hist))?;
    }
    if let Some(hist) = &report.vs_target {
        write_text(&out_dir.join("hist_appearance_vs_target.csv"), &histogram_csv(hist))?;
    }
    if let Some(ctx) = &report.context_histograms {
        write_text(
            &out_dir.join("hist_behavior_same_person_same_context.csv"),
            &histogram_csv(&ctx.same_person_same_context),
        )?;
        write_text(
            &out_dir.join("hist_behavior_same_person_diff_context.csv"),
            &histogram_csv(&ctx.same_person_diff_context),
        )?;
        write_text(
            &out_dir.join("hist_behavior_diff_people_same_context.csv"),
            &histogram_csv(&ctx.diff_people_same_context),
        )?;
    }

    write_text(&out_dir.join("summary.txt"), &summary_text(report))?;
    Ok(())
}

pub fn summary_text(report: &EvaluationReport) -> String {
    let n_real =
        report.records.iter().filter(|r| r.truth == VideoLabel::Real).count();
    let n_fake = report.records.len() - n_real;
    let mut out = String::new();
    out.push_str(&format!("test clips: {n_real} real, {n_fake} fake\n"));
    out.push_str(&format!("tau_f: {}\n\n", report.tau_f));
    out.push_str("level               real_acc    fake_acc    average\n");
    out.push_str(&format!(
        "clip                {:<12.6}{:<12.6}{:<12.6}\n",
        report.clip_accuracy.real, report.clip_accuracy.fake, report.clip_accuracy.average
    ));
    out.push_str(&format!(
        "video (majority)    {:<12.6}{:<12.6}{:<12.6}\n\n",
        report.video_accuracy.real, report.video_accuracy.fake, report.video_accuracy.average
    ));
    match report.crossover {
        Some((tau, acc)) => {
            out.push_str(&format!("crossover: tau={tau:.6} accuracy={acc:.6}\n"));
        }
        None => out.push_str("crossover: none (curves never intersect)\n"),
    }
    out.push_str(&format!("auc: {:.6}\n", report.auc));
    if let Some(h) = &report.vs_source {
        out.push_str(&format!("mean appearance similarity, fake vs source: {:.6}\n", h.mean()));
    }
    if let Some(h) = &report.vs_target {
        out.push_str(&format!("mean appearance similarity, fake vs target: {:.6}\n", h.mean()));
    }
    if let Some(ctx) = &report.context_histograms {
        out.push_str(&format!(
            "mean behavior similarity, same person / same context: {:.6}\n",
            ctx.same_person_same_context.mean()
        ));
        out.push_str(&format!(
            "mean behavior similarity, same person / different contexts: {:.6}\n",
            ctx.same_person_diff_context.mean()
        ));
        out.push_str(&format!(
            "mean behavior similarity, different people / same context: {:.6}\n",
            ctx.diff_people_same_context.mean()
        ));
    }
    for warning in &report.warnings {
        out.push_str(&format!("warning: {warning}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate_world, WorldConfig};

    fn tiny_world_dir() -> (tempfile::TempDir, DatasetManifest) {
        let dir = tempfile::tempdir().unwrap();
        let cfg = WorldConfig {
            identities: 4,
            videos_per_identity: 3,
            frames_per_video: 70,
            behavior_dim: 6,
            appearance_dim: 12,
            contexts: 2,
            noise_sigma: 0.2,
            failed_swap_fraction: 0.0,
            fakes_per_identity: 1,
            seed: 11,
        };
        let manifest = generate_world(&cfg, dir.path()).unwrap();
        (dir, manifest)
    }

    #[test]
    fn identity_split_and_embed() {
        let (_dir, manifest) = tiny_world_dir();
        let split =
            compute_split(&manifest, SplitProtocol::Identity { ratio: 0.7 }, 3, 20).unwrap();
        assert_eq!(split.reference.len(), 4 * 2);
        assert_eq!(split.test.len(), 4 * 1 + 4);

        let encoder = EncoderParams::desk_default(6, 8, 1);
        let reference = embed_entries(&split.reference, &encoder, 20, 10).unwrap();
        let test = embed_entries(&split.test, &encoder, 20, 10).unwrap();
        // 70 frames, t=20, stride=10: 6 clips per video.
        assert_eq!(reference.len(), 8 * 6);
        assert_eq!(test.len(), 8 * 6);

        let refs = crate::authentication::enroll(&enrollment_clips(&reference)).unwrap();
        assert_eq!(refs.galleries.len(), 4);
        for gallery in &refs.galleries {
            assert_eq!(gallery.clip_count(), 2 * 6);
        }
    }

    #[test]
    fn halves_split_ranges() {
        let (_dir, manifest) = tiny_world_dir();
        let split = compute_split(&manifest, SplitProtocol::Halves, 3, 30).unwrap();
        // All 12 real videos contribute reference halves; fakes only test.
        assert_eq!(split.reference.len(), 12);
        assert_eq!(split.test.len(), 16);
        for entry in &split.reference {
            assert_eq!(entry.frames.clone().unwrap(), 0..35);
        }
        for entry in &split.test {
            assert_eq!(entry.frames.clone().unwrap(), 35..70);
        }
    }

    #[test]
    fn evaluation_report_writes_all_files() {
        // Halves protocol guarantees every identity contributes test clips in
        // both contexts, so all histogram groupings are populated.
        let (_dir, manifest) = tiny_world_dir();
        let split = compute_split(&manifest, SplitProtocol::Halves, 3, 20).unwrap();
        let encoder = EncoderParams::desk_default(6, 8, 1);
        let reference = embed_entries(&split.reference, &encoder, 20, 10).unwrap();
        let test = embed_entries(&split.test, &encoder, 20, 10).unwrap();
        let refs = crate::authentication::enroll(&enrollment_clips(&reference)).unwrap();
        let grid = crate::evaluation::default_threshold_grid();
        let report = evaluate_protocol(&test, &refs, &grid, 0.86).unwrap();

        let out = tempfile::tempdir().unwrap();
        write_reports(out.path(), &report).unwrap();
        for file in [
            "roc.csv",
            "records.csv",
            "summary.txt",
            "hist_appearance_vs_source.csv",
            "hist_appearance_vs_target.csv",
            "hist_behavior_same_person_same_context.csv",
            "hist_behavior_same_person_diff_context.csv",
            "hist_behavior_diff_people_same_context.csv",
        ] {
            assert!(out.path().join(file).is_file(), "missing {file}");
        }
        let roc = fs::read_to_string(out.path().join("roc.csv")).unwrap();
        assert_eq!(roc.lines().count(), 202);
    }
}
