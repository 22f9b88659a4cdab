//! Seeded desk-scale world generator.
//!
//! Each identity gets a quasi-orthogonal appearance signature and a
//! behavior process built from three sinusoids with identity-specific
//! frequencies, phases, and per-component amplitudes, modulated per
//! recording context. Appearance frames are the signature plus noise;
//! behavior frames are the oscillation mix plus noise. A face-swap fake
//! copies the behavior process of its target while taking the appearance
//! signature of its source (or, in failed-swap mode, of the target again —
//! the classic botched swap that still looks like the target).
//!
//! Temporal averaging wipes out the zero-mean oscillations, so behavior
//! identity is only recoverable by a temporally sensitive encoder; that is
//! exactly the asymmetry the detector needs.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::feature_store::{
    write_feature_file, write_manifest, DatasetManifest, FeatureStoreError, FrameFeatureSequence,
    StreamKind, VideoLabel, VideoRecord,
};

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("invalid world config: {0}")]
    InvalidConfig(String),
    #[error("face swap requires distinct identities, got {0:?} twice")]
    SameIdentity(String),
    #[error(transparent)]
    FeatureStore(#[from] FeatureStoreError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub identities: usize,
    pub videos_per_identity: usize,
    pub frames_per_video: usize,
    pub behavior_dim: usize,
    pub appearance_dim: usize,
    pub contexts: usize,
    pub noise_sigma: f64,
    /// Fraction of fakes generated in failed-swap mode.
    pub failed_swap_fraction: f64,
    /// Fakes generated per target identity (0 disables fakes).
    pub fakes_per_identity: usize,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            identities: 32,
            videos_per_identity: 10,
            frames_per_video: 400,
            behavior_dim: 24,
            appearance_dim: 48,
            contexts: 4,
            noise_sigma: 0.3,
            failed_swap_fraction: 0.0,
            fakes_per_identity: 1,
            seed: 42,
        }
    }
}

impl WorldConfig {
    fn validate(&self) -> Result<(), SyntheticError> {
        let positive = [
            ("identities", self.identities),
            ("videos_per_identity", self.videos_per_identity),
            ("frames_per_video", self.frames_per_video),
            ("behavior_dim", self.behavior_dim),
            ("appearance_dim", self.appearance_dim),
            ("contexts", self.contexts),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(SyntheticError::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        if self.noise_sigma < 0.0 {
            return Err(SyntheticError::InvalidConfig("noise_sigma must be >= 0".to_string()));
        }
        if !(0.0..=1.0).contains(&self.failed_swap_fraction) {
            return Err(SyntheticError::InvalidConfig(
                "failed_swap_fraction must lie in [0, 1]".to_string(),
            ));
        }
        if self.fakes_per_identity > 0 && self.identities < 2 {
            return Err(SyntheticError::InvalidConfig(
                "face swaps need at least 2 identities".to_string(),
            ));
        }
        Ok(())
    }
}

const FPS: u32 = 25;
const OSCILLATORS: usize = 3;

#[derive(Debug, Clone)]
struct Oscillator {
    freq_hz: f64,
    phase: f64,
    /// Per-component amplitude mix.
    amplitude: Vec<f64>,
}

/// Generative parameters of one synthetic person.
#[derive(Debug, Clone)]
pub struct IdentityModel {
    pub label: String,
    pub appearance_signature: Vec<f64>,
    oscillators: Vec<Oscillator>,
    /// contexts × behavior_dim amplitude modulation.
    context_modulation: Vec<Vec<f64>>,
}

impl IdentityModel {
    fn sample(label: String, cfg: &WorldConfig, previous: &[IdentityModel], rng: &mut ChaCha8Rng) -> Self {
        // Rejection keeps signatures quasi-orthogonal so galleries separate.
        let appearance_signature = loop {
            let v = random_unit(cfg.appearance_dim, rng);
            let max_cos = previous
                .iter()
                .map(|p| {
                    p.appearance_signature.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>().abs()
                })
                .fold(0.0, f64::max);
            if max_cos < 0.5 {
                break v;
            }
        };
        // Frequencies stay well inside (0, Nyquist = fps/2).
        let oscillators = (0..OSCILLATORS)
            .map(|_| Oscillator {
                freq_hz: rng.gen_range(0.8..6.0),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
                amplitude: (0..cfg.behavior_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            })
            .collect();
        let context_modulation = (0..cfg.contexts)
            .map(|_| (0..cfg.behavior_dim).map(|_| rng.gen_range(0.4..1.6)).collect())
            .collect();
        Self { label, appearance_signature, oscillators, context_modulation }
    }

    /// One behavior trajectory: oscillation mix modulated by context, plus
    /// noise, starting at a per-video time offset.
    fn behavior_frames(
        &self,
        frames: usize,
        context: usize,
        offset_frames: f64,
        noise_sigma: f64,
        rng: &mut ChaCha8Rng,
    ) -> FrameFeatureSequence {
        let modulation = &self.context_modulation[context];
        let dim = modulation.len();
        let mut data = Vec::with_capacity(frames * dim);
        for n in 0..frames {
            let time = (n as f64 + offset_frames) / FPS as f64;
            for c in 0..dim {
                let mut v = 0.0;
                for osc in &self.oscillators {
                    v += osc.amplitude[c]
                        * (std::f64::consts::TAU * osc.freq_hz * time + osc.phase).sin();
                }
                v *= modulation[c];
                v += noise_sigma * rng.sample::<f64, _>(StandardNormal);
                data.push(v);
            }
        }
        FrameFeatureSequence::from_rows(StreamKind::Behavior, dim, data)
    }

    /// Appearance frames: static signature plus noise.
    fn appearance_frames(
        &self,
        frames: usize,
        noise_sigma: f64,
        rng: &mut ChaCha8Rng,
    ) -> FrameFeatureSequence {
        signature_frames(&self.appearance_signature, frames, noise_sigma, rng)
    }
}

fn signature_frames(
    signature: &[f64],
    frames: usize,
    noise_sigma: f64,
    rng: &mut ChaCha8Rng,
) -> FrameFeatureSequence {
    let dim = signature.len();
    let mut data = Vec::with_capacity(frames * dim);
    for _ in 0..frames {
        for &s in signature {
            data.push(s + noise_sigma * rng.sample::<f64, _>(StandardNormal));
        }
    }
    FrameFeatureSequence::from_rows(StreamKind::Appearance, dim, data)
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Good swaps take the source's appearance; failed swaps keep the target's.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwapMode {
    Good,
    Failed,
}

/// Builds the fake's two streams from a target behavior trajectory: behavior
/// is copied unchanged (it always stays with the target); appearance frames
/// come from the source or target signature depending on the mode.
pub fn synth_face_swap(
    source: &IdentityModel,
    target: &IdentityModel,
    target_behavior: FrameFeatureSequence,
    mode: SwapMode,
    noise_sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(FrameFeatureSequence, FrameFeatureSequence), SyntheticError> {
    if source.label == target.label {
        return Err(SyntheticError::SameIdentity(source.label.clone()));
    }
    let signature = match mode {
        SwapMode::Good => &source.appearance_signature,
        SwapMode::Failed => &target.appearance_signature,
    };
    let appearance = signature_frames(signature, target_behavior.frames(), noise_sigma, rng);
    Ok((target_behavior, appearance))
}

/// RNG stream derived from (seed, tag) so each video is reproducible in
/// isolation.
fn derive_rng(seed: u64, tag: &str) -> ChaCha8Rng {
    // FNV-1a over the tag, mixed with the seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in tag.as_bytes() {
        h ^= *byte as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    let mut x = seed ^ h;
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(x ^ (x >> 31))
}

/// Generates the full world under `out_dir`: per-video feature files in
/// `features/` plus `manifest.tsv`. Byte-identical for a fixed config.
pub fn generate_world(cfg: &WorldConfig, out_dir: &Path) -> Result<DatasetManifest, SyntheticError> {
    cfg.validate()?;
    let features_dir = out_dir.join("features");
    fs::create_dir_all(&features_dir).map_err(|source| FeatureStoreError::Io {
        path: features_dir.clone(),
        source,
    })?;

    let mut master = derive_rng(cfg.seed, "world");
    let mut identities: Vec<IdentityModel> = Vec::with_capacity(cfg.identities);
    for i in 0..cfg.identities {
        let label = format!("id{i:03}");
        let model = IdentityModel::sample(label, cfg, &identities, &mut master);
        identities.push(model);
    }

    let mut records = Vec::new();
    let write_pair = |video_id: &str,
                      behavior: &FrameFeatureSequence,
                      appearance: &FrameFeatureSequence|
     -> Result<(PathBuf, PathBuf), SyntheticError> {
        let behavior_rel = PathBuf::from(format!("features/{video_id}.beh.bgf"));
        let appearance_rel = PathBuf::from(format!("features/{video_id}.app.bgf"));
        write_feature_file(&out_dir.join(&behavior_rel), behavior)?;
        write_feature_file(&out_dir.join(&appearance_rel), appearance)?;
        Ok((behavior_rel, appearance_rel))
    };

    for model in &identities {
        for v in 0..cfg.videos_per_identity {
            let video_id = format!("{}_v{v:02}", model.label);
            let context = v % cfg.contexts;
            let mut rng = derive_rng(cfg.seed, &video_id);
            let offset = rng.gen_range(0.0..10_000.0);
            let behavior = model.behavior_frames(
                cfg.frames_per_video,
                context,
                offset,
                cfg.noise_sigma,
                &mut rng,
            );
            let appearance =
                model.appearance_frames(cfg.frames_per_video, cfg.noise_sigma, &mut rng);
            let (behavior_rel, appearance_rel) = write_pair(&video_id, &behavior, &appearance)?;
            records.push(VideoRecord {
                video_id,
                identity: Some(model.label.clone()),
                label: VideoLabel::Real,
                source_identity: None,
                target_identity: None,
                context: Some(format!("ctx{context}")),
                behavior_path: behavior_rel,
                appearance_path: appearance_rel,
                fps: FPS,
            });
        }
    }

    for (t_idx, target) in identities.iter().enumerate() {
        for k in 0..cfg.fakes_per_identity {
            let source = {
                let mut s = master.gen_range(0..cfg.identities - 1);
                if s >= t_idx {
                    s += 1;
                }
                &identities[s]
            };
            let mode = if master.gen_range(0.0..1.0) < cfg.failed_swap_fraction {
                SwapMode::Failed
            } else {
                SwapMode::Good
            };
            let video_id = format!("fake_{}_{}_{k:02}", source.label, target.label);
            let context = k % cfg.contexts;
            let mut rng = derive_rng(cfg.seed, &video_id);
            let offset = rng.gen_range(0.0..10_000.0);
            let target_behavior = target.behavior_frames(
                cfg.frames_per_video,
                context,
                offset,
                cfg.noise_sigma,
                &mut rng,
            );
            let (behavior, appearance) =
                synth_face_swap(source, target, target_behavior, mode, cfg.noise_sigma, &mut rng)?;
            let (behavior_rel, appearance_rel) = write_pair(&video_id, &behavior, &appearance)?;
            records.push(VideoRecord {
                video_id,
                identity: None,
                label: VideoLabel::Fake,
                source_identity: Some(source.label.clone()),
                target_identity: Some(target.label.clone()),
                context: Some(format!("ctx{context}")),
                behavior_path: behavior_rel,
                appearance_path: appearance_rel,
                fps: FPS,
            });
        }
    }

    write_manifest(&out_dir.join("manifest.tsv"), &records, Path::new(""))?;
    // Re-resolve paths against the output directory for the in-memory copy.
    let records = records
        .into_iter()
        .map(|mut r| {
            r.behavior_path = out_dir.join(&r.behavior_path);
            r.appearance_path = out_dir.join(&r.appearance_path);
            r
        })
        .collect();
    Ok(DatasetManifest { records, root: out_dir.to_path_buf() })
}
