//! Reference-set-size ablation: how detection accuracy grows with the
//! number of enrolled clips per identity.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{accuracy_at, evaluate_clips, EmbeddedClip, EvaluationError};
use crate::authentication::enroll;
use crate::biometric::{AppearanceDescriptor, BehaviorEmbedding};

#[derive(Debug, Clone, PartialEq)]
pub struct AblationPoint {
    pub gallery_size: usize,
    /// Mean over trials of the average class accuracy at the fixed threshold.
    pub accuracy: f64,
}

/// For each requested gallery size m, repeatedly re-enrolls m random clips
/// per identity and re-evaluates the test clips, reporting the mean average
/// accuracy. Deterministic in (seed, m, trial).
pub fn reference_ablation(
    pools: &[(String, Vec<(BehaviorEmbedding, AppearanceDescriptor)>)],
    test_clips: &[EmbeddedClip],
    sizes: &[usize],
    trials: usize,
    seed: u64,
    tau_f: f64,
) -> Result<Vec<AblationPoint>, EvaluationError> {
    assert!(trials >= 1, "need at least one trial");
    let mut points = Vec::with_capacity(sizes.len());
    for &m in sizes {
        assert!(m >= 1, "gallery size must be >= 1");
        for (identity, pool) in pools {
            if pool.len() < m {
                return Err(EvaluationError::InsufficientClips {
                    identity: identity.clone(),
                    have: pool.len(),
                    need: m,
                });
            }
        }
        let mut total = 0.0;
        for trial in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, m as u64, trial as u64));
            let mut enrollment = Vec::new();
            for (identity, pool) in pools {
                for pick in index::sample(&mut rng, pool.len(), m) {
                    let (behavior, appearance) = &pool[pick];
                    enrollment.push((identity.clone(), behavior.clone(), appearance.clone()));
                }
            }
            let refs = enroll(&enrollment)?;
            let records = evaluate_clips(test_clips, &refs)?;
            total += accuracy_at(&records, tau_f)?.average;
        }
        points.push(AblationPoint { gallery_size: m, accuracy: total / trials as f64 });
    }
    Ok(points)
}

/// splitmix-style hash so (seed, size, trial) streams do not collide.
fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
