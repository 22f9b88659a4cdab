//! Accuracy curves over the facial threshold and two AUC routes.
//!
//! A clip with fakeness score s is classified real at threshold tau iff
//! s <= 1 - tau. Real accuracy therefore falls and fake accuracy rises as
//! tau grows.

use super::{EvalRecord, EvaluationError};
use crate::feature_store::VideoLabel;

/// Class accuracies at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub real: f64,
    pub fake: f64,
    /// Unweighted mean of the two class accuracies.
    pub average: f64,
}

/// Per-threshold accuracy curves.
#[derive(Debug, Clone)]
pub struct RocCurve {
    /// Ascending threshold grid.
    pub thresholds: Vec<f64>,
    pub real_acc: Vec<f64>,
    pub fake_acc: Vec<f64>,
}

/// The default grid: 201 evenly spaced thresholds on [0, 1].
pub fn default_threshold_grid() -> Vec<f64> {
    (0..=200).map(|i| i as f64 / 200.0).collect()
}

/// Class accuracies at a single threshold.
pub fn accuracy_at(records: &[EvalRecord], tau_f: f64) -> Result<Accuracy, EvaluationError> {
    let mut real_total = 0usize;
    let mut real_correct = 0usize;
    let mut fake_total = 0usize;
    let mut fake_correct = 0usize;
    let cutoff = 1.0 - tau_f;
    for r in records {
        match r.truth {
            VideoLabel::Real => {
                real_total += 1;
                if r.score <= cutoff {
                    real_correct += 1;
                }
            }
            VideoLabel::Fake => {
                fake_total += 1;
                if r.score > cutoff {
                    fake_correct += 1;
                }
            }
        }
    }
    if real_total == 0 || fake_total == 0 {
        return Err(EvaluationError::DegenerateLabels);
    }
    let real = real_correct as f64 / real_total as f64;
    let fake = fake_correct as f64 / fake_total as f64;
    Ok(Accuracy { real, fake, average: 0.5 * (real + fake) })
}

/// Sweeps [`accuracy_at`] over a threshold grid, so the curve agrees with
/// the pointwise accuracies exactly.
pub fn roc_sweep(records: &[EvalRecord], thresholds: &[f64]) -> Result<RocCurve, EvaluationError> {
    assert!(!thresholds.is_empty(), "threshold grid must be non-empty");
    assert!(
        thresholds.windows(2).all(|w| w[0] < w[1]),
        "threshold grid must be strictly ascending"
    );
    let mut real_acc = Vec::with_capacity(thresholds.len());
    let mut fake_acc = Vec::with_capacity(thresholds.len());
    for &tau in thresholds {
        let acc = accuracy_at(records, tau)?;
        real_acc.push(acc.real);
        fake_acc.push(acc.fake);
    }
    Ok(RocCurve { thresholds: thresholds.to_vec(), real_acc, fake_acc })
}

/// Finds where the real and fake accuracy curves intersect, interpolating
/// linearly between grid points; exact-zero plateaus resolve to their
/// midpoint. Returns (tau, accuracy at the intersection).
pub fn crossover(curve: &RocCurve) -> Result<(f64, f64), EvaluationError> {
    let n = curve.thresholds.len();
    let gap = |k: usize| curve.real_acc[k] - curve.fake_acc[k];

    for k in 0..n {
        if gap(k) == 0.0 {
            let mut end = k;
            while end + 1 < n && gap(end + 1) == 0.0 {
                end += 1;
            }
            let tau = 0.5 * (curve.thresholds[k] + curve.thresholds[end]);
            return Ok((tau, interpolate(&curve.thresholds, &curve.real_acc, tau)));
        }
        if k + 1 < n && gap(k).signum() != gap(k + 1).signum() && gap(k + 1) != 0.0 {
            let g0 = gap(k);
            let g1 = gap(k + 1);
            let s = g0 / (g0 - g1);
            let tau = curve.thresholds[k] + s * (curve.thresholds[k + 1] - curve.thresholds[k]);
            let acc = curve.real_acc[k] + s * (curve.real_acc[k + 1] - curve.real_acc[k]);
            return Ok((tau, acc));
        }
    }
    Err(EvaluationError::NoCrossover)
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    for k in 0..xs.len() - 1 {
        if x <= xs[k + 1] {
            let s = (x - xs[k]) / (xs[k + 1] - xs[k]);
            return ys[k] + s * (ys[k + 1] - ys[k]);
        }
    }
    *ys.last().unwrap()
}

/// Rank-statistic AUC: the fraction of (fake, real) pairs whose fake scores
/// strictly higher, ties counting one half.
pub fn auc(records: &[EvalRecord]) -> Result<f64, EvaluationError> {
    let fakes: Vec<f64> =
        records.iter().filter(|r| r.truth == VideoLabel::Fake).map(|r| r.score).collect();
    let reals: Vec<f64> =
        records.iter().filter(|r| r.truth == VideoLabel::Real).map(|r| r.score).collect();
    if fakes.is_empty() || reals.is_empty() {
        return Err(EvaluationError::DegenerateLabels);
    }
    let mut ordered = 0.0;
    for &f in &fakes {
        for &r in &reals {
            if f > r {
                ordered += 1.0;
            } else if f == r {
                ordered += 0.5;
            }
        }
    }
    Ok(ordered / (fakes.len() as f64 * reals.len() as f64))
}

/// Trapezoidal AUC over the (false-positive-rate, true-positive-rate) curve
/// built from the same scores, with fakes as the positive class. Kept as an
/// independent computation route; it must agree with [`auc`] to 1e-9.
pub fn auc_trapezoid(records: &[EvalRecord]) -> Result<f64, EvaluationError> {
    let n_fake = records.iter().filter(|r| r.truth == VideoLabel::Fake).count();
    let n_real = records.len() - n_fake;
    if n_fake == 0 || n_real == 0 {
        return Err(EvaluationError::DegenerateLabels);
    }
    let mut scored: Vec<(f64, VideoLabel)> = records.iter().map(|r| (r.score, r.truth)).collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("scores are finite"));

    let mut area = 0.0;
    let mut tp = 0usize;
    let mut i = 0;
    while i < scored.len() {
        // Consume the whole tie group at this score in one step.
        let score = scored[i].0;
        let mut d_tp = 0usize;
        let mut d_fp = 0usize;
        while i < scored.len() && scored[i].0 == score {
            match scored[i].1 {
                VideoLabel::Fake => d_tp += 1,
                VideoLabel::Real => d_fp += 1,
            }
            i += 1;
        }
        let tpr0 = tp as f64 / n_fake as f64;
        tp += d_tp;
        let tpr1 = tp as f64 / n_fake as f64;
        let d_fpr = d_fp as f64 / n_real as f64;
        area += d_fpr * 0.5 * (tpr0 + tpr1);
    }
    Ok(area)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::authentication::MatchResult;

    fn record(truth: VideoLabel, score: f64) -> EvalRecord {
        EvalRecord {
            video_id: "v".to_string(),
            start_frame: 0,
            truth,
            score,
            match_result: MatchResult {
                appearance_identity: "a".to_string(),
                appearance_similarity: 1.0 - score.min(1.0),
                behavior_identity: "a".to_string(),
                behavior_similarity: 0.0,
            },
            source_identity: None,
            target_identity: None,
        }
    }

    fn hand_set() -> Vec<EvalRecord> {
        vec![
            record(VideoLabel::Real, 0.1),
            record(VideoLabel::Real, 0.3),
            record(VideoLabel::Fake, 0.2),
            record(VideoLabel::Fake, 2.0),
        ]
    }

    #[test]
    fn hand_set_at_086() {
        let acc = accuracy_at(&hand_set(), 0.86).unwrap();
        assert_eq!(acc.real, 0.5);
        assert_eq!(acc.fake, 1.0);
        assert_eq!(acc.average, 0.75);
    }

    #[test]
    fn perfectly_separated_curves() {
        let records = vec![
            record(VideoLabel::Real, 0.0),
            record(VideoLabel::Real, 0.0),
            record(VideoLabel::Fake, 2.0),
        ];
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let curve = roc_sweep(&records, &grid).unwrap();
        assert!(curve.real_acc.iter().all(|&a| a == 1.0));
        assert!(curve.fake_acc.iter().all(|&a| a == 1.0));
    }

    #[test]
    fn tau_zero_counts_only_mismatches_as_fake() {
        // At tau = 0 the cutoff is 1: matched-identity clips (score <= 1)
        // classify real, only mismatch scores of 2 stay fake.
        let records = vec![
            record(VideoLabel::Real, 0.97),
            record(VideoLabel::Fake, 0.99),
            record(VideoLabel::Fake, 2.0),
        ];
        let acc = accuracy_at(&records, 0.0).unwrap();
        assert_eq!(acc.real, 1.0);
        assert_eq!(acc.fake, 0.5);
    }

    #[test]
    fn sweep_agrees_with_pointwise() {
        let records = hand_set();
        let grid = default_threshold_grid();
        let curve = roc_sweep(&records, &grid).unwrap();
        for (k, &tau) in grid.iter().enumerate() {
            let acc = accuracy_at(&records, tau).unwrap();
            assert_eq!(curve.real_acc[k], acc.real);
            assert_eq!(curve.fake_acc[k], acc.fake);
        }
    }

    #[test]
    fn degenerate_labels_rejected() {
        let records = vec![record(VideoLabel::Real, 0.1)];
        assert!(matches!(accuracy_at(&records, 0.5), Err(EvaluationError::DegenerateLabels)));
        assert!(matches!(auc(&records), Err(EvaluationError::DegenerateLabels)));
    }

    #[test]
    fn crossover_at_exact_grid_point() {
        let curve = RocCurve {
            thresholds: vec![0.5, 0.86, 0.99],
            real_acc: vec![1.0, 0.8, 0.2],
            fake_acc: vec![0.2, 0.8, 1.0],
        };
        let (tau, acc) = crossover(&curve).unwrap();
        assert_eq!(tau, 0.86);
        assert_eq!(acc, 0.8);
    }

    #[test]
    fn crossover_interpolates_between_grid_points() {
        let curve = RocCurve {
            thresholds: vec![0.0, 1.0],
            real_acc: vec![1.0, 0.0],
            fake_acc: vec![0.0, 1.0],
        };
        let (tau, acc) = crossover(&curve).unwrap();
        assert!((tau - 0.5).abs() < 1e-12);
        assert!((acc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_identical_curves_give_plateau_midpoint() {
        let curve = RocCurve {
            thresholds: vec![0.0, 0.5, 1.0],
            real_acc: vec![0.7, 0.7, 0.7],
            fake_acc: vec![0.7, 0.7, 0.7],
        };
        let (tau, acc) = crossover(&curve).unwrap();
        assert_eq!(tau, 0.5);
        assert_eq!(acc, 0.7);
    }

    #[test]
    fn no_crossover_reported() {
        let curve = RocCurve {
            thresholds: vec![0.0, 1.0],
            real_acc: vec![1.0, 0.9],
            fake_acc: vec![0.1, 0.2],
        };
        assert!(matches!(crossover(&curve), Err(EvaluationError::NoCrossover)));
    }

    #[test]
    fn auc_perfect_separation() {
        let records = vec![
            record(VideoLabel::Fake, 0.9),
            record(VideoLabel::Fake, 0.8),
            record(VideoLabel::Real, 0.1),
            record(VideoLabel::Real, 0.2),
        ];
        assert_eq!(auc(&records).unwrap(), 1.0);
    }

    #[test]
    fn auc_all_ties() {
        let records = vec![record(VideoLabel::Fake, 0.5), record(VideoLabel::Real, 0.5)];
        assert_eq!(auc(&records).unwrap(), 0.5);
    }

    #[test]
    fn auc_hand_value() {
        let records = vec![
            record(VideoLabel::Fake, 0.9),
            record(VideoLabel::Fake, 0.4),
            record(VideoLabel::Real, 0.1),
            record(VideoLabel::Real, 0.6),
        ];
        assert_eq!(auc(&records).unwrap(), 0.75);
    }

    #[test]
    fn trapezoid_matches_rank_statistic() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n = rng.gen_range(2..40);
            let records: Vec<EvalRecord> = (0..n)
                .map(|i| {
                    let truth =
                        if i == 0 || (i != 1 && rng.gen_bool(0.5)) { VideoLabel::Fake } else { VideoLabel::Real };
                    // Quantized scores generate plenty of ties.
                    let score = (rng.gen_range(0..8) as f64) / 4.0;
                    record(truth, score)
                })
                .collect();
            let a = auc(&records).unwrap();
            let b = auc_trapezoid(&records).unwrap();
            assert!((a - b).abs() < 1e-9, "rank {a} vs trapezoid {b}");
        }
    }
}
