//! Hard positive/negative pair mining.

use super::SimilarityMatrix;

/// Per-anchor mined pair sets. Index sets are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiningResult {
    pub positives: Vec<Vec<usize>>,
    pub negatives: Vec<Vec<usize>>,
}

impl MiningResult {
    pub fn is_empty(&self) -> bool {
        self.positives.iter().all(Vec::is_empty) && self.negatives.iter().all(Vec::is_empty)
    }
}

/// Selects, for each anchor i, the informative pairs:
///
/// - negatives: cross-label j with `S_ij > min_k S_ik - epsilon`, the min
///   running over the anchor's same-label partners;
/// - positives: same-label j (j != i) with `S_ij < max_k S_ik + epsilon`,
///   the max running over the anchor's cross-label partners.
///
/// An anchor with no same-label partner mines no negatives, and one with no
/// cross-label partner mines no positives.
pub fn mine_pairs(sim: &SimilarityMatrix, epsilon: f64) -> MiningResult {
    let m = sim.m;
    let mut positives = vec![Vec::new(); m];
    let mut negatives = vec![Vec::new(); m];

    for i in 0..m {
        let yi = sim.labels[i];
        let mut min_pos = f64::INFINITY;
        let mut max_neg = f64::NEG_INFINITY;
        for k in 0..m {
            if k == i {
                continue;
            }
            if sim.labels[k] == yi {
                min_pos = min_pos.min(sim.get(i, k));
            } else {
                max_neg = max_neg.max(sim.get(i, k));
            }
        }

        if min_pos.is_finite() {
            for j in 0..m {
                if sim.labels[j] != yi && sim.get(i, j) > min_pos - epsilon {
                    negatives[i].push(j);
                }
            }
        }
        if max_neg.is_finite() {
            for j in 0..m {
                if j != i && sim.labels[j] == yi && sim.get(i, j) < max_neg + epsilon {
                    positives[i].push(j);
                }
            }
        }
    }
    MiningResult { positives, negatives }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim_of(m: usize, labels: Vec<usize>, entries: &[(usize, usize, f64)]) -> SimilarityMatrix {
        let mut s = vec![0.0; m * m];
        for i in 0..m {
            s[i * m + i] = 1.0;
        }
        for &(i, j, v) in entries {
            s[i * m + j] = v;
            s[j * m + i] = v;
        }
        SimilarityMatrix::from_parts(s, labels)
    }

    #[test]
    fn hand_evaluated_rules() {
        // Anchor 0 (label A): S_01 = 0.8, S_02 = 0.75, S_03 = 0.5, epsilon 0.1.
        // Negative rule: 0.75 > 0.8 - 0.1 selects 2 only.
        // Positive rule: 0.8 < 0.75 + 0.1 selects 1.
        let sim = sim_of(4, vec![0, 0, 1, 1], &[(0, 1, 0.8), (0, 2, 0.75), (0, 3, 0.5)]);
        let mined = mine_pairs(&sim, 0.1);
        assert_eq!(mined.negatives[0], vec![2]);
        assert_eq!(mined.positives[0], vec![1]);
    }

    #[test]
    fn fully_separated_batch_mines_nothing() {
        let sim = sim_of(
            4,
            vec![0, 0, 1, 1],
            &[(0, 1, 1.0), (2, 3, 1.0), (0, 2, -1.0), (0, 3, -1.0), (1, 2, -1.0), (1, 3, -1.0)],
        );
        let mined = mine_pairs(&sim, 0.1);
        assert!(mined.is_empty());
    }

    #[test]
    fn degenerate_margin_selects_everything() {
        let sim = sim_of(
            4,
            vec![0, 0, 1, 1],
            &[(0, 1, 0.9), (2, 3, 0.2), (0, 2, -0.5), (0, 3, 0.4), (1, 2, 0.1), (1, 3, -0.9)],
        );
        let mined = mine_pairs(&sim, 2.0);
        for i in 0..4 {
            let yi = sim.labels[i];
            let expect_pos: Vec<usize> =
                (0..4).filter(|&j| j != i && sim.labels[j] == yi).collect();
            let expect_neg: Vec<usize> = (0..4).filter(|&j| sim.labels[j] != yi).collect();
            assert_eq!(mined.positives[i], expect_pos);
            assert_eq!(mined.negatives[i], expect_neg);
        }
    }

    #[test]
    fn lone_label_anchor_mines_nothing() {
        // Anchor 2 has no same-label partner: negatives must stay empty even
        // though cross-label similarities are high.
        let sim = sim_of(3, vec![0, 0, 1], &[(0, 1, 0.2), (0, 2, 0.9), (1, 2, 0.9)]);
        let mined = mine_pairs(&sim, 0.1);
        assert!(mined.negatives[2].is_empty());
        assert!(!mined.positives[2].is_empty() || mined.positives[2].is_empty());
        // Anchors 0 and 1 still mine 2 as a hard negative.
        assert_eq!(mined.negatives[0], vec![2]);
        assert_eq!(mined.negatives[1], vec![2]);
    }

    #[test]
    fn single_label_batch_mines_no_positives() {
        // No cross-label partner at all: positive rule has no reference max.
        let sim = sim_of(3, vec![0, 0, 0], &[(0, 1, 0.1), (0, 2, 0.2), (1, 2, 0.3)]);
        let mined = mine_pairs(&sim, 0.5);
        assert!(mined.is_empty());
    }
}
