//! Multi-similarity loss: soft pair weighting, batch loss, and its gradient
//! with respect to the similarity matrix.

use std::collections::HashMap;

use super::{MiningResult, SimilarityMatrix};

/// Loss hyper-parameters. Defaults follow the metric-learning configuration
/// this loss was introduced with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsLossConfig {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    /// Mining margin.
    pub epsilon: f64,
}

impl Default for MsLossConfig {
    fn default() -> Self {
        Self { alpha: 2.0, beta: 50.0, lambda: 1.0, epsilon: 0.1 }
    }
}

impl MsLossConfig {
    pub fn validate(&self) {
        assert!(self.alpha > 0.0, "alpha must be positive");
        assert!(self.beta > 0.0, "beta must be positive");
        assert!(self.epsilon >= 0.0, "epsilon must be non-negative");
    }
}

/// Soft weights of the mined pairs, keyed by (anchor, partner).
#[derive(Debug, Clone, Default)]
pub struct PairWeights {
    pub w_pos: HashMap<(usize, usize), f64>,
    pub w_neg: HashMap<(usize, usize), f64>,
}

/// Exponent shift kicks in past this point to avoid overflow.
const EXP_SHIFT_THRESHOLD: f64 = 30.0;

/// log(1 + sum(e^x)) in shifted form when exponents run hot.
fn log1p_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return 0.0;
    }
    if max <= EXP_SHIFT_THRESHOLD {
        xs.map(f64::exp).sum::<f64>().ln_1p()
    } else {
        // log(e^-max + sum(e^(x - max))) + max
        (((-max).exp() + xs.map(|x| (x - max).exp()).sum::<f64>()).ln()) + max
    }
}

/// Weights e^{x_j} / (1 + sum_k e^{x_k}) for every j in the set, stable
/// under large exponents. The denominator is computed once per set.
fn shifted_ratios(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let shift = if max <= EXP_SHIFT_THRESHOLD { 0.0 } else { max };
    let denom = (-shift).exp() + xs.iter().map(|x| (x - shift).exp()).sum::<f64>();
    xs.iter().map(|x| (x - shift).exp() / denom).collect()
}

/// Soft weighting of mined pairs:
///
/// w⁻_ij = e^{β(S_ij−λ)} / (1 + Σ_{k∈N_i} e^{β(S_ik−λ)})
/// w⁺_ij = e^{−α(S_ij−λ)} / (1 + Σ_{k∈P_i} e^{−α(S_ik−λ)})
pub fn pair_weights(
    sim: &SimilarityMatrix,
    mining: &MiningResult,
    cfg: &MsLossConfig,
) -> PairWeights {
    cfg.validate();
    let mut weights = PairWeights::default();
    for i in 0..sim.m {
        let pos = &mining.positives[i];
        let neg = &mining.negatives[i];
        let pos_xs: Vec<f64> =
            pos.iter().map(|&k| -cfg.alpha * (sim.get(i, k) - cfg.lambda)).collect();
        for (&j, w) in pos.iter().zip(shifted_ratios(&pos_xs)) {
            weights.w_pos.insert((i, j), w);
        }
        let neg_xs: Vec<f64> =
            neg.iter().map(|&k| cfg.beta * (sim.get(i, k) - cfg.lambda)).collect();
        for (&j, w) in neg.iter().zip(shifted_ratios(&neg_xs)) {
            weights.w_neg.insert((i, j), w);
        }
    }
    weights
}

/// Batch loss:
///
/// L = (1/m) Σ_i { (1/α) log(1 + Σ_{k∈P_i} e^{−α(S_ik−λ)})
///              + (1/β) log(1 + Σ_{k∈N_i} e^{β(S_ik−λ)}) }
///
/// The mining sets are treated as constants; gradients flow only through the
/// similarities.
pub fn ms_loss(sim: &SimilarityMatrix, mining: &MiningResult, cfg: &MsLossConfig) -> f64 {
    cfg.validate();
    let m = sim.m;
    assert!(m >= 1, "batch must be non-empty");
    let mut total = 0.0;
    for i in 0..m {
        let pos = mining.positives[i].iter().map(|&k| -cfg.alpha * (sim.get(i, k) - cfg.lambda));
        let neg = mining.negatives[i].iter().map(|&k| cfg.beta * (sim.get(i, k) - cfg.lambda));
        total += log1p_sum_exp(pos) / cfg.alpha + log1p_sum_exp(neg) / cfg.beta;
    }
    total / m as f64
}

/// ∂L/∂S as a dense m × m row-major matrix: −w⁺_ij/m on mined positives,
/// +w⁻_ij/m on mined negatives, zero elsewhere. Derived by differentiating
/// the loss directly; the equality with [`pair_weights`] up to sign is the
/// algebraic identity the tests pin down.
pub fn ms_loss_grad(sim: &SimilarityMatrix, mining: &MiningResult, cfg: &MsLossConfig) -> Vec<f64> {
    cfg.validate();
    let m = sim.m;
    let inv_m = 1.0 / m as f64;
    let mut grad = vec![0.0; m * m];
    for i in 0..m {
        let pos = &mining.positives[i];
        let neg = &mining.negatives[i];
        // d/dS_ij (1/a) log(1 + sum e^{-a(S-l)}) = -e^{-a(S_ij-l)} / (1 + sum ...)
        let pos_xs: Vec<f64> =
            pos.iter().map(|&k| -cfg.alpha * (sim.get(i, k) - cfg.lambda)).collect();
        for (&j, w) in pos.iter().zip(shifted_ratios(&pos_xs)) {
            grad[i * m + j] -= inv_m * w;
        }
        // d/dS_ij (1/b) log(1 + sum e^{b(S-l)}) = +e^{b(S_ij-l)} / (1 + sum ...)
        let neg_xs: Vec<f64> =
            neg.iter().map(|&k| cfg.beta * (sim.get(i, k) - cfg.lambda)).collect();
        for (&j, w) in neg.iter().zip(shifted_ratios(&neg_xs)) {
            grad[i * m + j] += inv_m * w;
        }
    }
    grad
}
