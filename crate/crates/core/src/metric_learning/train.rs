//! Training loop: sample → embed → similarity → mine → loss → backprop →
//! SGD step. Deterministic for a fixed seed; batch work is parallel but all
//! reductions run in a fixed order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    mine_pairs, ms_loss, ms_loss_grad, pairwise_similarity, sample_batch, ClipIndex, EncoderGrad,
    EncoderParams, MetricLearningError, MsLossConfig,
};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub identities_per_batch: usize,
    pub clips_per_identity: usize,
    pub t: usize,
    pub learning_rate: f64,
    /// Gradient-norm clip; `None` disables clipping.
    pub clip_grad_norm: Option<f64>,
    pub seed: u64,
    pub loss: MsLossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            identities_per_batch: 32,
            clips_per_identity: 8,
            t: 100,
            learning_rate: 1e-2,
            clip_grad_norm: Some(5.0),
            seed: 0,
            loss: MsLossConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn batch_size(&self) -> usize {
        self.identities_per_batch * self.clips_per_identity
    }

    /// key=value form used for checkpoint provenance and config files.
    pub fn to_text(&self) -> String {
        format!(
            "iterations={}\nidentities_per_batch={}\nclips_per_identity={}\nt={}\nlearning_rate={}\nclip_grad_norm={}\nseed={}\nalpha={}\nbeta={}\nlambda={}\nepsilon={}\n",
            self.iterations,
            self.identities_per_batch,
            self.clips_per_identity,
            self.t,
            self.learning_rate,
            self.clip_grad_norm.map(|v| v.to_string()).unwrap_or_else(|| "none".to_string()),
            self.seed,
            self.loss.alpha,
            self.loss.beta,
            self.loss.lambda,
            self.loss.epsilon,
        )
    }
}

/// Per-iteration loss trace.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub losses: Vec<f64>,
}

impl TrainLog {
    pub fn mean_of_first(&self, n: usize) -> f64 {
        let k = n.min(self.losses.len());
        if k == 0 {
            return 0.0;
        }
        self.losses[..k].iter().sum::<f64>() / k as f64
    }

    pub fn mean_of_last(&self, n: usize) -> f64 {
        let k = n.min(self.losses.len());
        if k == 0 {
            return 0.0;
        }
        self.losses[self.losses.len() - k..].iter().sum::<f64>() / k as f64
    }
}

/// Runs `cfg.iterations` SGD steps from `initial` and returns the trained
/// parameters with the loss trace. Mining sets are treated as constants
/// within a step; gradients flow through the similarities only.
pub fn train(
    index_set: &ClipIndex,
    initial: EncoderParams,
    cfg: &TrainConfig,
) -> Result<(EncoderParams, TrainLog), MetricLearningError> {
    cfg.loss.validate();
    assert_eq!(index_set.t, cfg.t, "clip index built for a different t");
    let mut params = initial;
    let mut log = TrainLog::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    for iteration in 0..cfg.iterations {
        let batch =
            sample_batch(index_set, cfg.identities_per_batch, cfg.clips_per_identity, &mut rng)?;
        let labels: Vec<usize> = batch.iter().map(|(_, l)| *l).collect();

        // Forward passes are independent; order is preserved by collect.
        let forwards = batch
            .par_iter()
            .map(|(clip, _)| params.forward(clip))
            .collect::<Result<Vec<_>, _>>()?;
        let embeddings: Vec<Vec<f64>> = forwards.iter().map(|(e, _)| e.clone()).collect();

        let sim = pairwise_similarity(&embeddings, &labels)?;
        let mining = mine_pairs(&sim, cfg.loss.epsilon);
        let loss = ms_loss(&sim, &mining, &cfg.loss);
        if !loss.is_finite() {
            return Err(MetricLearningError::NonFiniteLoss { iteration });
        }
        log.losses.push(loss);

        let grad_s = ms_loss_grad(&sim, &mining, &cfg.loss);
        let m = sim.m;
        // dL/dE_i = sum_j (G_ij + G_ji) E_j
        let grad_embeddings: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|i| {
                let mut g = vec![0.0; embeddings[0].len()];
                for j in 0..m {
                    let coeff = grad_s[i * m + j] + grad_s[j * m + i];
                    if coeff == 0.0 {
                        continue;
                    }
                    for (gv, ev) in g.iter_mut().zip(&embeddings[j]) {
                        *gv += coeff * ev;
                    }
                }
                g
            })
            .collect();

        let per_clip = forwards
            .par_iter()
            .zip(&grad_embeddings)
            .map(|((_, tape), g)| params.backward(tape, g))
            .collect::<Result<Vec<_>, _>>()?;

        // Fixed summation order (clip index) keeps runs bit-reproducible.
        let mut total = EncoderGrad::zeros_like(&params);
        for g in &per_clip {
            total.add_assign(g);
        }
        if let Some(max_norm) = cfg.clip_grad_norm {
            let norm = total.l2_norm();
            if norm > max_norm {
                total.scale(max_norm / norm);
            }
        }
        params.apply_gradient(&total, cfg.learning_rate);
    }
    Ok((params, log))
}
