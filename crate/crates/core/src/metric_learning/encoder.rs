//! Temporal encoder mapping a dim × t clip to a d-dimensional unit
//! embedding, with hand-written reverse-mode gradients.
//!
//! The layer stack is configurable; the desk-scale default is
//! conv(k7, s2) → tanh → conv(k5, s2) → tanh → temporal average pool →
//! affine → zero-mean/unit-norm. Convolutions are "valid" (no padding) and
//! run along the time axis only.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MetricLearningError;
use crate::feature_store::ClipFeatureMatrix;

/// One layer of the encoder stack.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// 1-D convolution along time: channels × T_in → out_channels × T_out
    /// with T_out = (T_in - kernel) / stride + 1.
    TemporalConv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        /// weights[o * in * k + c * k + kk]
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Tanh,
    /// Mean over the time axis: channels × T → channels.
    GlobalAveragePool,
    /// Dense head on the pooled vector.
    Affine { inputs: usize, outputs: usize, weights: Vec<f64>, bias: Vec<f64> },
}

impl Layer {
    fn param_len(&self) -> usize {
        match self {
            Layer::TemporalConv { weights, bias, .. } => weights.len() + bias.len(),
            Layer::Affine { weights, bias, .. } => weights.len() + bias.len(),
            _ => 0,
        }
    }
}

/// Encoder parameters: the layer stack plus the declared embedding size.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub layers: Vec<Layer>,
    pub embedding_dim: usize,
    /// Free-form provenance text carried through checkpoints.
    pub provenance: String,
}

/// Gradients with the same layout as [`EncoderParams`].
#[derive(Debug, Clone)]
pub struct EncoderGrad {
    /// One (weights, bias) pair per layer; empty vectors for layers without
    /// parameters.
    pub per_layer: Vec<(Vec<f64>, Vec<f64>)>,
}

impl EncoderGrad {
    pub fn zeros_like(params: &EncoderParams) -> Self {
        let per_layer = params
            .layers
            .iter()
            .map(|l| match l {
                Layer::TemporalConv { weights, bias, .. } | Layer::Affine { weights, bias, .. } => {
                    (vec![0.0; weights.len()], vec![0.0; bias.len()])
                }
                _ => (Vec::new(), Vec::new()),
            })
            .collect();
        Self { per_layer }
    }

    pub fn add_assign(&mut self, other: &EncoderGrad) {
        for ((w, b), (ow, ob)) in self.per_layer.iter_mut().zip(&other.per_layer) {
            for (x, y) in w.iter_mut().zip(ow) {
                *x += y;
            }
            for (x, y) in b.iter_mut().zip(ob) {
                *x += y;
            }
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.per_layer
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for (w, b) in &mut self.per_layer {
            for v in w.iter_mut().chain(b.iter_mut()) {
                *v *= factor;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.per_layer.iter().all(|(w, b)| {
            w.iter().all(|&v| v == 0.0) && b.iter().all(|&v| v == 0.0)
        })
    }
}

/// Intermediate activations cached by the forward pass.
///
/// `stages[i]` is the input of layer i as (channels, time, data); the entry
/// past the last layer is the head output before normalization. Stage i+1 is
/// also layer i's output, which is all the tanh derivative needs, so nothing
/// is stored twice.
#[derive(Debug, Clone)]
pub struct Tape {
    stages: Vec<(usize, usize, Vec<f64>)>,
}

impl Tape {
    fn input(&self, layer: usize) -> &(usize, usize, Vec<f64>) {
        &self.stages[layer]
    }

    fn output(&self, layer: usize) -> &(usize, usize, Vec<f64>) {
        &self.stages[layer + 1]
    }

    fn pre_norm(&self) -> &[f64] {
        &self.stages.last().expect("tape has the head stage").2
    }
}

impl EncoderParams {
    /// The desk-scale default stack for `input_dim`-component clips:
    /// conv(k7, s2, →24) → tanh → conv(k5, s2, →32) → tanh → pool →
    /// affine(→ d). Weights use uniform fan-balanced initialization.
    pub fn desk_default(input_dim: usize, embedding_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c1 = 24;
        let c2 = 32;
        let layers = vec![
            conv_init(input_dim, c1, 7, 2, &mut rng),
            Layer::Tanh,
            conv_init(c1, c2, 5, 2, &mut rng),
            Layer::Tanh,
            Layer::GlobalAveragePool,
            affine_init(c2, embedding_dim, &mut rng),
        ];
        Self { layers, embedding_dim, provenance: String::new() }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_len).sum()
    }

    /// Channel count the first layer expects, when it is shape-constrained.
    pub fn expected_input_dim(&self) -> Option<usize> {
        self.layers.iter().find_map(|l| match l {
            Layer::TemporalConv { in_channels, .. } => Some(*in_channels),
            Layer::Affine { inputs, .. } => Some(*inputs),
            _ => None,
        })
    }

    /// Applies one SGD step: params ← params − lr · grad.
    pub fn apply_gradient(&mut self, grad: &EncoderGrad, lr: f64) {
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(&grad.per_layer) {
            match layer {
                Layer::TemporalConv { weights, bias, .. } | Layer::Affine { weights, bias, .. } => {
                    for (w, g) in weights.iter_mut().zip(gw) {
                        *w -= lr * g;
                    }
                    for (b, g) in bias.iter_mut().zip(gb) {
                        *b -= lr * g;
                    }
                }
                _ => {}
            }
        }
    }

    /// Forward pass. Returns the unit, zero-mean embedding and the tape
    /// needed by [`backward`](EncoderParams::backward).
    pub fn forward(&self, clip: &ClipFeatureMatrix) -> Result<(Vec<f64>, Tape), MetricLearningError> {
        let mut stages: Vec<(usize, usize, Vec<f64>)> = Vec::with_capacity(self.layers.len() + 1);
        stages.push((clip.dim, clip.t, clip.data.clone()));

        for (li, layer) in self.layers.iter().enumerate() {
            let (channels, time, current) = stages.last().expect("at least the input stage");
            let (channels, time) = (*channels, *time);
            let mismatch = |detail: String| MetricLearningError::ShapeMismatch { layer: li, detail };
            let next = match layer {
                Layer::TemporalConv { in_channels, out_channels, kernel, stride, weights, bias } => {
                    if channels != *in_channels {
                        return Err(mismatch(format!(
                            "conv expects {in_channels} channels, got {channels}"
                        )));
                    }
                    if time < *kernel {
                        return Err(mismatch(format!(
                            "conv kernel {kernel} exceeds {time} remaining frames"
                        )));
                    }
                    let t_out = (time - kernel) / stride + 1;
                    let mut out = vec![0.0; out_channels * t_out];
                    // Innermost loop runs over output positions so the short
                    // kernel axis stays in the outer loops.
                    for o in 0..*out_channels {
                        let out_row = &mut out[o * t_out..(o + 1) * t_out];
                        out_row.fill(bias[o]);
                        for c in 0..*in_channels {
                            let x_row = &current[c * time..(c + 1) * time];
                            let w_oc = &weights[(o * in_channels + c) * kernel
                                ..(o * in_channels + c + 1) * kernel];
                            for (kk, &w) in w_oc.iter().enumerate() {
                                for (tau, out_v) in out_row.iter_mut().enumerate() {
                                    *out_v += w * x_row[tau * stride + kk];
                                }
                            }
                        }
                    }
                    (*out_channels, t_out, out)
                }
                Layer::Tanh => {
                    (channels, time, current.iter().map(|v| v.tanh()).collect())
                }
                Layer::GlobalAveragePool => {
                    let mut out = vec![0.0; channels];
                    for (c, out_v) in out.iter_mut().enumerate() {
                        *out_v =
                            current[c * time..(c + 1) * time].iter().sum::<f64>() / time as f64;
                    }
                    (channels, 1, out)
                }
                Layer::Affine { inputs, outputs, weights, bias } => {
                    if time != 1 {
                        return Err(mismatch(
                            "affine head applied to an unpooled sequence".to_string(),
                        ));
                    }
                    if channels != *inputs {
                        return Err(mismatch(format!(
                            "affine expects {inputs} inputs, got {channels}"
                        )));
                    }
                    let mut out = vec![0.0; *outputs];
                    for (o, out_v) in out.iter_mut().enumerate() {
                        let row = &weights[o * inputs..(o + 1) * inputs];
                        *out_v = bias[o] + row.iter().zip(current).map(|(w, x)| w * x).sum::<f64>();
                    }
                    (*outputs, 1, out)
                }
            };
            stages.push(next);
        }

        let &(channels, time, _) = stages.last().unwrap();
        if time != 1 {
            return Err(MetricLearningError::ShapeMismatch {
                layer: self.layers.len(),
                detail: "stack must end in a vector (missing pool?)".to_string(),
            });
        }
        if channels != self.embedding_dim {
            return Err(MetricLearningError::ShapeMismatch {
                layer: self.layers.len(),
                detail: format!(
                    "head produces {channels} values, declared embedding_dim is {}",
                    self.embedding_dim
                ),
            });
        }

        let tape = Tape { stages };
        let embedding = normalize_embedding(tape.pre_norm())?;
        Ok((embedding, tape))
    }

    /// Reverse-mode gradient of the forward map with respect to every
    /// parameter, given the upstream gradient at the (normalized) embedding.
    pub fn backward(&self, tape: &Tape, grad_embedding: &[f64]) -> Result<EncoderGrad, MetricLearningError> {
        if grad_embedding.len() != self.embedding_dim {
            return Err(MetricLearningError::ShapeMismatch {
                layer: self.layers.len(),
                detail: format!(
                    "upstream gradient has {} components, embedding_dim is {}",
                    grad_embedding.len(),
                    self.embedding_dim
                ),
            });
        }
        let mut grad = EncoderGrad::zeros_like(self);
        // Through the zero-mean/unit-norm projection first.
        let mut upstream = normalize_embedding_vjp(tape.pre_norm(), grad_embedding);

        for (li, layer) in self.layers.iter().enumerate().rev() {
            let (in_ch, in_t, input) = tape.input(li);
            let (_, out_t, output) = tape.output(li);
            match layer {
                Layer::TemporalConv { in_channels, out_channels, kernel, stride, weights, .. } => {
                    let (gw, gb) = &mut grad.per_layer[li];
                    let mut g_in = vec![0.0; in_channels * in_t];
                    for o in 0..*out_channels {
                        let g_row = &upstream[o * out_t..(o + 1) * out_t];
                        gb[o] += g_row.iter().sum::<f64>();
                        for c in 0..*in_channels {
                            let x_row = &input[c * in_t..(c + 1) * in_t];
                            let gx_row = &mut g_in[c * in_t..(c + 1) * in_t];
                            let w_base = (o * in_channels + c) * kernel;
                            for kk in 0..*kernel {
                                let w = weights[w_base + kk];
                                let mut acc = 0.0;
                                for (tau, &g) in g_row.iter().enumerate() {
                                    let x_idx = tau * stride + kk;
                                    acc += g * x_row[x_idx];
                                    gx_row[x_idx] += g * w;
                                }
                                gw[w_base + kk] += acc;
                            }
                        }
                    }
                    upstream = g_in;
                }
                Layer::Tanh => {
                    for (g, y) in upstream.iter_mut().zip(output) {
                        *g *= 1.0 - y * y;
                    }
                }
                Layer::GlobalAveragePool => {
                    let mut g_in = vec![0.0; in_ch * in_t];
                    for c in 0..*in_ch {
                        let g = upstream[c] / *in_t as f64;
                        for v in &mut g_in[c * in_t..(c + 1) * in_t] {
                            *v = g;
                        }
                    }
                    upstream = g_in;
                }
                Layer::Affine { inputs, outputs, weights, .. } => {
                    let (gw, gb) = &mut grad.per_layer[li];
                    let mut g_in = vec![0.0; *inputs];
                    for o in 0..*outputs {
                        let g = upstream[o];
                        gb[o] += g;
                        let row = &weights[o * inputs..(o + 1) * inputs];
                        let gw_row = &mut gw[o * inputs..(o + 1) * inputs];
                        for c in 0..*inputs {
                            gw_row[c] += g * input[c];
                            g_in[c] += g * row[c];
                        }
                    }
                    upstream = g_in;
                }
            }
        }
        Ok(grad)
    }
}

fn conv_init(
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    rng: &mut ChaCha8Rng,
) -> Layer {
    let fan_in = in_channels * kernel;
    let fan_out = out_channels * kernel;
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let weights =
        (0..out_channels * in_channels * kernel).map(|_| rng.gen_range(-bound..bound)).collect();
    Layer::TemporalConv {
        in_channels,
        out_channels,
        kernel,
        stride,
        weights,
        bias: vec![0.0; out_channels],
    }
}

fn affine_init(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Layer {
    let bound = (6.0 / (inputs + outputs) as f64).sqrt();
    let weights = (0..outputs * inputs).map(|_| rng.gen_range(-bound..bound)).collect();
    Layer::Affine { inputs, outputs, weights, bias: vec![0.0; outputs] }
}

/// Projects a vector to zero mean then unit length. Errors when the input is
/// (near-)constant: after mean removal nothing is left to normalize.
pub fn normalize_embedding(v: &[f64]) -> Result<Vec<f64>, MetricLearningError> {
    let n = v.len();
    assert!(n >= 1, "empty vector");
    let mean = v.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let norm = centered.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= 1e-12 {
        return Err(MetricLearningError::DegenerateVector);
    }
    Ok(centered.into_iter().map(|x| x / norm).collect())
}

/// Vector-Jacobian product of [`normalize_embedding`] at `pre_norm`, applied
/// to `upstream`. The result is orthogonal to the normalized output.
pub fn normalize_embedding_vjp(pre_norm: &[f64], upstream: &[f64]) -> Vec<f64> {
    let n = pre_norm.len();
    let mean = pre_norm.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = pre_norm.iter().map(|x| x - mean).collect();
    let norm = centered.iter().map(|x| x * x).sum::<f64>().sqrt();
    let unit: Vec<f64> = centered.iter().map(|x| x / norm).collect();
    // Unit-sphere projection: (g - (u . g) u) / ||c||
    let ug: f64 = unit.iter().zip(upstream).map(|(u, g)| u * g).sum();
    let projected: Vec<f64> = upstream.iter().zip(&unit).map(|(g, u)| (g - ug * u) / norm).collect();
    // Mean-removal Jacobian is symmetric: subtract the mean again.
    let pmean = projected.iter().sum::<f64>() / n as f64;
    projected.into_iter().map(|x| x - pmean).collect()
}

const CHECKPOINT_MAGIC: [u8; 4] = *b"BNET";
const CHECKPOINT_VERSION: u32 = 1;

const LAYER_TAG_CONV: u8 = 0;
const LAYER_TAG_TANH: u8 = 1;
const LAYER_TAG_POOL: u8 = 2;
const LAYER_TAG_AFFINE: u8 = 3;

pub fn save_checkpoint(path: &Path, params: &EncoderParams) -> Result<(), MetricLearningError> {
    let file = File::create(path)
        .map_err(|source| MetricLearningError::Io { path: path.to_path_buf(), source })?;
    let mut w = BufWriter::new(file);
    write_checkpoint_to(&mut w, params, path)?;
    w.flush().map_err(|source| MetricLearningError::Io { path: path.to_path_buf(), source })
}

pub fn load_checkpoint(path: &Path) -> Result<EncoderParams, MetricLearningError> {
    let file = File::open(path)
        .map_err(|source| MetricLearningError::Io { path: path.to_path_buf(), source })?;
    read_checkpoint_from(BufReader::new(file), path)
}

pub fn write_checkpoint_to<W: Write>(
    w: &mut W,
    params: &EncoderParams,
    path: &Path,
) -> Result<(), MetricLearningError> {
    let io_err = |source| MetricLearningError::Io { path: path.to_path_buf(), source };
    let mut buf = Vec::new();
    buf.extend_from_slice(&CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(params.layers.len() as u32).to_le_bytes());
    for layer in &params.layers {
        match layer {
            Layer::TemporalConv { in_channels, out_channels, kernel, stride, weights, bias } => {
                buf.push(LAYER_TAG_CONV);
                for v in [*in_channels, *out_channels, *kernel, *stride] {
                    buf.extend_from_slice(&(v as u32).to_le_bytes());
                }
                for v in weights.iter().chain(bias.iter()) {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
            Layer::Tanh => buf.push(LAYER_TAG_TANH),
            Layer::GlobalAveragePool => buf.push(LAYER_TAG_POOL),
            Layer::Affine { inputs, outputs, weights, bias } => {
                buf.push(LAYER_TAG_AFFINE);
                for v in [*inputs, *outputs] {
                    buf.extend_from_slice(&(v as u32).to_le_bytes());
                }
                for v in weights.iter().chain(bias.iter()) {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    buf.extend_from_slice(&(params.embedding_dim as u32).to_le_bytes());
    let prov = params.provenance.as_bytes();
    buf.extend_from_slice(&(prov.len() as u32).to_le_bytes());
    buf.extend_from_slice(prov);
    w.write_all(&buf).map_err(io_err)
}

pub fn read_checkpoint_from<R: Read>(
    mut r: R,
    path: &Path,
) -> Result<EncoderParams, MetricLearningError> {
    let truncated = |detail: &str| MetricLearningError::TruncatedPayload {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    };
    let invalid = |detail: String| MetricLearningError::InvalidData {
        path: path.to_path_buf(),
        detail,
    };

    let mut head = [0u8; 12];
    r.read_exact(&mut head).map_err(|_| truncated("header"))?;
    if head[0..4] != CHECKPOINT_MAGIC {
        return Err(MetricLearningError::BadMagic { path: path.to_path_buf() });
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(MetricLearningError::VersionMismatch {
            path: path.to_path_buf(),
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let layer_count = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    if layer_count > 1024 {
        return Err(invalid(format!("implausible layer count {layer_count}")));
    }

    let read_u32 = |r: &mut R, what: &str| -> Result<u32, MetricLearningError> {
        let mut b = [0u8; 4];
        r.read_exact(&mut b).map_err(|_| truncated(what))?;
        Ok(u32::from_le_bytes(b))
    };
    let read_f64s = |r: &mut R, n: usize, what: &str| -> Result<Vec<f64>, MetricLearningError> {
        let mut bytes = vec![0u8; n * 8];
        r.read_exact(&mut bytes).map_err(|_| truncated(what))?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    };

    let mut layers = Vec::with_capacity(layer_count);
    for li in 0..layer_count {
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag).map_err(|_| truncated("layer tag"))?;
        match tag[0] {
            LAYER_TAG_CONV => {
                let in_channels = read_u32(&mut r, "conv shape")? as usize;
                let out_channels = read_u32(&mut r, "conv shape")? as usize;
                let kernel = read_u32(&mut r, "conv shape")? as usize;
                let stride = read_u32(&mut r, "conv shape")? as usize;
                if in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0 {
                    return Err(invalid(format!("layer {li}: zero conv dimension")));
                }
                if in_channels * out_channels * kernel > 64 << 20 {
                    return Err(invalid(format!("layer {li}: implausible conv size")));
                }
                let weights = read_f64s(&mut r, out_channels * in_channels * kernel, "conv weights")?;
                let bias = read_f64s(&mut r, out_channels, "conv bias")?;
                layers.push(Layer::TemporalConv {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    weights,
                    bias,
                });
            }
            LAYER_TAG_TANH => layers.push(Layer::Tanh),
            LAYER_TAG_POOL => layers.push(Layer::GlobalAveragePool),
            LAYER_TAG_AFFINE => {
                let inputs = read_u32(&mut r, "affine shape")? as usize;
                let outputs = read_u32(&mut r, "affine shape")? as usize;
                if inputs == 0 || outputs == 0 || inputs * outputs > 64 << 20 {
                    return Err(invalid(format!("layer {li}: bad affine shape")));
                }
                let weights = read_f64s(&mut r, outputs * inputs, "affine weights")?;
                let bias = read_f64s(&mut r, outputs, "affine bias")?;
                layers.push(Layer::Affine { inputs, outputs, weights, bias });
            }
            other => return Err(invalid(format!("layer {li}: unknown layer tag {other}"))),
        }
    }
    let embedding_dim = read_u32(&mut r, "embedding_dim")? as usize;
    let prov_len = read_u32(&mut r, "provenance length")? as usize;
    if prov_len > 1 << 20 {
        return Err(invalid(format!("implausible provenance length {prov_len}")));
    }
    let mut prov_bytes = vec![0u8; prov_len];
    r.read_exact(&mut prov_bytes).map_err(|_| truncated("provenance"))?;
    let provenance =
        String::from_utf8(prov_bytes).map_err(|_| invalid("provenance is not UTF-8".to_string()))?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra).map_err(|_| truncated("eof probe"))? != 0 {
        return Err(invalid("trailing bytes after checkpoint".to_string()));
    }
    Ok(EncoderParams { layers, embedding_dim, provenance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature_store::ClipOrigin;

    fn clip_of(dim: usize, t: usize, seed: u64) -> ClipFeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ClipFeatureMatrix {
            dim,
            t,
            data: (0..dim * t).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            origin: ClipOrigin { video_id: "test".to_string(), start_frame: 0 },
        }
    }

    fn tiny_encoder(input_dim: usize, d: usize, seed: u64) -> EncoderParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = vec![
            conv_init(input_dim, 8, 3, 2, &mut rng),
            Layer::Tanh,
            conv_init(8, 8, 3, 1, &mut rng),
            Layer::Tanh,
            Layer::GlobalAveragePool,
            affine_init(8, d, &mut rng),
        ];
        EncoderParams { layers, embedding_dim: d, provenance: String::new() }
    }

    #[test]
    fn normalize_hand_value() {
        let v = normalize_embedding(&[2.0, 0.0]).unwrap();
        assert!((v[0] - 0.70711).abs() < 1e-5);
        assert!((v[1] + 0.70711).abs() < 1e-5);
    }

    #[test]
    fn normalize_idempotent() {
        let v = normalize_embedding(&[3.0, -1.0, 0.5, 2.0]).unwrap();
        let again = normalize_embedding(&v).unwrap();
        for (a, b) in v.iter().zip(&again) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_vector_degenerate() {
        assert!(matches!(
            normalize_embedding(&[5.0, 5.0, 5.0]),
            Err(MetricLearningError::DegenerateVector)
        ));
    }

    #[test]
    fn identity_affine_matches_pooled_input() {
        // pool → identity affine with zero bias: the embedding must equal the
        // normalized pooled input.
        let d = 6;
        let mut weights = vec![0.0; d * d];
        for i in 0..d {
            weights[i * d + i] = 1.0;
        }
        let params = EncoderParams {
            layers: vec![
                Layer::GlobalAveragePool,
                Layer::Affine { inputs: d, outputs: d, weights, bias: vec![0.0; d] },
            ],
            embedding_dim: d,
            provenance: String::new(),
        };
        let clip = clip_of(d, 10, 3);
        let (emb, _) = params.forward(&clip).unwrap();

        let pooled: Vec<f64> =
            (0..d).map(|c| clip.component(c).iter().sum::<f64>() / 10.0).collect();
        let expected = normalize_embedding(&pooled).unwrap();
        for (a, b) in emb.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn output_is_unit_and_zero_sum() {
        let params = tiny_encoder(12, 8, 5);
        let clip = clip_of(12, 20, 6);
        let (emb, _) = params.forward(&clip).unwrap();
        let norm: f64 = emb.iter().map(|v| v * v).sum::<f64>().sqrt();
        let sum: f64 = emb.iter().sum();
        assert!((norm - 1.0).abs() < 1e-9);
        assert!(sum.abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch_reported() {
        let params = tiny_encoder(12, 8, 5);
        let clip = clip_of(11, 20, 6);
        assert!(matches!(
            params.forward(&clip),
            Err(MetricLearningError::ShapeMismatch { layer: 0, .. })
        ));
    }

    #[test]
    fn zero_upstream_gives_zero_grad() {
        let params = tiny_encoder(6, 5, 7);
        let clip = clip_of(6, 14, 8);
        let (_, tape) = params.forward(&clip).unwrap();
        let grad = params.backward(&tape, &vec![0.0; 5]).unwrap();
        assert!(grad.is_zero());
    }

    #[test]
    fn normalization_vjp_is_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let pre: Vec<f64> = (0..9).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let g: Vec<f64> = (0..9).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let unit = normalize_embedding(&pre).unwrap();
            let vjp = normalize_embedding_vjp(&pre, &g);
            let dot: f64 = unit.iter().zip(&vjp).map(|(u, v)| u * v).sum();
            assert!(dot.abs() < 1e-12, "vjp not tangent: {dot}");
        }
    }

    /// VJP/JVP duality: <backward(g), delta> == <g, d/dh f(p + h delta)>.
    #[test]
    fn directional_derivative_check() {
        let params = tiny_encoder(6, 5, 13);
        let clip = clip_of(6, 14, 14);
        let mut rng = ChaCha8Rng::seed_from_u64(15);

        let (_, tape) = params.forward(&clip).unwrap();
        let g: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let grad = params.backward(&tape, &g).unwrap();

        // Random direction over all parameters.
        let mut direction = EncoderGrad::zeros_like(&params);
        for (w, b) in &mut direction.per_layer {
            for v in w.iter_mut().chain(b.iter_mut()) {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        let dot_analytic: f64 = grad
            .per_layer
            .iter()
            .zip(&direction.per_layer)
            .map(|((gw, gb), (dw, db))| {
                gw.iter().zip(dw).map(|(a, b)| a * b).sum::<f64>()
                    + gb.iter().zip(db).map(|(a, b)| a * b).sum::<f64>()
            })
            .sum();

        let h = 1e-6;
        let mut shifted = |sign: f64| {
            let mut p = params.clone();
            let mut scaled = direction.clone();
            scaled.scale(-sign * h); // apply_gradient subtracts
            p.apply_gradient(&scaled, 1.0);
            let (emb, _) = p.forward(&clip).unwrap();
            emb.iter().zip(&g).map(|(e, gg)| e * gg).sum::<f64>()
        };
        let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * h);
        let denom = fd.abs().max(dot_analytic.abs()).max(1e-12);
        assert!(
            (fd - dot_analytic).abs() / denom < 1e-5,
            "fd {fd} vs analytic {dot_analytic}"
        );
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut params = tiny_encoder(12, 8, 21);
        params.provenance = "iterations=10\nseed=21\n".to_string();
        let mut bytes = Vec::new();
        write_checkpoint_to(&mut bytes, &params, Path::new("<mem>")).unwrap();
        let back =
            read_checkpoint_from(std::io::Cursor::new(&bytes), Path::new("<mem>")).unwrap();
        assert_eq!(params, back);
        let mut again = Vec::new();
        write_checkpoint_to(&mut again, &back, Path::new("<mem>")).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn truncated_checkpoint_rejected() {
        let params = tiny_encoder(4, 4, 22);
        let mut bytes = Vec::new();
        write_checkpoint_to(&mut bytes, &params, Path::new("<mem>")).unwrap();
        bytes.truncate(bytes.len() - 7);
        assert!(matches!(
            read_checkpoint_from(std::io::Cursor::new(&bytes), Path::new("<mem>")),
            Err(MetricLearningError::TruncatedPayload { .. })
        ));
    }
}
