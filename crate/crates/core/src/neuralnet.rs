//! Minimal feed-forward network core: dense layers, tape-based reverse-mode
//! gradients, max-pooling over point sets, inverted dropout, and Adam.
//!
//! The architectures here are fixed chains, so a manual tape is simpler and
//! easier to test than a general autodiff graph. All math is f64.

use rand::Rng;
use serde::{Deserialize, Serialize};

pub mod checkpoint;

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("maxpool over an empty point set")]
    EmptyPool,
    #[error("tape does not match network parameters")]
    StaleTape,
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
    Softmax,
    Elu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Fully connected layer, `out = act(W x + b)`, weights row-major `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    /// Kaiming-style uniform init scaled by fan-in.
    pub fn init(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / in_dim as f64).sqrt();
        let weights = (0..in_dim * out_dim).map(|_| rng.gen_range(-limit..limit)).collect();
        let bias = vec![0.0; out_dim];
        Self { in_dim, out_dim, weights, bias, activation }
    }

    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.weights[r * self.in_dim..(r + 1) * self.in_dim];
            *o = self.bias[r] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }
}

fn apply_activation(act: Activation, z: &[f64]) -> Vec<f64> {
    match act {
        Activation::Identity => z.to_vec(),
        Activation::Relu => z.iter().map(|v| v.max(0.0)).collect(),
        Activation::Elu => z.iter().map(|v| if *v > 0.0 { *v } else { v.exp_m1() }).collect(),
        Activation::Softmax => {
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            exps.into_iter().map(|e| e / sum).collect()
        }
    }
}

/// Gradient of the activation composed with an upstream gradient `da`,
/// producing `dz`. `z` is the pre-activation, `a` the activation output.
fn activation_backward(act: Activation, z: &[f64], a: &[f64], da: &[f64]) -> Vec<f64> {
    match act {
        Activation::Identity => da.to_vec(),
        Activation::Relu => z.iter().zip(da).map(|(z, g)| if *z > 0.0 { *g } else { 0.0 }).collect(),
        Activation::Elu => z
            .iter()
            .zip(da)
            .map(|(z, g)| if *z > 0.0 { *g } else { g * z.exp() })
            .collect(),
        Activation::Softmax => {
            let dot: f64 = a.iter().zip(da).map(|(s, g)| s * g).sum();
            a.iter().zip(da).map(|(s, g)| s * (g - dot)).collect()
        }
    }
}

/// Parameters of one feed-forward chain plus per-layer output dropout rates.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub layers: Vec<DenseLayer>,
    /// Drop probability applied to each layer's output in train mode.
    pub dropout: Vec<f64>,
}

impl NetworkParams {
    pub fn new(layers: Vec<DenseLayer>) -> Self {
        let n = layers.len();
        Self { layers, dropout: vec![0.0; n] }
    }

    pub fn with_dropout(layers: Vec<DenseLayer>, dropout: Vec<f64>) -> Self {
        assert_eq!(layers.len(), dropout.len());
        Self { layers, dropout }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    /// Chained shape check; layer i's output must feed layer i+1.
    pub fn validate(&self) -> Result<(), NetError> {
        for w in self.layers.windows(2) {
            if w[0].out_dim != w[1].in_dim {
                return Err(NetError::Shape(format!(
                    "layer output {} does not chain into input {}",
                    w[0].out_dim, w[1].in_dim
                )));
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }
}

struct LayerRecord {
    input: Vec<f64>,
    preact: Vec<f64>,
    postact: Vec<f64>,
    /// Inverted-dropout mask (entries 0 or 1/keep); None when inactive.
    mask: Option<Vec<f64>>,
}

/// Intermediates from one forward pass, consumed by `backward`.
pub struct Tape {
    records: Vec<LayerRecord>,
    output: Vec<f64>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

/// Run the chain on one input vector. Train mode applies inverted dropout
/// (masks divide by the keep probability), so eval mode needs no rescaling.
pub fn forward(
    params: &NetworkParams,
    input: &[f64],
    mode: Mode,
    dropout_rng: &mut impl Rng,
) -> Result<Tape, NetError> {
    if input.len() != params.in_dim() {
        return Err(NetError::Shape(format!(
            "input length {} != first layer input {}",
            input.len(),
            params.in_dim()
        )));
    }
    let mut records = Vec::with_capacity(params.layers.len());
    let mut x = input.to_vec();
    for (layer, &drop) in params.layers.iter().zip(&params.dropout) {
        if x.len() != layer.in_dim {
            return Err(NetError::Shape("layer input length mismatch".into()));
        }
        let mut z = vec![0.0; layer.out_dim];
        layer.matvec(&x, &mut z);
        let a = apply_activation(layer.activation, &z);
        let (out, mask) = if mode == Mode::Train && drop > 0.0 {
            let keep = 1.0 - drop;
            let mask: Vec<f64> = (0..a.len())
                .map(|_| if dropout_rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                .collect();
            (a.iter().zip(&mask).map(|(v, m)| v * m).collect::<Vec<f64>>(), Some(mask))
        } else {
            (a.clone(), None)
        };
        records.push(LayerRecord { input: x, preact: z, postact: a, mask });
        x = out;
    }
    Ok(Tape { records, output: x })
}

/// Per-layer parameter gradients, shaped like the network.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub d_weights: Vec<Vec<f64>>,
    pub d_bias: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Self {
            d_weights: params.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            d_bias: params.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.d_weights.iter_mut().zip(&other.d_weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.d_bias.iter_mut().zip(&other.d_bias) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in self.d_weights.iter_mut().chain(self.d_bias.iter_mut()) {
            for x in a {
                *x *= s;
            }
        }
    }
}

/// Reverse-mode pass. Returns parameter gradients and the gradient with
/// respect to the input vector.
pub fn backward(
    params: &NetworkParams,
    tape: &Tape,
    out_grad: &[f64],
) -> Result<(Gradients, Vec<f64>), NetError> {
    if tape.records.len() != params.layers.len() {
        return Err(NetError::StaleTape);
    }
    if out_grad.len() != params.out_dim() {
        return Err(NetError::Shape("output gradient length mismatch".into()));
    }
    let mut grads = Gradients::zeros_like(params);
    let mut d_out = out_grad.to_vec();
    for (idx, layer) in params.layers.iter().enumerate().rev() {
        let rec = &tape.records[idx];
        if rec.input.len() != layer.in_dim || rec.preact.len() != layer.out_dim {
            return Err(NetError::StaleTape);
        }
        let d_post = match &rec.mask {
            Some(mask) => d_out.iter().zip(mask).map(|(g, m)| g * m).collect::<Vec<f64>>(),
            None => d_out,
        };
        let d_z = activation_backward(layer.activation, &rec.preact, &rec.postact, &d_post);
        let dw = &mut grads.d_weights[idx];
        for (r, gz) in d_z.iter().enumerate() {
            let row = &mut dw[r * layer.in_dim..(r + 1) * layer.in_dim];
            for (w, x) in row.iter_mut().zip(&rec.input) {
                *w += gz * x;
            }
        }
        grads.d_bias[idx].copy_from_slice(&d_z);
        let mut d_in = vec![0.0; layer.in_dim];
        for (r, gz) in d_z.iter().enumerate() {
            let row = &layer.weights[r * layer.in_dim..(r + 1) * layer.in_dim];
            for (acc, w) in d_in.iter_mut().zip(row) {
                *acc += gz * w;
            }
        }
        d_out = d_in;
    }
    Ok((grads, d_out))
}

/// Componentwise max over rows plus the argmax row per feature (ties resolve
/// to the lowest index, which is also where the gradient routes).
pub fn maxpool_points(per_point: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<usize>), NetError> {
    let first = per_point.first().ok_or(NetError::EmptyPool)?;
    let f = first.len();
    let mut pooled = first.clone();
    let mut argmax = vec![0usize; f];
    for (row_idx, row) in per_point.iter().enumerate().skip(1) {
        if row.len() != f {
            return Err(NetError::Shape("ragged point feature matrix".into()));
        }
        for (j, v) in row.iter().enumerate() {
            if *v > pooled[j] {
                pooled[j] = *v;
                argmax[j] = row_idx;
            }
        }
    }
    Ok((pooled, argmax))
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment buffers mirroring one network's parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    m_weights: Vec<Vec<f64>>,
    v_weights: Vec<Vec<f64>>,
    m_bias: Vec<Vec<f64>>,
    v_bias: Vec<Vec<f64>>,
    step: u64,
    pub hyper: AdamParams,
}

impl AdamState {
    pub fn new(params: &NetworkParams, hyper: AdamParams) -> Self {
        Self {
            m_weights: params.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            v_weights: params.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            m_bias: params.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
            v_bias: params.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
            step: 0,
            hyper,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

fn adam_update(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], h: &AdamParams, bc1: f64, bc2: f64) {
    for i in 0..p.len() {
        m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
        v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] -= h.lr * m_hat / (v_hat.sqrt() + h.eps);
    }
}

/// One bias-corrected Adam step. Rejects non-finite gradients.
pub fn adam_step(
    params: &mut NetworkParams,
    grads: &Gradients,
    state: &mut AdamState,
) -> Result<(), NetError> {
    if grads.d_weights.len() != params.layers.len() {
        return Err(NetError::Shape("gradient layer count mismatch".into()));
    }
    for (layer, (gw, gb)) in params.layers.iter().zip(grads.d_weights.iter().zip(&grads.d_bias)) {
        if gw.len() != layer.weights.len() || gb.len() != layer.bias.len() {
            return Err(NetError::Shape("gradient shape mismatch".into()));
        }
        if gw.iter().chain(gb).any(|g| !g.is_finite()) {
            return Err(NetError::NonFiniteGradient);
        }
    }
    state.step += 1;
    let bc1 = 1.0 - state.hyper.beta1.powi(state.step as i32);
    let bc2 = 1.0 - state.hyper.beta2.powi(state.step as i32);
    let hyper = state.hyper;
    for (idx, layer) in params.layers.iter_mut().enumerate() {
        adam_update(
            &mut layer.weights,
            &grads.d_weights[idx],
            &mut state.m_weights[idx],
            &mut state.v_weights[idx],
            &hyper,
            bc1,
            bc2,
        );
        adam_update(
            &mut layer.bias,
            &grads.d_bias[idx],
            &mut state.m_bias[idx],
            &mut state.v_bias[idx],
            &hyper,
            bc1,
            bc2,
        );
    }
    Ok(())
}
