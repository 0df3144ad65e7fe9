//! Minimal dense-network engine: multilayer perceptrons with exact
//! backpropagation, Adam updates, and Polyak target blending.
//!
//! Everything is `f64` and fully deterministic for a fixed seed. Networks are
//! small (two hidden layers of a few hundred units), so plain loops over
//! contiguous row-major weight slices are all that is needed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HiddenActivation {
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputActivation {
    Linear,
    Sigmoid,
    Tanh,
}

/// Architecture of an MLP: layer sizes (input first, output last) plus the
/// hidden and output activations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, output_activation: OutputActivation) -> Self {
        Self {
            layer_sizes,
            hidden_activation: HiddenActivation::Relu,
            output_activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least input and output layers, got {:?}",
                self.layer_sizes
            )));
        }
        if self.layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidSpec(format!(
                "zero-sized layer in {:?}",
                self.layer_sizes
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of affine layers.
    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }
}

/// One dense layer: row-major `weights` of shape (out, in) and `biases` of
/// length out. Also reused as the container for gradients and Adam moments,
/// which share the parameter shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<DenseLayer>,
}

impl MlpParams {
    /// All-zero parameters with the spec's shapes. Used for gradient and
    /// moment accumulators.
    pub fn zeros(spec: &MlpSpec) -> Self {
        let layers = (0..spec.num_layers())
            .map(|l| DenseLayer {
                weights: vec![0.0; spec.layer_sizes[l + 1] * spec.layer_sizes[l]],
                biases: vec![0.0; spec.layer_sizes[l + 1]],
            })
            .collect();
        Self { layers }
    }

    pub fn set_zero(&mut self) {
        for layer in &mut self.layers {
            layer.weights.iter_mut().for_each(|w| *w = 0.0);
            layer.biases.iter_mut().for_each(|b| *b = 0.0);
        }
    }

    pub fn matches_spec(&self, spec: &MlpSpec) -> bool {
        self.layers.len() == spec.num_layers()
            && self.layers.iter().enumerate().all(|(l, layer)| {
                layer.weights.len() == spec.layer_sizes[l + 1] * spec.layer_sizes[l]
                    && layer.biases.len() == spec.layer_sizes[l + 1]
            })
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.iter().all(|w| w.is_finite()) && l.biases.iter().all(|b| b.is_finite())
        })
    }
}

/// Initialize parameters: weights uniform in (-1/sqrt(fan_in), +1/sqrt(fan_in)),
/// biases zero. Deterministic for a fixed seed.
pub fn init_mlp(spec: &MlpSpec, seed: u64) -> Result<MlpParams> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(spec.num_layers());
    for l in 0..spec.num_layers() {
        let fan_in = spec.layer_sizes[l];
        let fan_out = spec.layer_sizes[l + 1];
        let bound = 1.0 / (fan_in as f64).sqrt();
        let weights = (0..fan_out * fan_in)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        layers.push(DenseLayer {
            weights,
            biases: vec![0.0; fan_out],
        });
    }
    Ok(MlpParams { layers })
}

/// Per-layer activations recorded by [`forward`], sufficient for [`backward`].
///
/// `inputs[l]` is the input to layer l; `post[l]` is the activated output of
/// layer l (so `post.last()` is the network output).
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub inputs: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

fn affine(layer: &DenseLayer, input: &[f64], out: &mut Vec<f64>) {
    let in_dim = input.len();
    out.clear();
    for (o, b) in layer.biases.iter().enumerate() {
        let row = &layer.weights[o * in_dim..(o + 1) * in_dim];
        let dot: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum();
        out.push(b + dot);
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn forward(params: &MlpParams, spec: &MlpSpec, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
    if input.len() != spec.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "input length {} != spec input dim {}",
            input.len(),
            spec.input_dim()
        )));
    }
    if !params.matches_spec(spec) {
        return Err(Error::DimensionMismatch("params do not match spec".into()));
    }
    let n = spec.num_layers();
    let mut cache = ForwardCache {
        inputs: Vec::with_capacity(n),
        pre: Vec::with_capacity(n),
        post: Vec::with_capacity(n),
    };
    let mut x = input.to_vec();
    for (l, layer) in params.layers.iter().enumerate() {
        let mut z = Vec::new();
        affine(layer, &x, &mut z);
        let last = l == n - 1;
        let y: Vec<f64> = if last {
            match spec.output_activation {
                OutputActivation::Linear => z.clone(),
                OutputActivation::Sigmoid => z.iter().map(|&v| sigmoid(v)).collect(),
                OutputActivation::Tanh => z.iter().map(|&v| v.tanh()).collect(),
            }
        } else {
            z.iter().map(|&v| v.max(0.0)).collect()
        };
        cache.inputs.push(x);
        cache.pre.push(z);
        cache.post.push(y.clone());
        x = y;
    }
    let output = x;
    Ok((output, cache))
}

/// Exact gradients of the scalar loss whose gradient w.r.t. the network
/// output is `output_gradient`. Returns parameter gradients (same shapes as
/// the params) and the gradient w.r.t. the network input.
pub fn backward(
    params: &MlpParams,
    spec: &MlpSpec,
    cache: &ForwardCache,
    output_gradient: &[f64],
) -> Result<(MlpParams, Vec<f64>)> {
    let mut grads = MlpParams::zeros(spec);
    let input_grad = backward_accumulate(params, spec, cache, output_gradient, &mut grads)?;
    Ok((grads, input_grad))
}

/// Like [`backward`], but adds the parameter gradients into `grads` instead of
/// allocating. The training loop uses this to accumulate over a minibatch.
pub fn backward_accumulate(
    params: &MlpParams,
    spec: &MlpSpec,
    cache: &ForwardCache,
    output_gradient: &[f64],
    grads: &mut MlpParams,
) -> Result<Vec<f64>> {
    if output_gradient.len() != spec.output_dim() {
        return Err(Error::DimensionMismatch(format!(
            "output gradient length {} != output dim {}",
            output_gradient.len(),
            spec.output_dim()
        )));
    }
    let n = spec.num_layers();
    // Gradient w.r.t. the pre-activation of the current layer.
    let mut g = activation_backward(spec, n - 1, cache, output_gradient);
    for l in (0..n).rev() {
        let layer = &params.layers[l];
        let input = &cache.inputs[l];
        let in_dim = input.len();
        let glayer = &mut grads.layers[l];
        for (o, &go) in g.iter().enumerate() {
            glayer.biases[o] += go;
            let row = &mut glayer.weights[o * in_dim..(o + 1) * in_dim];
            for (gw, &xi) in row.iter_mut().zip(input) {
                *gw += go * xi;
            }
        }
        // Gradient w.r.t. this layer's input = W^T g, gated by the previous
        // layer's activation.
        let mut gx = vec![0.0; in_dim];
        for (o, &go) in g.iter().enumerate() {
            let row = &layer.weights[o * in_dim..(o + 1) * in_dim];
            for (gxi, &w) in gx.iter_mut().zip(row) {
                *gxi += go * w;
            }
        }
        if l > 0 {
            g = activation_backward(spec, l - 1, cache, &gx);
        } else {
            return Ok(gx);
        }
    }
    unreachable!()
}

/// Input gradient only, skipping parameter-gradient accumulation. Used when
/// the actor update backpropagates through a frozen critic.
pub fn backward_input(
    params: &MlpParams,
    spec: &MlpSpec,
    cache: &ForwardCache,
    output_gradient: &[f64],
) -> Result<Vec<f64>> {
    if output_gradient.len() != spec.output_dim() {
        return Err(Error::DimensionMismatch(format!(
            "output gradient length {} != output dim {}",
            output_gradient.len(),
            spec.output_dim()
        )));
    }
    let n = spec.num_layers();
    let mut g = activation_backward(spec, n - 1, cache, output_gradient);
    for l in (0..n).rev() {
        let layer = &params.layers[l];
        let in_dim = cache.inputs[l].len();
        let mut gx = vec![0.0; in_dim];
        for (o, &go) in g.iter().enumerate() {
            let row = &layer.weights[o * in_dim..(o + 1) * in_dim];
            for (gxi, &w) in gx.iter_mut().zip(row) {
                *gxi += go * w;
            }
        }
        if l > 0 {
            g = activation_backward(spec, l - 1, cache, &gx);
        } else {
            return Ok(gx);
        }
    }
    unreachable!()
}

/// Map a gradient w.r.t. layer `l`'s activated output into a gradient w.r.t.
/// its pre-activation.
fn activation_backward(spec: &MlpSpec, l: usize, cache: &ForwardCache, gy: &[f64]) -> Vec<f64> {
    let last = l == spec.num_layers() - 1;
    if last {
        match spec.output_activation {
            OutputActivation::Linear => gy.to_vec(),
            OutputActivation::Sigmoid => cache.post[l]
                .iter()
                .zip(gy)
                .map(|(&s, &g)| g * s * (1.0 - s))
                .collect(),
            OutputActivation::Tanh => cache.post[l]
                .iter()
                .zip(gy)
                .map(|(&t, &g)| g * (1.0 - t * t))
                .collect(),
        }
    } else {
        cache.pre[l]
            .iter()
            .zip(gy)
            .map(|(&z, &g)| if z > 0.0 { g } else { 0.0 })
            .collect()
    }
}

/// Adam optimizer state: first/second moment accumulators (parameter shapes),
/// step counter, and hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub m: MlpParams,
    pub v: MlpParams,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(spec: &MlpSpec, lr: f64) -> Self {
        Self {
            m: MlpParams::zeros(spec),
            v: MlpParams::zeros(spec),
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update, in place. Rejects non-finite gradients.
pub fn adam_step(params: &mut MlpParams, grads: &MlpParams, state: &mut AdamState) -> Result<()> {
    if params.layers.len() != grads.layers.len() {
        return Err(Error::DimensionMismatch("grads do not match params".into()));
    }
    if !grads.is_finite() {
        return Err(Error::NonFiniteGradient(format!(
            "at step t={}",
            state.t + 1
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for l in 0..params.layers.len() {
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
                v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
            }
        };
        update(
            &mut params.layers[l].weights,
            &grads.layers[l].weights,
            &mut state.m.layers[l].weights,
            &mut state.v.layers[l].weights,
        );
        update(
            &mut params.layers[l].biases,
            &grads.layers[l].biases,
            &mut state.m.layers[l].biases,
            &mut state.v.layers[l].biases,
        );
    }
    Ok(())
}

/// Polyak blend: target <- tau * online + (1 - tau) * target, element-wise.
pub fn soft_update(target: &mut MlpParams, online: &MlpParams, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("tau {tau} outside [0,1]")));
    }
    if target.layers.len() != online.layers.len() {
        return Err(Error::DimensionMismatch("target/online shape mismatch".into()));
    }
    for (tl, ol) in target.layers.iter_mut().zip(&online.layers) {
        if tl.weights.len() != ol.weights.len() || tl.biases.len() != ol.biases.len() {
            return Err(Error::DimensionMismatch("target/online shape mismatch".into()));
        }
        for (t, &o) in tl.weights.iter_mut().zip(&ol.weights) {
            *t = tau * o + (1.0 - tau) * *t;
        }
        for (t, &o) in tl.biases.iter_mut().zip(&ol.biases) {
            *t = tau * o + (1.0 - tau) * *t;
        }
    }
    Ok(())
}
