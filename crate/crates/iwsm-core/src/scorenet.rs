//! MLP score network `s_theta(x, t)` with exact reverse-mode gradients.
//!
//! The input point (in normalized coordinates) is expanded with Fourier
//! features, the time with a sinusoidal embedding; three SiLU hidden layers
//! and a zero-initialized linear output head produce the score. Parameters
//! live in one flat `f64` vector so the optimizer and checkpoints stay
//! trivial.
//!
//! Feature layout, documented exactly:
//! * x-features: the raw coordinates, then per coordinate `j` and frequency
//!   index `k = 0..F-1` the pair `(sin(2 pi 2^k x_j), cos(2 pi 2^k x_j))`;
//! * time embedding: `half = time_embed_dim / 2` pairs
//!   `(sin(w_k t), cos(w_k t))` with geometric frequencies
//!   `w_k = 2 pi * 2^(k/4)`, which span roughly five decades over `t in [0,1]`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::fmath;
use crate::numerics::{l2_norm, Rng};
use crate::sde::VeSchedule;

use serde::{Deserialize, Serialize};

const TWO_PI: f64 = core::f64::consts::TAU;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Silu,
}

/// Architecture description; fully determines the parameter count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub time_embed_dim: usize,
    /// Geometric Fourier frequencies per coordinate; 0 disables the expansion.
    pub fourier_features_x: usize,
    pub activation: Activation,
}

impl NetSpec {
    /// Default architecture: 3 hidden layers of width 128 with a
    /// 128-dimensional time embedding and 8 Fourier frequencies per coordinate.
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_layers: 3,
            hidden_width: 128,
            time_embed_dim: 128,
            fourier_features_x: 8,
            activation: Activation::Silu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_layers == 0 || self.hidden_width == 0 {
            return Err(Error::InvalidArg(String::from("net dimensions must be >= 1")));
        }
        if self.time_embed_dim == 0 || self.time_embed_dim % 2 != 0 {
            return Err(Error::InvalidArg(String::from("time_embed_dim must be even and >= 2")));
        }
        Ok(())
    }

    /// Dimension of the expanded `(x, t)` feature vector.
    pub fn feature_dim(&self) -> usize {
        self.input_dim * (1 + 2 * self.fourier_features_x) + self.time_embed_dim
    }

    /// `(fan_in, fan_out)` per linear layer, hidden layers then output head.
    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_layers + 1);
        let mut fan_in = self.feature_dim();
        for _ in 0..self.hidden_layers {
            dims.push((fan_in, self.hidden_width));
            fan_in = self.hidden_width;
        }
        dims.push((fan_in, self.input_dim));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }

    /// Write the feature expansion of `(x, t)` into `out`.
    fn features_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.input_dim);
        debug_assert_eq!(out.len(), self.feature_dim());
        let mut k = 0;
        for &v in x {
            out[k] = v;
            k += 1;
        }
        for &v in x {
            let mut freq = TWO_PI;
            for _ in 0..self.fourier_features_x {
                out[k] = fmath::sin(freq * v);
                out[k + 1] = fmath::cos(freq * v);
                k += 2;
                freq *= 2.0;
            }
        }
        let half = self.time_embed_dim / 2;
        for j in 0..half {
            let w = TWO_PI * fmath::powf(2.0, j as f64 / 4.0);
            out[k] = fmath::sin(w * t);
            out[k + 1] = fmath::cos(w * t);
            k += 2;
        }
        debug_assert_eq!(k, out.len());
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + fmath::exp(-z))
}

/// Score network with a flat parameter vector.
#[derive(Clone, Debug)]
pub struct ScoreNet {
    spec: NetSpec,
    params: Vec<f64>,
    /// Bumped on every parameter mutation; forward caches record it so a
    /// backward pass against stale activations is rejected.
    version: u64,
}

/// Cached activations from [`ScoreNet::forward_batch`].
pub struct ForwardBatch {
    version: u64,
    pub batch: usize,
    features: Vec<f64>,
    /// Per hidden layer: pre-activations `z`, batch-major.
    pre_acts: Vec<Vec<f64>>,
    /// Per hidden layer: `sigmoid(z)`, batch-major.
    sigmoids: Vec<Vec<f64>>,
    /// Network outputs, batch-major `batch x input_dim`.
    pub outputs: Vec<f64>,
}

impl ForwardBatch {
    pub fn output_row(&self, i: usize) -> &[f64] {
        let d = self.outputs.len() / self.batch;
        &self.outputs[i * d..(i + 1) * d]
    }
}

impl ScoreNet {
    /// Hidden weights `N(0, 1/fan_in)`, zero biases, zero output head, so the
    /// initial score field is identically zero.
    pub fn init(spec: NetSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let dims = spec.layer_dims();
        let mut params = Vec::with_capacity(spec.param_count());
        let n_layers = dims.len();
        for (l, (fan_in, fan_out)) in dims.iter().enumerate() {
            let last = l == n_layers - 1;
            let sd = 1.0 / fmath::sqrt(*fan_in as f64);
            for _ in 0..fan_in * fan_out {
                params.push(if last { 0.0 } else { sd * rng.normal() });
            }
            params.extend(core::iter::repeat(0.0).take(*fan_out));
        }
        Ok(Self { spec, params, version: 0 })
    }

    /// Rebuild from a flat parameter vector (checkpoint restore).
    pub fn from_params(spec: NetSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return Err(Error::DimMismatch {
                expected: spec.param_count(),
                got: params.len(),
                what: "score net parameters",
            });
        }
        Ok(Self { spec, params, version: 0 })
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access; invalidates outstanding forward caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    /// `s_theta(x, t)` for a single normalized point.
    pub fn forward(&self, x: &[f64], t: f64) -> Vec<f64> {
        let cache = self.forward_batch(x, &[t]);
        cache.outputs
    }

    /// Forward pass over a batch (`xs` is row-major `batch x input_dim`),
    /// caching what backward needs.
    pub fn forward_batch(&self, xs: &[f64], ts: &[f64]) -> ForwardBatch {
        let d = self.spec.input_dim;
        let batch = ts.len();
        debug_assert_eq!(xs.len(), batch * d);
        let feat_dim = self.spec.feature_dim();
        let n_hidden = self.spec.hidden_layers;

        let mut features = alloc::vec![0.0; batch * feat_dim];
        for (s, &t) in ts.iter().enumerate() {
            self.spec.features_into(
                &xs[s * d..(s + 1) * d],
                t,
                &mut features[s * feat_dim..(s + 1) * feat_dim],
            );
        }

        let mut pre_acts = Vec::with_capacity(n_hidden);
        let mut sigmoids = Vec::with_capacity(n_hidden);
        let mut current = features.clone();
        let mut current_dim = feat_dim;
        let mut offset = 0;
        for (fan_in, fan_out) in self.spec.layer_dims() {
            let w = &self.params[offset..offset + fan_in * fan_out];
            let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let mut z = alloc::vec![0.0; batch * fan_out];
            for s in 0..batch {
                let input = &current[s * current_dim..(s + 1) * current_dim];
                let out = &mut z[s * fan_out..(s + 1) * fan_out];
                for (o, out_v) in out.iter_mut().enumerate() {
                    let row = &w[o * fan_in..(o + 1) * fan_in];
                    let mut acc = b[o];
                    for (wi, xi) in row.iter().zip(input) {
                        acc += wi * xi;
                    }
                    *out_v = acc;
                }
            }
            if pre_acts.len() < n_hidden {
                // hidden layer: apply SiLU and keep going
                let sig: Vec<f64> = z.iter().map(|&v| sigmoid(v)).collect();
                current = z.iter().zip(&sig).map(|(&zv, &sv)| zv * sv).collect();
                current_dim = fan_out;
                pre_acts.push(z);
                sigmoids.push(sig);
            } else {
                // output head
                return ForwardBatch {
                    version: self.version,
                    batch,
                    features,
                    pre_acts,
                    sigmoids,
                    outputs: z,
                };
            }
        }
        unreachable!("layer_dims always ends with the output head");
    }

    /// Exact gradient of `sum_s <upstream_s, forward(x_s, t_s)>` with respect
    /// to the flat parameters. `upstream` is batch-major `batch x input_dim`.
    pub fn backward(&self, cache: &ForwardBatch, upstream: &[f64]) -> Result<Vec<f64>> {
        if cache.version != self.version {
            return Err(Error::InvalidArg(String::from(
                "stale forward cache: parameters changed since forward_batch",
            )));
        }
        let d = self.spec.input_dim;
        let batch = cache.batch;
        if upstream.len() != batch * d {
            return Err(Error::DimMismatch {
                expected: batch * d,
                got: upstream.len(),
                what: "backward upstream",
            });
        }
        let dims = self.spec.layer_dims();
        let feat_dim = self.spec.feature_dim();

        let mut grad = alloc::vec![0.0; self.params.len()];
        let layer_offsets: Vec<usize> = {
            let mut offs = Vec::with_capacity(dims.len());
            let mut o = 0;
            for (fi, fo) in &dims {
                offs.push(o);
                o += fi * fo + fo;
            }
            offs
        };

        let mut delta = upstream.to_vec(); // cotangent at the current layer output
        for l in (0..dims.len()).rev() {
            let (fan_in, fan_out) = dims[l];
            let w_off = layer_offsets[l];
            let w = &self.params[w_off..w_off + fan_in * fan_out];
            let mut next_delta = alloc::vec![0.0; batch * fan_in];
            for s in 0..batch {
                let dl = &delta[s * fan_out..(s + 1) * fan_out];
                // layer input: features for layer 0, silu(z) = z * sigmoid(z)
                // of the previous hidden layer otherwise
                for (o, &dv) in dl.iter().enumerate() {
                    if dv == 0.0 {
                        continue;
                    }
                    let g_row = &mut grad[w_off + o * fan_in..w_off + (o + 1) * fan_in];
                    if l == 0 {
                        let feats = &cache.features[s * feat_dim..(s + 1) * feat_dim];
                        for (gi, xi) in g_row.iter_mut().zip(feats) {
                            *gi += dv * xi;
                        }
                    } else {
                        let z = &cache.pre_acts[l - 1][s * fan_in..(s + 1) * fan_in];
                        let sg = &cache.sigmoids[l - 1][s * fan_in..(s + 1) * fan_in];
                        for i in 0..fan_in {
                            g_row[i] += dv * z[i] * sg[i];
                        }
                    }
                    grad[w_off + fan_in * fan_out + o] += dv;
                }
                // propagate to the layer input
                let nd = &mut next_delta[s * fan_in..(s + 1) * fan_in];
                for (o, &dv) in dl.iter().enumerate() {
                    if dv == 0.0 {
                        continue;
                    }
                    let row = &w[o * fan_in..(o + 1) * fan_in];
                    for (ni, wi) in nd.iter_mut().zip(row) {
                        *ni += dv * wi;
                    }
                }
            }
            if l > 0 {
                // multiply by silu'(z) of hidden layer l-1
                let z = &cache.pre_acts[l - 1];
                let sg = &cache.sigmoids[l - 1];
                for (nd, (&zv, &sv)) in next_delta.iter_mut().zip(z.iter().zip(sg.iter())) {
                    *nd *= sv * (1.0 + zv * (1.0 - sv));
                }
            }
            delta = next_delta;
        }
        Ok(grad)
    }
}

/// Adam optimizer state over the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
}

impl AdamState {
    pub fn new(param_count: usize, lr: f64) -> Self {
        Self {
            step: 0,
            m: alloc::vec![0.0; param_count],
            v: alloc::vec![0.0; param_count],
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr,
        }
    }
}

/// One bias-corrected Adam update; `clip_norm` rescales the gradient's global
/// norm before the moment updates.
pub fn adam_step(
    state: &mut AdamState,
    net: &mut ScoreNet,
    grad: &[f64],
    clip_norm: Option<f64>,
) -> Result<()> {
    if grad.len() != state.m.len() || grad.len() != net.params().len() {
        return Err(Error::DimMismatch {
            expected: net.params().len(),
            got: grad.len(),
            what: "adam gradient",
        });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("adam gradient"));
    }
    let mut scale = 1.0;
    if let Some(max_norm) = clip_norm {
        let norm = l2_norm(grad);
        if norm > max_norm {
            scale = max_norm / norm;
        }
    }
    state.step += 1;
    let b1 = state.beta1;
    let b2 = state.beta2;
    let bc1 = 1.0 - fmath::powf(b1, state.step as f64);
    let bc2 = 1.0 - fmath::powf(b2, state.step as f64);
    let params = net.params_mut();
    for i in 0..grad.len() {
        let g = grad[i] * scale;
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= state.lr * m_hat / (fmath::sqrt(v_hat) + state.eps);
    }
    Ok(())
}

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Serializable training snapshot: architecture, schedule, benchmark
/// identity, and the flat parameter/moment arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub net_spec: NetSpec,
    pub schedule: VeSchedule,
    pub benchmark_id: String,
    pub scale: f64,
    pub seed: u64,
    pub training_step: u64,
    pub params: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub adam_step_count: u64,
    pub lr: f64,
}

impl Checkpoint {
    pub fn new(
        net: &ScoreNet,
        adam: &AdamState,
        schedule: VeSchedule,
        benchmark_id: String,
        scale: f64,
        seed: u64,
        training_step: u64,
    ) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            net_spec: net.spec().clone(),
            schedule,
            benchmark_id,
            scale,
            seed,
            training_step,
            params: net.params().to_vec(),
            adam_m: adam.m.clone(),
            adam_v: adam.v.clone(),
            adam_step_count: adam.step,
            lr: adam.lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Checkpoint(alloc::format!(
                "unsupported format version {} (expected {})",
                self.format_version,
                CHECKPOINT_FORMAT_VERSION
            )));
        }
        self.net_spec.validate()?;
        if self.params.len() != self.net_spec.param_count() {
            return Err(Error::Checkpoint(alloc::format!(
                "parameter count {} does not match net spec ({})",
                self.params.len(),
                self.net_spec.param_count()
            )));
        }
        if self.adam_m.len() != self.params.len() || self.adam_v.len() != self.params.len() {
            return Err(Error::Checkpoint(String::from(
                "adam moment arrays do not match parameter count",
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)
            .map_err(|e| Error::Checkpoint(alloc::format!("decode failed: {e}")))?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    /// Rebuild the network from the stored parameters.
    pub fn build_net(&self) -> Result<ScoreNet> {
        self.validate()?;
        ScoreNet::from_params(self.net_spec.clone(), self.params.clone())
    }

    pub fn build_adam(&self) -> AdamState {
        AdamState {
            step: self.adam_step_count,
            m: self.adam_m.clone(),
            v: self.adam_v.clone(),
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr: self.lr,
        }
    }
}

#[cfg(feature = "std")]
pub fn save_checkpoint(ckpt: &Checkpoint, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, ckpt.to_json()).map_err(|e| Error::Io(alloc::format!("{e}")))
}

#[cfg(feature = "std")]
pub fn load_checkpoint(path: &std::path::Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(alloc::format!("{e}")))?;
    Checkpoint::from_json(&text)
}
