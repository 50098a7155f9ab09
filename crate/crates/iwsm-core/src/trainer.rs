//! Replay-buffer training loop.
//!
//! Outer iterations refresh the buffer by simulating the model reverse SDE
//! with the current network; inner iterations draw a buffer mini-batch,
//! forward-perturb each point to a uniformly random time, build score targets
//! and self-normalized importance weights from the shared inner samples, and
//! take one clipped Adam step on the weighted score-matching loss.
//!
//! Weight bookkeeping per inner step, for a mini-batch `{x0_b}` of size `B`
//! and `S` perturbed points per `b`:
//! * `log N_K` reuses the `K = L` inner samples already drawn for the score
//!   target (no extra energy evaluations);
//! * `log D_M` averages the forward kernel over the `B` mini-batch points
//!   themselves (`M = B`), so no auxiliary buffer reads are needed;
//! * weights are normalized within each `b` over its `S` points.
//!
//! The buffer stores physical coordinates; all estimator work happens in
//! normalized coordinates through the benchmark scale.

use alloc::string::String;
use alloc::vec::Vec;

use crate::energy::{Energy, EnergyFn};
use crate::error::{Error, Result};
use crate::estimators::{
    log_denominator, log_numerator_from, score_target_from, snis_weights, InnerSamples,
    ScoreTarget,
};
use crate::numerics::{par_collect, Rng};
use crate::sampler::sample_reverse_with_score;
use crate::scorenet::{adam_step, AdamState, Checkpoint, NetSpec, ScoreNet};
use crate::sde::VeSchedule;

use serde::{Deserialize, Serialize};

/// Fixed-capacity FIFO ring of sample points in physical coordinates.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    dim: usize,
    storage: Vec<f64>,
    head: usize,
    len: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, dim: usize) -> Self {
        Self { capacity, dim, storage: alloc::vec![0.0; capacity * dim], head: 0, len: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Append one point, evicting the oldest when full.
    pub fn push(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.dim);
        let slot = self.head * self.dim;
        self.storage[slot..slot + self.dim].copy_from_slice(row);
        self.head = (self.head + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
    }

    pub fn row(&self, i: usize) -> &[f64] {
        debug_assert!(i < self.len);
        &self.storage[i * self.dim..(i + 1) * self.dim]
    }

    /// `n` uniform random reads over current contents (with replacement).
    pub fn draw_indices(&self, n: usize, rng: &mut Rng) -> Vec<usize> {
        (0..n).map(|_| rng.index(self.len)).collect()
    }
}

/// Training hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Buffer mini-batch size `B` (also the denominator sample count `M`).
    pub batch_b: usize,
    /// Perturbed samples per buffer point (`S`).
    pub snis_s: usize,
    /// Inner Monte Carlo samples (`L = K`).
    pub inner_l: usize,
    pub n_inner: usize,
    pub n_outer: usize,
    /// Samples generated and pushed to the buffer per outer iteration.
    pub gen_per_outer: usize,
    /// Reverse-SDE steps used when refreshing the buffer.
    pub gen_steps: usize,
    pub buffer_capacity: usize,
    pub lr: f64,
    /// Euclidean norm cap on each score target.
    pub target_clip: Option<f64>,
    /// Global norm cap on the parameter gradient.
    pub grad_clip: Option<f64>,
    pub seed: u64,
    /// Emit a checkpoint every this many inner steps (0 = final only).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_b: 128,
            snis_s: 5,
            inner_l: 500,
            n_inner: 100,
            n_outer: 30,
            gen_per_outer: 1000,
            gen_steps: 250,
            buffer_capacity: 10_000,
            lr: 5e-4,
            target_clip: Some(70.0),
            grad_clip: Some(70.0),
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_b == 0
            || self.snis_s == 0
            || self.inner_l == 0
            || self.gen_per_outer == 0
            || self.gen_steps == 0
            || self.buffer_capacity == 0
        {
            return Err(Error::InvalidArg(String::from("train config counts must be >= 1")));
        }
        Ok(())
    }
}

/// Per-step training record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub loss: f64,
    pub buffer_fill: usize,
}

/// Observer for training progress; file logging lives behind this trait so
/// the loop itself stays IO-free.
pub trait TrainSink {
    fn on_step(&mut self, _rec: &StepRecord) {}
    fn on_checkpoint(&mut self, _ckpt: &Checkpoint) -> Result<()> {
        Ok(())
    }
}

/// Sink that discards everything.
pub struct NullSink;

impl TrainSink for NullSink {}

/// Training outcome: final (or last good) checkpoint plus the loss history.
#[derive(Clone, Debug)]
pub struct TrainResult {
    pub checkpoint: Checkpoint,
    pub history: Vec<StepRecord>,
    /// Set when training stopped early on a non-finite loss; the checkpoint
    /// is the last good one.
    pub aborted: Option<String>,
}

/// Simulate the model reverse SDE with the current network and append the
/// results (physical coordinates) to the buffer. Returns the number of
/// aborted trajectories.
pub fn fill_buffer(
    f: &EnergyFn,
    sched: &VeSchedule,
    net: &ScoreNet,
    n: usize,
    n_steps: usize,
    seed: u64,
    buffer: &mut ReplayBuffer,
) -> Result<usize> {
    let (rows, failures) = sample_reverse_with_score(
        f.dim(),
        sched,
        n_steps,
        1e-3,
        n,
        seed,
        |x, t, _rng| Ok(net.forward(x, t)),
    )?;
    let scale = f.scale;
    let mut phys = alloc::vec![0.0; f.dim()];
    for row in rows {
        for (p, v) in phys.iter_mut().zip(&row) {
            *p = v * scale;
        }
        buffer.push(&phys);
    }
    Ok(failures)
}

/// Importance-weighted score-matching training against a benchmark energy.
pub fn train<S: TrainSink>(
    f: &EnergyFn,
    sched: &VeSchedule,
    netspec: NetSpec,
    cfg: &TrainConfig,
    sink: &mut S,
) -> Result<TrainResult> {
    train_impl(f, sched, netspec, cfg, sink, false)
}

/// Identical pipeline with the importance weights forced uniform (`1/S`).
pub fn train_unweighted_ablation<S: TrainSink>(
    f: &EnergyFn,
    sched: &VeSchedule,
    netspec: NetSpec,
    cfg: &TrainConfig,
    sink: &mut S,
) -> Result<TrainResult> {
    train_impl(f, sched, netspec, cfg, sink, true)
}

struct PerPointWork {
    /// S perturbed points, row-major, normalized coordinates.
    points: Vec<f64>,
    t: f64,
    targets: Vec<ScoreTarget>,
    log_w: Vec<f64>,
}

fn train_impl<S: TrainSink>(
    f: &EnergyFn,
    sched: &VeSchedule,
    netspec: NetSpec,
    cfg: &TrainConfig,
    sink: &mut S,
    uniform_weights: bool,
) -> Result<TrainResult> {
    cfg.validate()?;
    let dim = f.dim();
    if netspec.input_dim != dim {
        return Err(Error::DimMismatch {
            expected: dim,
            got: netspec.input_dim,
            what: "net input vs benchmark",
        });
    }
    let energy = f.normalized();
    let scale = f.scale;
    let inv_scale = 1.0 / scale;
    let root = Rng::new(cfg.seed);
    let mut net = ScoreNet::init(netspec, &mut root.substream("net-init", 0))?;
    let mut adam = AdamState::new(net.params().len(), cfg.lr);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity, dim);

    // cold start: prior-like draws N(0, sigma_max^2) mapped to physical scale
    {
        let mut boot = root.substream("bootstrap", 0);
        let mut row = alloc::vec![0.0; dim];
        for _ in 0..cfg.gen_per_outer {
            for v in &mut row {
                *v = sched.sigma_max * boot.normal() * scale;
            }
            buffer.push(&row);
        }
    }

    let make_checkpoint = |net: &ScoreNet, adam: &AdamState, step: u64| {
        Checkpoint::new(net, adam, *sched, f.id(), scale, cfg.seed, step)
    };

    let mut history: Vec<StepRecord> = Vec::new();
    let mut last_good = make_checkpoint(&net, &adam, 0);
    let mut global_step: u64 = 0;

    for outer in 0..cfg.n_outer {
        fill_buffer(
            f,
            sched,
            &net,
            cfg.gen_per_outer,
            cfg.gen_steps,
            root.substream("gen", outer as u64).substream("seed", 0).next_u64(),
            &mut buffer,
        )?;

        for _inner in 0..cfg.n_inner {
            let mut step_rng = root.substream("step", global_step);
            let b = cfg.batch_b;
            let s_count = cfg.snis_s;

            // mini-batch of buffer points, normalized
            let indices = buffer.draw_indices(b, &mut step_rng);
            let mut x0_norm = alloc::vec![0.0; b * dim];
            for (bi, &idx) in indices.iter().enumerate() {
                for (k, v) in buffer.row(idx).iter().enumerate() {
                    x0_norm[bi * dim + k] = v * inv_scale;
                }
            }
            let x0_refs: Vec<&[f64]> = x0_norm.chunks_exact(dim).collect();
            // U(0,1] per batch element
            let times: Vec<f64> = (0..b).map(|_| 1.0 - step_rng.uniform()).collect();

            let step_seed_rng = step_rng.clone();
            let work: Vec<Result<PerPointWork>> = par_collect(b, |bi| {
                let mut rng = step_seed_rng.substream("b", bi as u64);
                let t = times[bi];
                let x0 = &x0_norm[bi * dim..(bi + 1) * dim];
                let mut points = alloc::vec![0.0; s_count * dim];
                let mut targets = Vec::with_capacity(s_count);
                let mut log_w = Vec::with_capacity(s_count);
                for s in 0..s_count {
                    let x_t = sched.perturb(x0, t, &mut rng)?;
                    let inner =
                        InnerSamples::draw(&energy, sched, &x_t, t, cfg.inner_l, &mut rng)?;
                    let target = score_target_from(&inner, cfg.target_clip)?;
                    let log_nk = log_numerator_from(&inner)?;
                    let log_dm = log_denominator(sched, &x_t, t, &x0_refs)?;
                    points[s * dim..(s + 1) * dim].copy_from_slice(&x_t);
                    targets.push(target);
                    log_w.push(log_nk - log_dm);
                }
                Ok(PerPointWork { points, t, targets, log_w })
            });

            // assemble the flat batch in b-major order
            let total = b * s_count;
            let mut xs = alloc::vec![0.0; total * dim];
            let mut ts = alloc::vec![0.0; total];
            let mut weights = alloc::vec![0.0; total];
            let mut targets: Vec<ScoreTarget> = Vec::with_capacity(total);
            for (bi, item) in work.into_iter().enumerate() {
                let item = item?;
                let w = if uniform_weights {
                    alloc::vec![1.0 / s_count as f64; s_count]
                } else {
                    snis_weights(&item.log_w)?
                };
                for s in 0..s_count {
                    let row = bi * s_count + s;
                    xs[row * dim..(row + 1) * dim]
                        .copy_from_slice(&item.points[s * dim..(s + 1) * dim]);
                    ts[row] = item.t;
                    weights[row] = w[s];
                }
                targets.extend(item.targets);
            }

            let cache = net.forward_batch(&xs, &ts);
            let inv_b = 1.0 / b as f64;
            let mut loss = 0.0;
            let mut upstream = alloc::vec![0.0; total * dim];
            for row in 0..total {
                let out = &cache.outputs[row * dim..(row + 1) * dim];
                let target = &targets[row].value;
                let w = weights[row];
                let mut sq = 0.0;
                for k in 0..dim {
                    let diff = out[k] - target[k];
                    sq += diff * diff;
                    upstream[row * dim + k] = 2.0 * w * inv_b * diff;
                }
                loss += w * inv_b * sq;
            }

            if !loss.is_finite() {
                return Ok(TrainResult {
                    checkpoint: last_good,
                    history,
                    aborted: Some(alloc::format!(
                        "non-finite loss at step {global_step}; last good checkpoint retained"
                    )),
                });
            }

            let grad = net.backward(&cache, &upstream)?;
            adam_step(&mut adam, &mut net, &grad, cfg.grad_clip)?;
            global_step += 1;

            let rec = StepRecord { step: global_step, loss, buffer_fill: buffer.len() };
            history.push(rec);
            sink.on_step(&rec);
            last_good = make_checkpoint(&net, &adam, global_step);
            if cfg.checkpoint_every > 0 && global_step % cfg.checkpoint_every as u64 == 0 {
                sink.on_checkpoint(&last_good)?;
            }
        }
    }

    let final_ckpt = make_checkpoint(&net, &adam, global_step);
    sink.on_checkpoint(&final_ckpt)?;
    Ok(TrainResult { checkpoint: final_ckpt, history, aborted: None })
}
