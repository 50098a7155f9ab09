//! Run configuration: JSON schema, per-benchmark defaults, resolution.
//!
//! A config file may omit any field below the benchmark id; omitted fields
//! take the documented benchmark defaults. The fully resolved configuration
//! is written next to the run outputs as `resolved_config.json` and is itself
//! a valid config file, so a run can be reproduced from its own echo.
//! Unknown keys are rejected everywhere.

use serde::{Deserialize, Serialize};

use iwsm_core::energy::EnergyFn;
use iwsm_core::scorenet::{Activation, NetSpec};
use iwsm_core::sde::VeSchedule;
use iwsm_core::trainer::TrainConfig;

use crate::errors::{CliError, CliResult};

/// Benchmark selector plus per-variant parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// `gmm40`, `gmm80`, `gmm120`, `gmm<m>`, `gauss<d>`, `dw4`, `lj13`,
    /// `lj55`, `lj<n>`, or `bimodal1d`.
    pub id: String,
    /// Seed fixing the GMM component means.
    #[serde(default)]
    pub gmm_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Override of the normalized-to-physical coordinate scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl BenchmarkConfig {
    pub fn from_id(id: &str) -> Self {
        Self { id: id.to_string(), gmm_seed: 0, mu1: None, mu2: None, sigma: None, scale: None }
    }

    /// Instantiate the energy function this config describes.
    pub fn build(&self) -> CliResult<EnergyFn> {
        let id = self.id.as_str();
        let mut f = if let Some(m) = id.strip_prefix("gmm") {
            let m: usize = m
                .parse()
                .map_err(|_| CliError::config(format!("bad gmm component count in '{id}'")))?;
            if m == 0 {
                return Err(CliError::config("gmm needs at least one component"));
            }
            EnergyFn::gmm(m, self.gmm_seed)
        } else if let Some(d) = id.strip_prefix("gauss") {
            let d: usize =
                d.parse().map_err(|_| CliError::config(format!("bad gauss dimension in '{id}'")))?;
            if d == 0 {
                return Err(CliError::config("gauss needs dimension >= 1"));
            }
            EnergyFn::gauss(d)
        } else if id == "dw4" {
            EnergyFn::dw4()
        } else if let Some(n) = id.strip_prefix("lj") {
            let n: usize = n
                .parse()
                .map_err(|_| CliError::config(format!("bad particle count in '{id}'")))?;
            if n < 2 {
                return Err(CliError::config("lj needs at least two particles"));
            }
            EnergyFn::lj(n)
        } else if id == "bimodal1d" {
            EnergyFn::bimodal1d(
                self.mu1.unwrap_or(-2.0),
                self.mu2.unwrap_or(2.0),
                self.sigma.unwrap_or(1.0),
            )
        } else {
            return Err(CliError::config(format!("unknown benchmark '{id}'")));
        };
        if let Some(scale) = self.scale {
            if !(scale > 0.0) {
                return Err(CliError::config("scale must be positive"));
            }
            f = f.with_scale(scale);
        }
        Ok(f)
    }
}

/// Per-benchmark defaults for everything a config file may omit.
pub struct BenchmarkDefaults {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub inner_l: usize,
    pub target_clip: f64,
    pub lr: f64,
    pub snis_s: usize,
    pub buffer_capacity: usize,
    pub dwes_l: usize,
}

pub fn defaults_for(id: &str) -> BenchmarkDefaults {
    match id {
        "gmm80" => BenchmarkDefaults {
            sigma_min: 1e-5,
            sigma_max: 1.0,
            inner_l: 500,
            target_clip: 70.0,
            lr: 5e-4,
            snis_s: 5,
            buffer_capacity: 20_000,
            dwes_l: 1000,
        },
        "dw4" => BenchmarkDefaults {
            sigma_min: 1e-5,
            sigma_max: 3.0,
            inner_l: 1000,
            target_clip: 20.0,
            lr: 1e-3,
            snis_s: 2,
            buffer_capacity: 10_000,
            dwes_l: 1000,
        },
        "lj13" => BenchmarkDefaults {
            sigma_min: 0.01,
            sigma_max: 2.0,
            inner_l: 1000,
            target_clip: 20.0,
            lr: 1e-3,
            snis_s: 2,
            buffer_capacity: 10_000,
            dwes_l: 1000,
        },
        "lj55" => BenchmarkDefaults {
            sigma_min: 0.5,
            sigma_max: 4.0,
            inner_l: 100,
            target_clip: 20.0,
            lr: 1e-3,
            snis_s: 2,
            buffer_capacity: 10_000,
            dwes_l: 100,
        },
        id if id.starts_with("gauss") || id == "bimodal1d" => BenchmarkDefaults {
            sigma_min: 1e-2,
            sigma_max: 5.0,
            inner_l: 500,
            target_clip: 70.0,
            lr: 5e-4,
            snis_s: 5,
            buffer_capacity: 10_000,
            dwes_l: 1000,
        },
        // gmm40, gmm120, and other GMM sizes
        _ => BenchmarkDefaults {
            sigma_min: 1e-5,
            sigma_max: 1.0,
            inner_l: 500,
            target_clip: 70.0,
            lr: 5e-4,
            snis_s: 5,
            buffer_capacity: 10_000,
            dwes_l: 1000,
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub sigma_min: f64,
    pub sigma_max: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_layers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_embed_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fourier_features_x: Option<usize>,
}

impl NetConfig {
    fn resolve(&self, input_dim: usize) -> NetSpec {
        let base = NetSpec::new(input_dim);
        NetSpec {
            input_dim,
            hidden_layers: self.hidden_layers.unwrap_or(base.hidden_layers),
            hidden_width: self.hidden_width.unwrap_or(base.hidden_width),
            time_embed_dim: self.time_embed_dim.unwrap_or(base.time_embed_dim),
            fourier_features_x: self.fourier_features_x.unwrap_or(base.fourier_features_x),
            activation: Activation::Silu,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_b: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snis_s: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_inner: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_outer: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen_per_outer: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buffer_capacity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    /// Score-target norm cap; 0 disables clipping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_clip: Option<f64>,
    /// Parameter-gradient norm cap; 0 disables clipping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_clip: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_floor: Option<f64>,
}

/// Top-level run configuration document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub benchmark: BenchmarkConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleConfig>,
    #[serde(default)]
    pub net: NetConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub seed: u64,
}

/// Fully resolved run parameters, ready to execute and to echo.
pub struct ResolvedRun {
    pub energy: EnergyFn,
    pub schedule: VeSchedule,
    pub net_spec: NetSpec,
    pub train: TrainConfig,
    pub n_steps: usize,
    pub t_floor: f64,
    pub seed: u64,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("config parse: {e}")))
    }

    pub fn resolve(&self) -> CliResult<ResolvedRun> {
        let energy = self.benchmark.build()?;
        let defaults = defaults_for(&self.benchmark.id);
        let sched_cfg = self.schedule.unwrap_or(ScheduleConfig {
            sigma_min: defaults.sigma_min,
            sigma_max: defaults.sigma_max,
        });
        let schedule = VeSchedule::new(sched_cfg.sigma_min, sched_cfg.sigma_max)
            .map_err(CliError::from)?;
        let net_spec = self.net.resolve(iwsm_core::energy::Energy::dim(&energy));
        net_spec.validate().map_err(CliError::from)?;
        let base = TrainConfig::default();
        let clip = |v: Option<f64>, default: f64| -> Option<f64> {
            match v {
                Some(x) if x == 0.0 => None,
                Some(x) => Some(x),
                None => Some(default),
            }
        };
        let train = TrainConfig {
            batch_b: self.train.batch_b.unwrap_or(base.batch_b),
            snis_s: self.train.snis_s.unwrap_or(defaults.snis_s),
            inner_l: self.train.inner_l.unwrap_or(defaults.inner_l),
            n_inner: self.train.n_inner.unwrap_or(base.n_inner),
            n_outer: self.train.n_outer.unwrap_or(base.n_outer),
            gen_per_outer: self.train.gen_per_outer.unwrap_or(base.gen_per_outer),
            gen_steps: self.train.gen_steps.unwrap_or(base.gen_steps),
            buffer_capacity: self.train.buffer_capacity.unwrap_or(defaults.buffer_capacity),
            lr: self.train.lr.unwrap_or(defaults.lr),
            target_clip: clip(self.train.target_clip, defaults.target_clip),
            grad_clip: clip(self.train.grad_clip, defaults.target_clip),
            seed: self.seed,
            checkpoint_every: self.train.checkpoint_every.unwrap_or(0),
        };
        Ok(ResolvedRun {
            energy,
            schedule,
            net_spec,
            train,
            n_steps: self.integrator.n_steps.unwrap_or(1000),
            t_floor: self.integrator.t_floor.unwrap_or(1e-3),
            seed: self.seed,
        })
    }

    /// Echo of this config with every field filled in.
    pub fn resolved_echo(&self) -> CliResult<RunConfig> {
        let r = self.resolve()?;
        Ok(RunConfig {
            benchmark: BenchmarkConfig {
                id: self.benchmark.id.clone(),
                gmm_seed: self.benchmark.gmm_seed,
                mu1: self.benchmark.mu1,
                mu2: self.benchmark.mu2,
                sigma: self.benchmark.sigma,
                scale: Some(r.energy.scale),
            },
            schedule: Some(ScheduleConfig {
                sigma_min: r.schedule.sigma_min,
                sigma_max: r.schedule.sigma_max,
            }),
            net: NetConfig {
                hidden_layers: Some(r.net_spec.hidden_layers),
                hidden_width: Some(r.net_spec.hidden_width),
                time_embed_dim: Some(r.net_spec.time_embed_dim),
                fourier_features_x: Some(r.net_spec.fourier_features_x),
            },
            train: TrainSection {
                batch_b: Some(r.train.batch_b),
                snis_s: Some(r.train.snis_s),
                inner_l: Some(r.train.inner_l),
                n_inner: Some(r.train.n_inner),
                n_outer: Some(r.train.n_outer),
                gen_per_outer: Some(r.train.gen_per_outer),
                gen_steps: Some(r.train.gen_steps),
                buffer_capacity: Some(r.train.buffer_capacity),
                lr: Some(r.train.lr),
                target_clip: Some(r.train.target_clip.unwrap_or(0.0)),
                grad_clip: Some(r.train.grad_clip.unwrap_or(0.0)),
                checkpoint_every: Some(r.train.checkpoint_every),
            },
            integrator: IntegratorSection { n_steps: Some(r.n_steps), t_floor: Some(r.t_floor) },
            seed: self.seed,
        })
    }
}
