//! Subcommand implementations.

use std::path::{Path, PathBuf};

use serde::Serialize;

use iwsm_core::analysis::{estimator_scaling_report, toy_kl_report, ScalingSpec, ToyKlSpec};
use iwsm_core::energy::Energy;
use iwsm_core::metrics::{full_report, MetricsReport};
use iwsm_core::numerics::Rng;
use iwsm_core::sampler::{sample_reverse, IntegratorConfig, SampleSet, ScoreSource};
use iwsm_core::scorenet::{load_checkpoint, save_checkpoint};
use iwsm_core::sde::VeSchedule;
use iwsm_core::trainer::{train, train_unweighted_ablation};

use crate::config::{defaults_for, BenchmarkConfig, RunConfig};
use crate::errors::{CliError, CliResult};
use crate::io::{read_sample_csv, read_to_string, write_json, write_sample_csv};
use crate::sink::DirSink;

/// Sidecar metadata written next to every sample CSV.
#[derive(Serialize)]
struct SampleSidecar<'a> {
    benchmark: &'a str,
    source: &'a str,
    seed: u64,
    n_requested: usize,
    n_emitted: usize,
    failure_count: usize,
    config: serde_json::Value,
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("meta.json")
}

pub fn cmd_train(config_path: &Path, out_dir: &Path, ablation: bool) -> CliResult<()> {
    let cfg = RunConfig::parse(&read_to_string(config_path)?)?;
    let resolved = cfg.resolve()?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::io(format!("{}: {e}", out_dir.display())))?;
    write_json(&out_dir.join("resolved_config.json"), &cfg.resolved_echo()?)?;

    let mut sink = DirSink::new(out_dir.to_path_buf())?;
    let run = if ablation {
        train_unweighted_ablation(
            &resolved.energy,
            &resolved.schedule,
            resolved.net_spec.clone(),
            &resolved.train,
            &mut sink,
        )
    } else {
        train(
            &resolved.energy,
            &resolved.schedule,
            resolved.net_spec.clone(),
            &resolved.train,
            &mut sink,
        )
    }?;
    sink.finish()?;
    save_checkpoint(&run.checkpoint, &out_dir.join("ckpt_final.json"))?;

    #[derive(Serialize)]
    struct Summary<'a> {
        steps: usize,
        final_loss: Option<f64>,
        aborted: &'a Option<String>,
        ablation: bool,
        checkpoint: String,
    }
    let summary = Summary {
        steps: run.history.len(),
        final_loss: run.history.last().map(|r| r.loss),
        aborted: &run.aborted,
        ablation,
        checkpoint: out_dir.join("ckpt_final.json").display().to_string(),
    };
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    if let Some(reason) = &run.aborted {
        return Err(CliError::numeric(reason.clone()));
    }
    Ok(())
}

pub fn cmd_sample(
    checkpoint_path: &Path,
    n: usize,
    seed: u64,
    steps: Option<usize>,
    benchmark: Option<&str>,
    out: &Path,
) -> CliResult<()> {
    let ckpt = load_checkpoint(checkpoint_path)?;
    if let Some(claimed) = benchmark {
        if claimed != ckpt.benchmark_id {
            eprintln!(
                "warning: checkpoint was trained on '{}' but '{claimed}' was requested; \
                 proceeding (dimensions are compatible)",
                ckpt.benchmark_id
            );
        }
    }
    let energy = BenchmarkConfig::from_id(&ckpt.benchmark_id)
        .build()?
        .with_scale(ckpt.scale);
    let sched = ckpt.schedule;
    let cfg = IntegratorConfig {
        n_steps: steps.unwrap_or(1000),
        score_source: ScoreSource::Network(ckpt),
        seed,
        t_floor: 1e-3,
    };
    let run = sample_reverse(&energy, &sched, &cfg, n)?;
    write_sample_csv(out, &run.set)?;
    let sidecar = SampleSidecar {
        benchmark: &run.set.benchmark,
        source: &run.set.source,
        seed,
        n_requested: n,
        n_emitted: run.set.len(),
        failure_count: run.failed_trajectories,
        config: serde_json::json!({
            "checkpoint": checkpoint_path.display().to_string(),
            "n_steps": cfg.n_steps,
            "t_floor": cfg.t_floor,
        }),
    };
    write_json(&sidecar_path(out), &sidecar)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_dwes(
    benchmark: &str,
    gmm_seed: u64,
    l: usize,
    n: usize,
    steps: usize,
    seed: u64,
    sigma_min: Option<f64>,
    sigma_max: Option<f64>,
    out: &Path,
) -> CliResult<()> {
    let energy = BenchmarkConfig { gmm_seed, ..BenchmarkConfig::from_id(benchmark) }.build()?;
    let defaults = defaults_for(benchmark);
    let sched = VeSchedule::new(
        sigma_min.unwrap_or(defaults.sigma_min),
        sigma_max.unwrap_or(defaults.sigma_max),
    )?;
    let cfg = IntegratorConfig {
        n_steps: steps,
        score_source: ScoreSource::EstimatedScore { l },
        seed,
        t_floor: 1e-3,
    };
    let run = sample_reverse(&energy, &sched, &cfg, n)?;
    write_sample_csv(out, &run.set)?;
    let sidecar = SampleSidecar {
        benchmark: &run.set.benchmark,
        source: &run.set.source,
        seed,
        n_requested: n,
        n_emitted: run.set.len(),
        failure_count: run.failed_trajectories,
        config: serde_json::json!({
            "l": l,
            "n_steps": steps,
            "t_floor": cfg.t_floor,
            "sigma_min": sched.sigma_min,
            "sigma_max": sched.sigma_max,
            "gmm_seed": gmm_seed,
        }),
    };
    write_json(&sidecar_path(out), &sidecar)
}

pub fn cmd_make_reference(benchmark: &str, gmm_seed: u64, n: usize, seed: u64, out: &Path) -> CliResult<()> {
    let energy = BenchmarkConfig { gmm_seed, ..BenchmarkConfig::from_id(benchmark) }.build()?;
    let mut rng = Rng::new(seed).substream("reference", 0);
    let mut set = energy.reference_sample(n, &mut rng)?;
    set.seed = seed;
    write_sample_csv(out, &set)?;
    let sidecar = SampleSidecar {
        benchmark: &set.benchmark,
        source: &set.source,
        seed,
        n_requested: n,
        n_emitted: set.len(),
        failure_count: 0,
        config: serde_json::json!({ "gmm_seed": gmm_seed }),
    };
    write_json(&sidecar_path(out), &sidecar)
}

/// Seeded uniform subsample (without replacement), preserving row order.
fn subsample(set: &SampleSet, n: usize) -> SampleSet {
    if set.len() <= n {
        return set.clone();
    }
    let mut rng = Rng::new(0).substream("eval-subsample", set.len() as u64);
    let mut pool: Vec<usize> = (0..set.len()).collect();
    for k in 0..n {
        let pick = k + rng.index(set.len() - k);
        pool.swap(k, pick);
    }
    pool.truncate(n);
    pool.sort_unstable();
    let mut out = SampleSet::new(set.dim, set.seed, set.source.clone(), set.benchmark.clone());
    for &i in &pool {
        out.push_row(set.row(i));
    }
    out
}

pub fn cmd_eval(
    samples_path: &Path,
    reference_path: &Path,
    benchmark: &str,
    gmm_seed: u64,
    subsample_to: Option<usize>,
    out: Option<&Path>,
) -> CliResult<()> {
    let energy = BenchmarkConfig { gmm_seed, ..BenchmarkConfig::from_id(benchmark) }.build()?;
    let mut gen = read_sample_csv(samples_path)?;
    let mut reference = read_sample_csv(reference_path)?;
    let dim = energy.dim();
    for (name, set) in [("samples", &gen), ("reference", &reference)] {
        if set.dim != dim {
            return Err(CliError::config(format!(
                "{name} dimension {} does not match benchmark '{benchmark}' ({dim})",
                set.dim
            )));
        }
    }
    if let Some(cap) = subsample_to {
        gen = subsample(&gen, cap);
        reference = subsample(&reference, cap);
    }
    let particle_shape = particle_shape_for(benchmark);
    let report: MetricsReport =
        full_report(&gen, &reference, &energy, benchmark.to_string(), particle_shape)?;
    let text = serde_json::to_string_pretty(&report).unwrap();
    println!("{text}");
    if let Some(path) = out {
        write_json(path, &report)?;
    }
    Ok(())
}

fn particle_shape_for(benchmark: &str) -> Option<(usize, usize)> {
    if benchmark == "dw4" {
        Some((4, 2))
    } else if let Some(n) = benchmark.strip_prefix("lj") {
        n.parse::<usize>().ok().map(|n| (n, 3))
    } else {
        None
    }
}

pub fn cmd_toy_kl(mu1: f64, mu2: f64, sigma: f64, out: &Path) -> CliResult<()> {
    let report = toy_kl_report(&ToyKlSpec::new(mu1, mu2, sigma)).map_err(CliError::from)?;
    write_json(out, &report)?;
    // companion CSV table
    let mut csv = String::from("run,init_mu,mu,sigma_sq,kl\n");
    csv.push_str(&format!(
        "forward,,{},{},{}\n",
        report.forward.mu, report.forward.sigma_sq, report.forward.kl
    ));
    csv.push_str(&format!(
        "forward_closed_form,,{},{},\n",
        report.forward_closed_mu, report.forward_closed_sigma_sq
    ));
    for (i, run) in report.reverse.iter().enumerate() {
        csv.push_str(&format!(
            "reverse_{i},{},{},{},{}\n",
            run.init_mu, run.endpoint.mu, run.endpoint.sigma_sq, run.endpoint.kl
        ));
    }
    std::fs::write(out.with_extension("csv"), csv)
        .map_err(|e| CliError::io(e.to_string()))?;
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}

pub fn cmd_diag(
    l_list: &[usize],
    s_list: &[usize],
    reps: usize,
    seed: u64,
    out: &Path,
) -> CliResult<()> {
    let mut spec = ScalingSpec::new(l_list.to_vec(), s_list.to_vec(), reps);
    spec.seed = seed;
    let report = estimator_scaling_report(&spec).map_err(CliError::from)?;
    write_json(out, &report)?;
    let mut csv = String::from("study,size,bias,spread\n");
    for row in &report.score_rows {
        csv.push_str(&format!("score_std,{},{},{}\n", row.l, row.bias, row.std));
    }
    for row in &report.loss_rows {
        csv.push_str(&format!("loss_mse,{},{},{}\n", row.s, row.bias, row.mse));
    }
    std::fs::write(out.with_extension("csv"), csv)
        .map_err(|e| CliError::io(e.to_string()))?;
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}
