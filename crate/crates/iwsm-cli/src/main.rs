//! `iwsm`: train, sample, and evaluate diffusion samplers for unnormalized
//! densities.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 I/O
//! error. Failures print a one-line JSON document to stderr.

mod commands;
mod config;
mod errors;
mod io;
mod sink;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use errors::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "iwsm", version, about = "Diffusion samplers for unnormalized densities")]
struct Cli {
    /// Worker thread cap (falls back to the IWSM_THREADS environment variable).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a score network from a JSON run configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for logs and checkpoints.
        #[arg(long)]
        out: PathBuf,
        /// Force the importance weights uniform (the W/O IW baseline).
        #[arg(long)]
        ablation: bool,
    },
    /// Sample from a trained checkpoint (network-driven reverse SDE).
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Reverse integration steps (default 1000).
        #[arg(long)]
        steps: Option<usize>,
        /// Cross-check against this benchmark id; mismatches warn.
        #[arg(long)]
        benchmark: Option<String>,
        /// Output CSV path (a .meta.json sidecar is written next to it).
        #[arg(long)]
        out: PathBuf,
    },
    /// Training-free sampling driven directly by the Monte Carlo score target.
    Dwes {
        #[arg(long)]
        benchmark: String,
        /// Seed fixing GMM component means.
        #[arg(long, default_value_t = 0)]
        gmm_seed: u64,
        /// Inner Monte Carlo samples per score evaluation.
        #[arg(long = "L")]
        l: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        sigma_min: Option<f64>,
        #[arg(long)]
        sigma_max: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact reference samples for the exactly sampleable benchmarks.
    MakeReference {
        #[arg(long)]
        benchmark: String,
        #[arg(long, default_value_t = 0)]
        gmm_seed: u64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a sample CSV against a reference CSV.
    Eval {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        benchmark: String,
        #[arg(long, default_value_t = 0)]
        gmm_seed: u64,
        /// Subsample both sets to at most this many rows before evaluating.
        #[arg(long)]
        subsample: Option<usize>,
        /// Optional JSON report path (the report always prints to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Forward/reverse KL study on a two-mode 1D mixture.
    ToyKl {
        #[arg(long)]
        mu1: f64,
        #[arg(long)]
        mu2: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Empirical bias/variance scaling of the Monte Carlo estimators.
    Diag {
        /// Comma-separated inner sample counts, e.g. 100,400,1600.
        #[arg(long = "L-list", value_delimiter = ',')]
        l_list: Vec<usize>,
        /// Comma-separated batch sizes, e.g. 8,32,128.
        #[arg(long = "S-list", value_delimiter = ',')]
        s_list: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn init_threads(cli_threads: Option<usize>) -> CliResult<()> {
    let n = match cli_threads {
        Some(n) => Some(n),
        None => match std::env::var("IWSM_THREADS") {
            Ok(text) => Some(
                text.parse::<usize>()
                    .map_err(|_| CliError::config("IWSM_THREADS must be a positive integer"))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::config("thread count must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads(cli.threads)?;
    match cli.command {
        Command::Train { config, out, ablation } => commands::cmd_train(&config, &out, ablation),
        Command::Sample { checkpoint, n, seed, steps, benchmark, out } => {
            commands::cmd_sample(&checkpoint, n, seed, steps, benchmark.as_deref(), &out)
        }
        Command::Dwes { benchmark, gmm_seed, l, n, steps, seed, sigma_min, sigma_max, out } => {
            commands::cmd_dwes(&benchmark, gmm_seed, l, n, steps, seed, sigma_min, sigma_max, &out)
        }
        Command::MakeReference { benchmark, gmm_seed, n, seed, out } => {
            commands::cmd_make_reference(&benchmark, gmm_seed, n, seed, &out)
        }
        Command::Eval { samples, reference, benchmark, gmm_seed, subsample, out } => {
            commands::cmd_eval(&samples, &reference, &benchmark, gmm_seed, subsample, out.as_deref())
        }
        Command::ToyKl { mu1, mu2, sigma, out } => commands::cmd_toy_kl(mu1, mu2, sigma, &out),
        Command::Diag { l_list, s_list, reps, seed, out } => {
            commands::cmd_diag(&l_list, &s_list, reps, seed, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_stderr_json());
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
