//! Command-line driver for the `addernet` library.
//!
//! Every subcommand resolves its settings (flags over an optional
//! `key=value` file over built-in defaults), writes CSV reports whose first
//! lines record those settings, and returns a short summary for the terminal.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::Outcome;
use config::List;

#[derive(Parser, Debug)]
#[command(name = "addernet", version, about = "Train and analyse adder neural networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a network on MNIST or a toy task; writes train.csv and a checkpoint
    Train(TrainArgs),
    /// Two-layer classifiers on 2-D toy tasks; writes toy.csv and boundary.pgm
    Toy(ToyArgs),
    /// Exact two-layer constructions and tent-kernel approximation sweeps
    Approx(ApproxArgs),
    /// Sign vs full-precision descent on a dyadic grid of scalar problems
    Props(PropsArgs),
    /// Finite-difference checks of every layer and loss
    Gradcheck(GradcheckArgs),
    /// Output variance of adder vs conv layers, and gradient norms at init
    Variance(VarianceArgs),
    /// Multiplication and addition counts per forward pass
    Opcount(OpcountArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// `key = value` settings file; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// output directory (created if missing)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// add wall-clock seconds to training CSVs (makes them run-dependent)
    #[arg(long)]
    pub wall_time: bool,
}

#[derive(Args, Debug, Clone, Default)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// mnist | ball | multiball | linear
    #[arg(long)]
    pub dataset: Option<String>,
    /// MNIST directory (defaults to $ADDERNET_MNIST_DIR, then data/mnist-subset)
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// lenet5bn | mlp(N) | adder-mlp(N) | path to a JSON network spec
    #[arg(long)]
    pub arch: Option<String>,
    /// adder-l1 | adder-lp-schedule | adder-l2 | conv
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// stop after this many steps
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr0: Option<f64>,
    /// cosine | poly | constant
    #[arg(long)]
    pub schedule: Option<String>,
    /// adaptive scaling coefficient, or `none`
    #[arg(long)]
    pub eta: Option<String>,
    /// epochs over which p decays from 2 to 1 (adder-lp-schedule)
    #[arg(long)]
    pub e_decay: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// full | sign
    #[arg(long)]
    pub grad_mode: Option<String>,
    /// keep only the first N training samples
    #[arg(long)]
    pub train_limit: Option<usize>,
    #[arg(long)]
    pub test_limit: Option<usize>,
    /// samples per split for toy datasets
    #[arg(long)]
    pub samples: Option<usize>,
    /// sweep these eta values (writes sweep.csv instead of train.csv)
    #[arg(long)]
    pub sweep_eta: Option<List<f64>>,
    /// sweep these p-decay lengths, in epochs
    #[arg(long)]
    pub sweep_decay: Option<List<f64>>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ToyArgs {
    #[command(flatten)]
    pub common: Common,
    /// ball | multiball | linear
    #[arg(long)]
    pub task: Option<String>,
    /// hidden units
    #[arg(long)]
    pub hidden: Option<usize>,
    /// adder | mlp
    #[arg(long)]
    pub net: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr0: Option<f64>,
    /// adaptive scaling coefficient for adder nets, or `none`
    #[arg(long)]
    pub eta: Option<String>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// boundary image side in pixels
    #[arg(long)]
    pub resolution: Option<usize>,
    /// write a metrics row every N epochs
    #[arg(long)]
    pub log_every: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ApproxArgs {
    #[command(flatten)]
    pub common: Common,
    /// comma-separated registry names (tent, gaussian, sine)
    #[arg(long)]
    pub targets: Option<List<String>>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// centre counts for the error sweep; empty for none
    #[arg(long)]
    pub ns: Option<List<usize>>,
    /// seeds per sweep point
    #[arg(long)]
    pub seeds: Option<usize>,
    /// bandwidth; defaults to a per-target value
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Monte Carlo points for each L1 error
    #[arg(long)]
    pub samples: Option<usize>,
    /// midpoint cells per axis for norm quadrature
    #[arg(long)]
    pub quadrature: Option<usize>,
    /// random instances per exact-construction check
    #[arg(long)]
    pub construction_instances: Option<usize>,
    #[arg(long)]
    pub construction_probes: Option<usize>,
    /// constructions averaged per expectation probe (0 skips the check)
    #[arg(long)]
    pub draws: Option<usize>,
    /// centres per construction in the expectation check
    #[arg(long)]
    pub expectation_n: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct PropsArgs {
    #[command(flatten)]
    pub common: Common,
    /// number of (x, f0, alpha) cases
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// target output, must be negative
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub coordinates: Option<usize>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct VarianceArgs {
    #[command(flatten)]
    pub common: Common,
    /// kernel size
    #[arg(long)]
    pub kernel: Option<usize>,
    #[arg(long)]
    pub c_in: Option<usize>,
    #[arg(long)]
    pub c_out: Option<usize>,
    #[arg(long)]
    pub var_x: Option<f64>,
    /// filter variances, one report row each
    #[arg(long)]
    pub var_f: Option<List<f64>>,
    /// samples per variance estimate
    #[arg(long)]
    pub batch: Option<usize>,
    /// seeds for the gradient-norm table (0 skips it)
    #[arg(long)]
    pub gradnorm_seeds: Option<usize>,
    #[arg(long)]
    pub gradnorm_batch: Option<usize>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct OpcountArgs {
    #[command(flatten)]
    pub common: Common,
    /// lenet5bn | mlp(N) | path to a JSON network spec
    #[arg(long)]
    pub arch: Option<String>,
}

pub fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    match &cli.command {
        Command::Train(a) => commands::train::run(a),
        Command::Toy(a) => commands::toy::run(a),
        Command::Approx(a) => commands::approx::run(a),
        Command::Props(a) => commands::props::run(a),
        Command::Gradcheck(a) => commands::gradcheck::run(a),
        Command::Variance(a) => commands::variance::run(a),
        Command::Opcount(a) => commands::opcount::run(a),
    }
}

/// `error: kind=<tag> message="<text>"`, the line printed on failure.
pub fn error_line(err: &anyhow::Error) -> String {
    let kind = if let Some(e) = err.downcast_ref::<addernet::Error>() {
        e.kind()
    } else if err.downcast_ref::<std::io::Error>().is_some() {
        "io"
    } else {
        "internal"
    };
    let msg = format!("{err:#}").replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
    format!("error: kind={kind} message=\"{msg}\"")
}
