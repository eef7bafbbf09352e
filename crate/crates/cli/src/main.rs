//! `hycosbm`: fit, cross-validate and evaluate community models on
//! attributed hypergraphs, and generate synthetic benchmarks.
//!
//! Exit status is 0 on success, 1 for invalid input or configuration, and
//! 2 when the numerics break down (all restarts diverged, or the generator
//! cannot accept hyperedges).

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "hycosbm", version, about = "Overlapping communities in hypergraphs with node attributes")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct GlobalOpts {
    /// Only report errors.
    #[arg(long, short, global = true, conflicts_with = "verbose")]
    pub quiet: bool,
    /// More logging; repeat for trace output.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Worker threads for restarts and grid cells. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Run single-threaded regardless of --threads.
    #[arg(long, global = true)]
    pub deterministic: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit memberships, affinities and attribute mixing for one (K, gamma).
    Fit(FitArgs),
    /// k-fold cross-validation of test AUC over a (K, gamma) grid.
    Cv(CvArgs),
    /// Score held-out hyperedges against fitted parameters.
    Auc(AucArgs),
    /// Generate synthetic attributed hypergraphs with planted communities.
    Generate(GenerateArgs),
    /// Remove hyperedges at random, optionally keeping the node set connected.
    ///
    /// Two nodes are adjacent when some hyperedge contains both; a removal
    /// that would split a connected component is skipped.
    DeleteEdges(DeleteArgs),
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct FitControls {
    /// Random restarts; the best final log-likelihood is kept.
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    /// Iteration cap per restart.
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Absolute log-likelihood change treated as converged.
    #[arg(long, default_value_t = 1e-2)]
    pub tol: f64,
    /// Iterations between convergence checks.
    #[arg(long, default_value_t = 10)]
    pub check_every: usize,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct FitArgs {
    /// Hyperedge file: one comma-separated node list per line, optional tab and weight.
    pub edges: PathBuf,
    /// Attribute CSV with a `node` column followed by one column per covariate.
    #[arg(long)]
    pub attributes: Option<PathBuf>,
    /// Number of communities.
    #[arg(long)]
    pub k: usize,
    /// Weight of the attribute likelihood, in [0, 1]; 0 uses structure only.
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub controls: FitControls,
    /// Output parameter document (JSON); the trace and manifest are written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct CvArgs {
    /// Hyperedge file, split into folds.
    pub edges: PathBuf,
    /// Attribute CSV; required when some gamma is positive.
    #[arg(long)]
    pub attributes: Option<PathBuf>,
    /// Community counts: comma-separated values or ranges, e.g. `2-6,8,10`.
    #[arg(long, default_value = "2-30")]
    pub k_range: String,
    /// Comma-separated gamma values.
    #[arg(long, default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,0.95,0.99,0.995,1")]
    pub gamma_grid: String,
    /// Number of folds; each holds out its hyperedges once.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub controls: FitControls,
    /// Output report CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Uniform,
    Soo,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct AucArgs {
    /// Held-out hyperedges.
    pub edges: PathBuf,
    /// Parameter document written by `fit`.
    #[arg(long)]
    pub params: PathBuf,
    /// Negatives: uniform random sets of the same size, or one node switched out.
    #[arg(long, value_enum, default_value_t = ModeArg::Uniform)]
    pub mode: ModeArg,
    /// Further hyperedge files that negatives must avoid (e.g. the training set).
    #[arg(long)]
    pub exclude: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output report (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct GenerateArgs {
    /// Generator configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for edges, attributes, ground truth and statistics.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Independent instances, seeded `seed, seed + 1, …`, one directory each.
    #[arg(long, default_value_t = 1)]
    pub instances: usize,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct DeleteArgs {
    pub edges: PathBuf,
    /// Fraction of hyperedges to keep, in (0, 1].
    #[arg(long)]
    pub keep_fraction: f64,
    #[arg(long)]
    pub keep_connected: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output hyperedge file.
    #[arg(long)]
    pub out: PathBuf,
}

fn init_logging(opts: &GlobalOpts) {
    let level = if opts.quiet {
        log::LevelFilter::Error
    } else {
        match opts.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            2 => log::LevelFilter::Debug,
            _ => log::LevelFilter::Trace,
        }
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
}

fn configure_threads(opts: &GlobalOpts) -> Result<bool, CliError> {
    if opts.threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    if opts.deterministic || opts.threads == 1 {
        return Ok(false);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(&cli.global);
    let result = configure_threads(&cli.global).and_then(|parallel| commands::run(&cli, parallel));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
