//! `gemd`: one-click UltimateWalk embeddings plus the evaluation, ablation
//! and benchmark drivers around them.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod manifest;

#[derive(Parser)]
#[command(
    name = "gemd",
    version,
    about = "Graph embeddings by warped low-rank factorization"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed a graph given as a `src dst [weight]` edge list.
    Embed(EmbedArgs),
    /// Score an embedding on node classification.
    Eval(EvalArgs),
    /// Evaluate embeddings along one ablation axis.
    Sweep(SweepArgs),
    /// Time the scalable pipeline on random graphs of growing size.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Closed,
    Scalable,
}

/// Flags shared by every command that builds an embedding.
#[derive(Args, Clone, Debug)]
pub struct WalkArgs {
    /// Treat edges as directed.
    #[arg(long)]
    directed: bool,
    /// Embedding dimension K.
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Walk length L, or `auto` for the estimated diameter.
    #[arg(long, default_value = "7")]
    walk_length: String,
    /// Walks per node m.
    #[arg(long, default_value_t = 50)]
    trials: usize,
    /// Data splits T averaged by the scalable estimator.
    #[arg(long, default_value_t = 1)]
    splits: usize,
    /// Return factor of second-order walks.
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// In-out factor of second-order walks.
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Inverse Box-Cox gamma, or `auto` to symmetrize the proximity entries.
    #[arg(long, default_value = "0")]
    gamma: String,
    /// Replacement -c for the log of unobserved entries.
    #[arg(long, default_value_t = 100.0)]
    clip_c: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::Scalable)]
    mode: Mode,
}

#[derive(Args, Debug)]
pub struct EmbedArgs {
    #[arg(long, required_unless_present = "from_manifest")]
    input: Option<PathBuf>,
    #[arg(long, required_unless_present = "from_manifest")]
    output: Option<PathBuf>,
    /// Manifest path (default: `<output>.manifest.json`).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Re-run the configuration recorded in a manifest and check that the
    /// outputs reproduce its digests. `--output` redirects the embedding.
    #[arg(long, conflicts_with = "input")]
    from_manifest: Option<PathBuf>,
    #[command(flatten)]
    walk: WalkArgs,
}

/// Flags of the classification protocol.
#[derive(Args, Clone, Debug)]
pub struct ProtocolArgs {
    /// Node labels: `node<TAB>label[,label...]` per line.
    #[arg(long)]
    labels: PathBuf,
    /// Fraction of labeled nodes used for training.
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    /// L2 strength of the logistic regressions.
    #[arg(long, default_value_t = 1.0)]
    reg: f64,
    /// Use raw instead of standardized features.
    #[arg(long)]
    no_standardize: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    embedding: PathBuf,
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Per-repeat scores as TSV.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    input: PathBuf,
    /// `walk_length`, `gamma` or `memory`.
    #[arg(long)]
    axis: String,
    /// Comma list of values; `a..b` for walk lengths; memory values are
    /// crossed into all (p, q) pairs.
    #[arg(long, allow_hyphen_values = true)]
    grid: String,
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[command(flatten)]
    walk: WalkArgs,
    /// TSV destination (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Edge counts, e.g. `1e4,2e4,4e4`.
    #[arg(long)]
    sizes: String,
    /// Edges per node of the generated graphs.
    #[arg(long, default_value_t = 5.0)]
    edges_per_node: f64,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 7)]
    walk_length: usize,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// TSV destination (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::Embed(a) => commands::embed(a),
        Command::Eval(a) => commands::eval(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
