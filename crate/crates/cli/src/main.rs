use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use taxo_induct::data::{DataError, SplitName};
use taxo_induct::env::{Mode, Restriction};
use taxo_induct::taxo::TaxoError;
use thiserror::Error;

mod commands;
mod config;

/// Taxonomy induction with a reinforcement-learned attachment policy.
#[derive(Debug, Parser)]
#[command(name = "taxo-induct", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a policy and write the best checkpoint plus a metric log.
    Train(TrainArgs),
    /// Greedily build a taxonomy over a vocabulary file.
    Induct(InductArgs),
    /// Score a checkpoint, or a directory of predicted trees, on a split.
    Eval(EvalArgs),
    /// Pairwise scores followed by a maximum spanning arborescence.
    BaselineMst(BaselineArgs),
    /// Write a synthetic dataset directory.
    GenSynthetic(GenArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub restriction: Option<Restriction>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InductArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// One term per line; blank lines and `#` comments are skipped.
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub restriction: Option<Restriction>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// NR mode: try every initial root, keep the most likely tree.
    #[arg(long)]
    pub sweep_roots: bool,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub paths: Option<PathBuf>,
    #[arg(long)]
    pub candidates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, conflicts_with = "predicted", required_unless_present = "predicted")]
    pub checkpoint: Option<PathBuf>,
    /// Directory of predicted `<name>.tsv` trees to score instead of a checkpoint.
    #[arg(long)]
    pub predicted: Option<PathBuf>,
    /// Run config naming the dataset; defaults to the one recorded in the checkpoint.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: SplitName,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub restriction: Option<Restriction>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sweep_roots: bool,
}

#[derive(Debug, Args)]
#[group(skip)]
#[command(group = ArgGroup::new("source").required(true).multiple(false))]
pub struct BaselineArgs {
    /// `hyponym<TAB>hypernym<TAB>score` lines.
    #[arg(long, group = "source")]
    pub pair_scores: Option<PathBuf>,
    /// Candidate table; the frequency is the score.
    #[arg(long, group = "source")]
    pub candidates: Option<PathBuf>,
    /// Train the pairwise detector on this run config's training split.
    #[arg(long, group = "source")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub taxonomy_dir: Option<PathBuf>,
    #[arg(long)]
    pub split_file: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<SplitName>,
    /// Pairwise detector epochs (with --config).
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the induced trees here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 60)]
    pub count: usize,
    #[arg(long, default_value_t = 10)]
    pub min_terms: usize,
    #[arg(long, default_value_t = 15)]
    pub max_terms: usize,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("incompatible checkpoint: {0}")]
    Version(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Failed(_) => 1,
            CliError::Data(_) => 2,
            CliError::Version(_) => 3,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Argument(m) => CliError::Config(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<TaxoError> for CliError {
    fn from(e: TaxoError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<taxo_induct::Error> for CliError {
    fn from(e: taxo_induct::Error) -> Self {
        use taxo_induct::Error as E;
        match e {
            E::Data(d) => d.into(),
            E::Taxo(t) => t.into(),
            E::Version(m) => CliError::Version(m),
            E::Argument(m) => CliError::Config(m),
            other => CliError::Failed(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("TAXO_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Induct(a) => commands::induct(a),
        Command::Eval(a) => commands::eval(a),
        Command::BaselineMst(a) => commands::baseline_mst(a),
        Command::GenSynthetic(a) => commands::gen_synthetic(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("taxo-induct: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
