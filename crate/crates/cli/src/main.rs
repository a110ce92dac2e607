//! `classtree`: solve, evaluate, generate, benchmark, reduce and serve.
//!
//! Exit status is 0 on success, 1 when the result is a domain failure (an
//! invalid tree) and 2 for usage or input errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use classtree::{EntropyRule, Method};
use classtree_service::{DEFAULT_PORT, ENV_DATA, ENV_PORT, ENV_UI};

#[derive(Debug, Parser)]
#[command(
    name = "classtree",
    version,
    about = "Minimum expected-cost classification trees"
)]
pub struct Cli {
    /// Master seed for generated problems.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Scoring rule of the entropy heuristic (also used inside hybrid).
    #[arg(long, global = true, default_value_t = EntropyRule::ReductionPerCost)]
    pub entropy_rule: EntropyRule,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a tree for a problem and print its expected cost.
    Solve(SolveArgs),
    /// Verify a tree against a problem and print its expected cost.
    Eval(EvalArgs),
    /// Write a stratified grid of random problems to a directory.
    Gen(GenArgs),
    /// Compare heuristics with the optimum over the entropy x cost-CV grid.
    Bench(BenchArgs),
    /// Reduce a set cover instance and decide it with the exact solver.
    ReduceSetcover(ReduceArgs),
    /// Run the consultation service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub method: Method,
    /// Where to write the tree as JSON.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub tree: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Classes per problem.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub rows: u64,
    /// Properties per problem.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub cols: u64,
    #[arg(long, default_value_t = 50)]
    pub per_cell: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    /// Methods to report; the exact optimum is always computed as reference.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "dp,entropy,signature,hybrid"
    )]
    pub methods: Vec<Method>,
    /// Worker threads (default: one per core).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Where to write the reduced problem as JSON.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = ENV_PORT, default_value_t = DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, env = ENV_DATA, default_value = "data")]
    pub data: PathBuf,
    /// Built UI bundle served at `/`.
    #[arg(long, env = ENV_UI)]
    pub ui: Option<PathBuf>,
}

/// Why a command stopped early.
#[derive(Debug)]
pub enum Failure {
    /// The inputs were fine but the result is negative.
    Domain(String),
    /// Unreadable, malformed or unsupported input.
    Input(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Input(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let (Failure::Domain(msg) | Failure::Input(msg)) = &failure;
            eprintln!("classtree: {msg}");
            ExitCode::from(failure.code())
        }
    }
}
