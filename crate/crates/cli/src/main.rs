//! `homolog` — similarity search over exported binary functions.
//!
//! Subcommands cover the whole workflow: generate or ingest a corpus, train
//! the encoder, evaluate classification and retrieval quality, benchmark
//! the cheap filter features, and run ranked searches with full
//! per-candidate provenance.

mod cmd;
mod common;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "homolog", version, about = "Cross-architecture binary function similarity search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-architecture corpus with known homology
    Synth(cmd::synth::SynthArgs),
    /// Validate corpus files and print summary statistics
    Ingest(cmd::ingest::IngestArgs),
    /// Train the pair-similarity model on a corpus
    Train(cmd::train::TrainArgs),
    /// Classification quality: score homolog/non-homolog tuples, report AUC
    EvalC(cmd::eval::EvalCArgs),
    /// Retrieval quality: rank pools per query, report MRR and recall@k
    EvalV(cmd::eval::EvalVArgs),
    /// Sweep retention thresholds over the cheap filter features
    BenchFeatures(cmd::bench::BenchFeaturesArgs),
    /// Rank corpus functions against query functions, with provenance
    Search(cmd::search::SearchArgs),
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Synth(args) => cmd::synth::run(args),
        Command::Ingest(args) => cmd::ingest::run(args),
        Command::Train(args) => cmd::train::run(args),
        Command::EvalC(args) => cmd::eval::run_c(args),
        Command::EvalV(args) => cmd::eval::run_v(args),
        Command::BenchFeatures(args) => cmd::bench::run(args),
        Command::Search(args) => cmd::search::run(args),
    }
}

/// Exit codes by failure class: 2 bad parameters, 3 unreadable or invalid
/// input data, 4 other pipeline errors, 1 anything else.
fn exit_code(err: &anyhow::Error) -> i32 {
    use homolog_core::Error;
    match err.downcast_ref::<Error>() {
        Some(Error::Param(_)) => 2,
        Some(Error::Io { .. } | Error::Schema { .. } | Error::Dataset(_)) => 3,
        Some(_) => 4,
        None => 1,
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}
