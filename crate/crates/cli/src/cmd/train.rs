use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use homolog_core::corpus::{build_pair_dataset, load_corpus_file, CorpusIndex, VOCAB_SIZE};
use homolog_core::siamese::{resolve_pairs, save_model, train, TrainConfig};
use serde::Deserialize;

use crate::common::{file_sha256, load_config, report_path};

/// File-level training config; every field has a default and can be
/// overridden by the matching flag.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainFileConfig {
    hidden_size: usize,
    embed_size: usize,
    epochs: usize,
    lr: f64,
    seed: u64,
}

impl Default for TrainFileConfig {
    fn default() -> Self {
        TrainFileConfig {
            hidden_size: 16,
            embed_size: 8,
            epochs: 60,
            lr: 0.05,
            seed: 0,
        }
    }
}

#[derive(Args)]
pub struct TrainArgs {
    /// Training corpus (JSONL)
    #[arg(long)]
    corpus: PathBuf,
    /// Checkpoint output path (JSON)
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch mean loss CSV; defaults to loss_trace.csv in the report dir
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Config file (TOML/JSON) with hidden_size/embed_size/epochs/lr/seed
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    hidden_size: Option<usize>,
    #[arg(long)]
    embed_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction of pairs used for training; the rest is held out
    #[arg(long, default_value_t = 0.8)]
    split_ratio: f64,
}

pub fn run(args: TrainArgs) -> Result<()> {
    let mut file_config: TrainFileConfig = match &args.config {
        Some(path) => load_config(path)?,
        None => TrainFileConfig::default(),
    };
    if let Some(v) = args.hidden_size {
        file_config.hidden_size = v;
    }
    if let Some(v) = args.embed_size {
        file_config.embed_size = v;
    }
    if let Some(v) = args.epochs {
        file_config.epochs = v;
    }
    if let Some(v) = args.lr {
        file_config.lr = v;
    }
    if let Some(v) = args.seed {
        file_config.seed = v;
    }

    let corpus = load_corpus_file(&args.corpus)
        .with_context(|| format!("loading {}", args.corpus.display()))?;
    let index = CorpusIndex::build(&corpus);
    let dataset = build_pair_dataset(&index, args.split_ratio, file_config.seed)?;
    let pairs = resolve_pairs(&index, &dataset.train);
    println!(
        "training on {} pairs ({} held out), hidden {} embed {} epochs {} lr {} seed {}",
        pairs.len(),
        dataset.test.len(),
        file_config.hidden_size,
        file_config.embed_size,
        file_config.epochs,
        file_config.lr,
        file_config.seed,
    );

    let train_config = TrainConfig {
        epochs: file_config.epochs,
        learning_rate: file_config.lr,
        seed: file_config.seed,
    };
    let started = std::time::Instant::now();
    let (model, trace) = train(
        &pairs,
        file_config.hidden_size,
        file_config.embed_size,
        VOCAB_SIZE,
        &train_config,
    )?;
    let elapsed = started.elapsed();

    save_model(&model, &args.out)
        .with_context(|| format!("writing checkpoint {}", args.out.display()))?;
    let trace_path = report_path(args.trace, "loss_trace.csv");
    if let Some(parent) = trace_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut csv = BufWriter::new(
        File::create(&trace_path)
            .with_context(|| format!("creating {}", trace_path.display()))?,
    );
    writeln!(csv, "epoch,mean_loss")?;
    for (epoch, loss) in trace.iter().enumerate() {
        writeln!(csv, "{},{}", epoch + 1, loss)?;
    }
    csv.flush()?;

    println!(
        "trained in {:.1}s; first-epoch loss {:.6}, final {:.6}",
        elapsed.as_secs_f64(),
        trace.first().copied().unwrap_or(f64::NAN),
        trace.last().copied().unwrap_or(f64::NAN),
    );
    println!(
        "checkpoint {} (sha256 {})",
        args.out.display(),
        file_sha256(&args.out)?,
    );
    println!("loss trace {}", trace_path.display());
    Ok(())
}
