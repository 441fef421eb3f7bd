use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use homolog_core::corpus::{load_corpus_file, CorpusIndex};
use homolog_core::prefilter::{default_feature_specs, feature_bench, FeatureBenchConfig};

use crate::common::{report_path, write_json};

#[derive(Args)]
pub struct BenchFeaturesArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Source functions sampled (each must have a homolog on every arch)
    #[arg(long, default_value_t = 10)]
    n_sources: usize,
    /// Pool size per source and architecture, homolog included
    #[arg(long, default_value_t = 20)]
    pool_size: usize,
    /// Number of evenly spaced thresholds swept over [0, 1]
    #[arg(long, default_value_t = 50)]
    threshold_steps: usize,
    /// Report output (JSON); defaults to feature_bench.json in the report dir
    #[arg(long)]
    report: Option<PathBuf>,
    /// Sweep rows as CSV; defaults next to the report
    #[arg(long)]
    csv: Option<PathBuf>,
}

pub fn run(args: BenchFeaturesArgs) -> Result<()> {
    let corpus = load_corpus_file(&args.corpus)
        .with_context(|| format!("loading {}", args.corpus.display()))?;
    let index = CorpusIndex::build(&corpus);

    let config = FeatureBenchConfig {
        n_sources: args.n_sources,
        pool_size: args.pool_size,
        thresholds: (0..=args.threshold_steps.max(1))
            .map(|i| i as f64 / args.threshold_steps.max(1) as f64)
            .collect(),
        seed: args.seed,
    };
    let specs = default_feature_specs();
    let report = feature_bench(&index, &specs, &config)?;

    let report_file = report_path(args.report, "feature_bench.json");
    write_json(&report, &report_file)?;
    let csv_file = args.csv.unwrap_or_else(|| report_file.with_extension("csv"));
    if let Some(parent) = csv_file.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut csv = BufWriter::new(
        File::create(&csv_file)
            .with_context(|| format!("creating {}", csv_file.display()))?,
    );
    writeln!(csv, "feature,threshold,tpr,fpr,f_score,mean_ns")?;
    for row in &report.rows {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            row.feature, row.threshold, row.tpr, row.fpr, row.f_score, row.mean_ns,
        )?;
    }
    csv.flush()?;

    println!(
        "{} sources x pool {} -> {} homologous / {} non-homologous comparisons",
        report.n_sources, report.pool_size, report.positive_pairs, report.negative_pairs,
    );
    println!("{:<24} {:>6} {:>8} {:>8} {:>10}", "feature", "best_t", "best_F", "AUC", "mean_ns");
    for s in &report.summary {
        println!(
            "{:<24} {:>6.2} {:>8.4} {:>8.4} {:>10.0}",
            s.feature, s.best_threshold, s.best_f_score, s.auc, s.mean_ns,
        );
    }
    println!("report {}", report_file.display());
    println!("csv    {}", csv_file.display());
    Ok(())
}
