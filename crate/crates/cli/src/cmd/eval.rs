use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use homolog_core::corpus::{build_g_dataset, build_v_dataset, load_corpus_file, CorpusIndex};
use homolog_core::eval::{run_task_c, run_task_v, RocPoint, TaskVConfig};
use homolog_core::prefilter::FilterThresholds;
use homolog_core::siamese::load_model;

use crate::common::{file_sha256, parse_ks, report_path, timings_path, write_json};

#[derive(Args)]
pub struct EvalCArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Model checkpoint (JSON)
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report output (JSON); defaults to eval_c.json in the report dir
    #[arg(long)]
    report: Option<PathBuf>,
    /// ROC curve output (CSV); defaults next to the report
    #[arg(long)]
    roc_csv: Option<PathBuf>,
}

fn write_roc_csv(points: &[RocPoint], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut out = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    writeln!(out, "threshold,tpr,fpr")?;
    for p in points {
        // f64 Display renders the sentinels as "inf"/"-inf"
        writeln!(out, "{},{},{}", p.threshold, p.tpr, p.fpr)?;
    }
    out.flush()?;
    Ok(())
}

pub fn run_c(args: EvalCArgs) -> Result<()> {
    let corpus = load_corpus_file(&args.corpus)
        .with_context(|| format!("loading {}", args.corpus.display()))?;
    let index = CorpusIndex::build(&corpus);
    let tuples = build_g_dataset(&index, args.seed)?;
    let model = load_model(&args.model)
        .with_context(|| format!("loading checkpoint {}", args.model.display()))?;

    let report = run_task_c(&model, &tuples, &index)?;
    let report_file = report_path(args.report, "eval_c.json");
    write_json(&report, &report_file)?;
    let roc_file = args.roc_csv.unwrap_or_else(|| report_file.with_extension("roc.csv"));
    write_roc_csv(&report.roc.points, &roc_file)?;

    println!("checkpoint sha256 {}", file_sha256(&args.model)?);
    println!(
        "classification AUC {:.4} over {} tuples",
        report.overall_auc, report.n_tuples,
    );
    for (pair, auc) in &report.per_pair {
        println!("  {pair}: {auc:.4}");
    }
    println!("report {}", report_file.display());
    println!("roc    {}", roc_file.display());
    Ok(())
}

#[derive(Args)]
pub struct EvalVArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Model checkpoint (JSON)
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Non-homologous candidates per query pool
    #[arg(long, default_value_t = 50)]
    pool_size: usize,
    /// Skip the call-graph prefilter
    #[arg(long)]
    no_filter: bool,
    /// Skip callee-structure re-ranking
    #[arg(long)]
    no_rerank: bool,
    #[arg(long, default_value_t = 0.1)]
    t_gl: f64,
    #[arg(long, default_value_t = 0.8)]
    t_callee: f64,
    #[arg(long, default_value_t = 0.8)]
    t_string: f64,
    #[arg(long, default_value_t = 2)]
    max_caller_depth: usize,
    /// Model-similarity weight in the re-ranked score
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Structural-match weight in the re-ranked score
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    /// Candidates handed to the re-ranker
    #[arg(long, default_value_t = 20)]
    top_k: usize,
    /// Comma-separated recall cutoffs
    #[arg(long, default_value = "1,5,10,20")]
    ks: String,
    /// Report output (JSON); defaults to eval_v.json in the report dir.
    /// Stage timing medians go to a _timings.json sidecar.
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn run_v(args: EvalVArgs) -> Result<()> {
    let corpus = load_corpus_file(&args.corpus)
        .with_context(|| format!("loading {}", args.corpus.display()))?;
    let index = CorpusIndex::build(&corpus);
    let tuples = build_v_dataset(&index, args.pool_size, args.seed)?;
    let model = load_model(&args.model)
        .with_context(|| format!("loading checkpoint {}", args.model.display()))?;

    let config = TaskVConfig {
        use_filter: !args.no_filter,
        use_rerank: !args.no_rerank,
        thresholds: FilterThresholds {
            t_gl: args.t_gl,
            t_callee: args.t_callee,
            t_string: args.t_string,
            max_caller_depth: args.max_caller_depth,
        },
        alpha: args.alpha,
        beta: args.beta,
        top_k: args.top_k,
        ks: parse_ks(&args.ks)?,
    };
    let report = run_task_v(&config, &tuples, &model, &index)?;

    let report_file = report_path(args.report, "eval_v.json");
    write_json(&report.without_timing(), &report_file)?;
    let sidecar = timings_path(&report_file);
    write_json(&report.timing, &sidecar)?;

    println!("checkpoint sha256 {}", file_sha256(&args.model)?);
    println!(
        "retrieval over {} queries (pool {}, filter {}, rerank {})",
        report.n_queries,
        args.pool_size,
        if config.use_filter { "on" } else { "off" },
        if config.use_rerank { "on" } else { "off" },
    );
    println!("MRR {:.4}", report.mrr);
    for (k, r) in &report.recall_at {
        println!("  recall@{k}: {r:.4}");
    }
    println!(
        "homologs past filter {}/{}; encoder invocations {} (+{} while re-ranking)",
        report.homolog_retained,
        report.n_queries,
        report.encoder_invocations,
        report.rerank_encoder_invocations,
    );
    println!("report  {}", report_file.display());
    println!("timings {}", sidecar.display());
    Ok(())
}
