use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use homolog_core::corpus::{save_corpus_file, synth_corpus, Arch, GeneratorSpec};

use crate::common::{load_config, write_json};

#[derive(Args)]
pub struct SynthArgs {
    /// Corpus output path (JSONL)
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth manifest output path (JSON); defaults next to the corpus
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Generator spec as TOML or JSON; flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    libraries: Option<usize>,
    #[arg(long)]
    functions_per_library: Option<usize>,
    /// Comma-separated list, e.g. "x86,x64,arm,ppc"
    #[arg(long, value_delimiter = ',')]
    archs: Option<Vec<Arch>>,
    #[arg(long)]
    label_substitution_rate: Option<f64>,
    #[arg(long)]
    subtree_edit_rate: Option<f64>,
    #[arg(long)]
    callee_edit_rate: Option<f64>,
    #[arg(long)]
    constant_retention: Option<f64>,
}

pub fn run(args: SynthArgs) -> Result<()> {
    let mut spec: GeneratorSpec = match &args.config {
        Some(path) => load_config(path)?,
        None => GeneratorSpec::default(),
    };
    if let Some(v) = args.libraries {
        spec.libraries = v;
    }
    if let Some(v) = args.functions_per_library {
        spec.functions_per_library = v;
    }
    if let Some(v) = args.archs {
        spec.archs = v;
    }
    if let Some(v) = args.label_substitution_rate {
        spec.label_substitution_rate = v;
    }
    if let Some(v) = args.subtree_edit_rate {
        spec.subtree_edit_rate = v;
    }
    if let Some(v) = args.callee_edit_rate {
        spec.callee_edit_rate = v;
    }
    if let Some(v) = args.constant_retention {
        spec.constant_retention = v;
    }

    let (corpus, manifest) = synth_corpus(&spec, args.seed)?;
    save_corpus_file(&corpus, &args.out)
        .with_context(|| format!("writing corpus {}", args.out.display()))?;
    let manifest_path = args
        .manifest
        .unwrap_or_else(|| args.out.with_extension("manifest.json"));
    write_json(&manifest, &manifest_path)?;

    println!(
        "generated {} binaries / {} functions / {} homology groups (seed {})",
        corpus.binaries().len(),
        corpus.function_count(),
        manifest.groups.len(),
        args.seed,
    );
    println!("corpus:   {}", args.out.display());
    println!("manifest: {}", manifest_path.display());
    Ok(())
}
