use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use homolog_core::corpus::{load_corpus_file, save_corpus_file, Corpus, CorpusIndex};

#[derive(Args)]
pub struct IngestArgs {
    /// Corpus files (JSONL); several files merge into one corpus
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    /// Rewrite the merged, validated corpus here (normalized ordering)
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: IngestArgs) -> Result<()> {
    let mut binaries = Vec::new();
    for path in &args.input {
        let corpus =
            load_corpus_file(path).with_context(|| format!("loading {}", path.display()))?;
        binaries.extend(corpus.binaries().iter().cloned());
    }
    let corpus = Corpus::from_binaries(binaries).context("merging input corpora")?;
    let index = CorpusIndex::build(&corpus);

    let named = index
        .ids()
        .filter(|&id| index.record(id).is_named())
        .count();
    let mut per_arch: BTreeMap<String, usize> = BTreeMap::new();
    for (b, _) in corpus.functions() {
        *per_arch.entry(b.arch.to_string()).or_default() += 1;
    }
    let groups = index.homology_groups();
    let linked = groups.iter().filter(|(_, m)| m.len() >= 2).count();

    println!(
        "{} binaries, {} functions ({} named, {} stripped)",
        corpus.binaries().len(),
        index.len(),
        named,
        index.len() - named,
    );
    for (arch, n) in &per_arch {
        println!("  {arch}: {n} functions");
    }
    println!(
        "{} homology groups, {} with cross-binary members",
        groups.len(),
        linked,
    );

    if let Some(out) = &args.out {
        save_corpus_file(&corpus, out)
            .with_context(|| format!("writing {}", out.display()))?;
        println!("normalized corpus written to {}", out.display());
    }
    Ok(())
}
