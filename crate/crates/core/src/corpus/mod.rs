//! Data model for exported binaries: functions with ASTs, callee lists and
//! constants, per-binary call graphs with dynamic-symbol tables, and the
//! corpus container the rest of the pipeline consumes.

mod ast;
mod dataset;
mod index;
mod jsonl;
mod synth;
mod vocab;

pub use ast::AstNode;
pub use dataset::{
    build_g_dataset, build_pair_dataset, build_v_dataset, FunctionPair, GDatasetTuple,
    PairDataset, VDatasetTuple,
};
pub use index::{CorpusIndex, FuncId};
pub use jsonl::{load_corpus, load_corpus_file, save_corpus, save_corpus_file, SCHEMA_VERSION};
pub use synth::{synth_corpus, CorpusManifest, GeneratorSpec, GroupMember, HomologyGroup};
pub use vocab::{NodeKind, NodeLabel, MAX_LABEL_ID, MIN_LABEL_ID, VOCAB_SIZE};

#[cfg(test)]
pub(crate) use index::testutil;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Instruction-set architectures the pipeline understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    X86,
    X64,
    Arm,
    Ppc,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::X86, Arch::X64, Arch::Arm, Arch::Ppc];

    pub fn as_str(self) -> &'static str {
        match self {
            Arch::X86 => "x86",
            Arch::X64 => "x64",
            Arch::Arm => "arm",
            Arch::Ppc => "ppc",
        }
    }
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x86" => Ok(Arch::X86),
            "x64" => Ok(Arch::X64),
            "arm" => Ok(Arch::Arm),
            "ppc" => Ok(Arch::Ppc),
            other => Err(Error::Param(format!("unknown architecture {other:?}"))),
        }
    }
}

/// One call-site target. `dynamic` records whether the name survives
/// stripping (dynamic-symbol-table membership); anonymous callees carry the
/// local identifier of the target function instead of a symbol name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalleeRef {
    pub name: String,
    pub dynamic: bool,
}

/// Per-function instruction counts from the exporter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrStats {
    pub instructions: u32,
    pub arithmetic: u32,
    pub call: u32,
    pub logical: u32,
    pub transfer: u32,
}

/// One decompiled function. `id` is the stable per-binary handle (equals
/// `name` for unstripped functions); `name` is empty when stripped.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionRecord {
    pub binary_id: String,
    pub id: String,
    pub name: String,
    pub arch: Arch,
    pub ast: AstNode,
    pub callees: Vec<CalleeRef>,
    pub string_constants: Vec<String>,
    pub numeric_constants: Vec<i64>,
    pub instr_stats: InstrStats,
}

impl FunctionRecord {
    pub fn is_named(&self) -> bool {
        !self.name.is_empty()
    }

    pub fn callee_count(&self) -> usize {
        self.callees.len()
    }
}

/// One exported binary: its functions keyed by id, the directed call graph
/// (caller id -> callee id or external name), and the dynamic symbol table.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryRecord {
    pub binary_id: String,
    pub library: String,
    pub arch: Arch,
    pub functions: BTreeMap<String, FunctionRecord>,
    pub call_graph: BTreeSet<(String, String)>,
    pub dynamic_symbols: BTreeSet<String>,
}

impl BinaryRecord {
    /// Homology identity of a function in this binary; `None` for stripped
    /// names, which never act as dataset sources.
    pub fn homology_key(&self, f: &FunctionRecord) -> Option<HomologyKey> {
        if f.name.is_empty() {
            None
        } else {
            Some(HomologyKey {
                library: self.library.clone(),
                name: f.name.clone(),
            })
        }
    }
}

/// (library, function name): two functions are homologous iff their keys are
/// equal — same source function built for different targets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HomologyKey {
    pub library: String,
    pub name: String,
}

/// Immutable collection of binaries, iterated in sorted order so every
/// downstream artifact is reproducible.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    binaries: Vec<BinaryRecord>,
}

impl Corpus {
    /// Builds a corpus, sorting binaries by id and rejecting duplicates.
    pub fn from_binaries(mut binaries: Vec<BinaryRecord>) -> Result<Self> {
        binaries.sort_by(|a, b| a.binary_id.cmp(&b.binary_id));
        for pair in binaries.windows(2) {
            if pair[0].binary_id == pair[1].binary_id {
                return Err(Error::Dataset(format!(
                    "duplicate binary_id {:?}",
                    pair[0].binary_id
                )));
            }
        }
        Ok(Corpus { binaries })
    }

    pub fn binaries(&self) -> &[BinaryRecord] {
        &self.binaries
    }

    pub fn binary(&self, binary_id: &str) -> Option<&BinaryRecord> {
        self.binaries
            .binary_search_by(|b| b.binary_id.as_str().cmp(binary_id))
            .ok()
            .map(|i| &self.binaries[i])
    }

    pub fn is_empty(&self) -> bool {
        self.binaries.is_empty()
    }

    pub fn function_count(&self) -> usize {
        self.binaries.iter().map(|b| b.functions.len()).sum()
    }

    /// All functions, sorted by (binary_id, function id).
    pub fn functions(&self) -> impl Iterator<Item = (&BinaryRecord, &FunctionRecord)> {
        self.binaries
            .iter()
            .flat_map(|b| b.functions.values().map(move |f| (b, f)))
    }

    /// Distinct architectures present, sorted.
    pub fn archs(&self) -> Vec<Arch> {
        let set: BTreeSet<Arch> = self.binaries.iter().map(|b| b.arch).collect();
        set.into_iter().collect()
    }
}

/// Callee names of `f` restricted to the binary's dynamic symbol table, with
/// multiplicity, sorted lexicographically. Empty output is meaningful: it
/// routes the relational filter to its callee-count and caller branches.
pub fn derive_genealogist(f: &FunctionRecord, b: &BinaryRecord) -> Vec<String> {
    let mut names: Vec<String> = f
        .callees
        .iter()
        .filter(|c| b.dynamic_symbols.contains(&c.name))
        .map(|c| c.name.clone())
        .collect();
    names.sort_unstable();
    names
}
