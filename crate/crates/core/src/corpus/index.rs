//! Flat index over a corpus: per-function genealogist, sorted string
//! constants, call-graph adjacency, and homology groups, addressable by a
//! dense `FuncId`. Built once, then shared immutably by the filter, the
//! evaluation runners, and search.

use std::collections::HashMap;

use super::{Arch, BinaryRecord, Corpus, FunctionRecord};

/// Dense handle for one function inside a `CorpusIndex`. Ordering follows
/// (binary_id, function id), which makes reports reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FuncId(pub usize);

struct Entry<'c> {
    binary_idx: usize,
    record: &'c FunctionRecord,
    gl: Vec<&'c str>,
    strings_sorted: Vec<&'c str>,
    callers: Vec<FuncId>,
    callees: Vec<FuncId>,
}

pub struct CorpusIndex<'c> {
    corpus: &'c Corpus,
    entries: Vec<Entry<'c>>,
    by_key: HashMap<(&'c str, &'c str), FuncId>,
    groups: HashMap<(&'c str, &'c str), Vec<FuncId>>,
    archs: Vec<Arch>,
}

impl<'c> CorpusIndex<'c> {
    pub fn build(corpus: &'c Corpus) -> Self {
        let mut entries = Vec::with_capacity(corpus.function_count());
        let mut by_key = HashMap::new();
        let mut groups: HashMap<(&str, &str), Vec<FuncId>> = HashMap::new();

        for (binary_idx, binary) in corpus.binaries().iter().enumerate() {
            for record in binary.functions.values() {
                let id = FuncId(entries.len());
                let mut gl: Vec<&str> = record
                    .callees
                    .iter()
                    .filter(|c| binary.dynamic_symbols.contains(&c.name))
                    .map(|c| c.name.as_str())
                    .collect();
                gl.sort_unstable();
                let mut strings_sorted: Vec<&str> =
                    record.string_constants.iter().map(String::as_str).collect();
                strings_sorted.sort_unstable();

                by_key.insert((binary.binary_id.as_str(), record.id.as_str()), id);
                if !record.name.is_empty() {
                    groups
                        .entry((binary.library.as_str(), record.name.as_str()))
                        .or_default()
                        .push(id);
                }
                entries.push(Entry {
                    binary_idx,
                    record,
                    gl,
                    strings_sorted,
                    callers: Vec::new(),
                    callees: Vec::new(),
                });
            }
        }

        for binary in corpus.binaries() {
            for (caller, callee) in &binary.call_graph {
                let caller_id = by_key.get(&(binary.binary_id.as_str(), caller.as_str()));
                let callee_id = by_key.get(&(binary.binary_id.as_str(), callee.as_str()));
                if let (Some(&cr), Some(&ce)) = (caller_id, callee_id) {
                    entries[cr.0].callees.push(ce);
                    entries[ce.0].callers.push(cr);
                }
            }
        }
        for entry in &mut entries {
            entry.callers.sort_unstable();
            entry.callers.dedup();
            entry.callees.sort_unstable();
            entry.callees.dedup();
        }

        CorpusIndex {
            corpus,
            entries,
            by_key,
            groups,
            archs: corpus.archs(),
        }
    }

    pub fn corpus(&self) -> &'c Corpus {
        self.corpus
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = FuncId> {
        (0..self.entries.len()).map(FuncId)
    }

    pub fn record(&self, id: FuncId) -> &'c FunctionRecord {
        self.entries[id.0].record
    }

    pub fn binary_of(&self, id: FuncId) -> &'c BinaryRecord {
        &self.corpus.binaries()[self.entries[id.0].binary_idx]
    }

    pub fn arch(&self, id: FuncId) -> Arch {
        self.record(id).arch
    }

    /// Distinct architectures in the corpus, sorted.
    pub fn archs(&self) -> &[Arch] {
        &self.archs
    }

    /// Genealogist: dynamic callee names, multiplicity kept, sorted.
    pub fn gl(&self, id: FuncId) -> &[&'c str] {
        &self.entries[id.0].gl
    }

    pub fn strings_sorted(&self, id: FuncId) -> &[&'c str] {
        &self.entries[id.0].strings_sorted
    }

    pub fn callee_count(&self, id: FuncId) -> usize {
        self.record(id).callees.len()
    }

    /// Functions of the same binary that call `id` (call-graph edges).
    pub fn callers(&self, id: FuncId) -> &[FuncId] {
        &self.entries[id.0].callers
    }

    /// Call-graph callees of `id` that resolve to functions in the corpus.
    pub fn internal_callees(&self, id: FuncId) -> &[FuncId] {
        &self.entries[id.0].callees
    }

    pub fn lookup(&self, binary_id: &str, func_id: &str) -> Option<FuncId> {
        self.by_key.get(&(binary_id, func_id)).copied()
    }

    /// (library, function name) identity; `None` for stripped names.
    pub fn homology_key(&self, id: FuncId) -> Option<(&'c str, &'c str)> {
        let record = self.record(id);
        if record.name.is_empty() {
            None
        } else {
            Some((self.binary_of(id).library.as_str(), record.name.as_str()))
        }
    }

    /// Members of `id`'s homology group other than `id` itself.
    pub fn homologs(&self, id: FuncId) -> Vec<FuncId> {
        match self.homology_key(id) {
            None => Vec::new(),
            Some(key) => self
                .groups
                .get(&key)
                .map(|members| members.iter().copied().filter(|&m| m != id).collect())
                .unwrap_or_default(),
        }
    }

    /// Homology groups sorted by key; each member list is FuncId-sorted.
    pub fn homology_groups(&self) -> Vec<((&'c str, &'c str), &[FuncId])> {
        let mut groups: Vec<_> = self
            .groups
            .iter()
            .map(|(key, members)| (*key, members.as_slice()))
            .collect();
        groups.sort_by_key(|(key, _)| *key);
        groups
    }

    /// Stable human-readable handle, `binary_id:function_id`.
    pub fn display_key(&self, id: FuncId) -> String {
        format!("{}:{}", self.binary_of(id).binary_id, self.record(id).id)
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use std::collections::{BTreeMap, BTreeSet};

    use super::super::{
        Arch, AstNode, BinaryRecord, CalleeRef, Corpus, FunctionRecord, InstrStats, NodeLabel,
    };

    pub struct FnSpec {
        pub id: &'static str,
        pub name: &'static str,
        pub callees: Vec<(&'static str, bool)>,
        pub strings: Vec<&'static str>,
    }

    pub fn leaf_ast() -> AstNode {
        AstNode::new(
            NodeLabel::new(6).unwrap(),
            vec![AstNode::leaf(NodeLabel::new(37).unwrap())],
        )
    }

    /// Builds one binary whose call graph mirrors the callee lists.
    pub fn binary(binary_id: &str, library: &str, arch: Arch, fns: Vec<FnSpec>) -> BinaryRecord {
        let mut functions = BTreeMap::new();
        let mut call_graph = BTreeSet::new();
        let mut dynamic_symbols = BTreeSet::new();
        for spec in &fns {
            for (callee, dynamic) in &spec.callees {
                call_graph.insert((spec.id.to_string(), callee.to_string()));
                if *dynamic {
                    dynamic_symbols.insert(callee.to_string());
                }
            }
        }
        for spec in fns {
            functions.insert(
                spec.id.to_string(),
                FunctionRecord {
                    binary_id: binary_id.into(),
                    id: spec.id.into(),
                    name: spec.name.into(),
                    arch,
                    ast: leaf_ast(),
                    callees: spec
                        .callees
                        .iter()
                        .map(|(name, dynamic)| CalleeRef {
                            name: name.to_string(),
                            dynamic: *dynamic,
                        })
                        .collect(),
                    string_constants: spec.strings.iter().map(|s| s.to_string()).collect(),
                    numeric_constants: vec![],
                    instr_stats: InstrStats::default(),
                },
            );
        }
        BinaryRecord {
            binary_id: binary_id.into(),
            library: library.into(),
            arch,
            functions,
            call_graph,
            dynamic_symbols,
        }
    }

    pub fn corpus(binaries: Vec<BinaryRecord>) -> Corpus {
        Corpus::from_binaries(binaries).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::{binary, corpus, FnSpec};
    use super::*;

    #[test]
    fn adjacency_and_gl() {
        let c = corpus(vec![binary(
            "libx-x86",
            "libx",
            Arch::X86,
            vec![
                FnSpec {
                    id: "parent",
                    name: "parent",
                    callees: vec![("child", false), ("memcpy", true)],
                    strings: vec![],
                },
                FnSpec {
                    id: "child",
                    name: "child",
                    callees: vec![],
                    strings: vec![],
                },
            ],
        )]);
        let index = CorpusIndex::build(&c);
        assert_eq!(index.len(), 2);

        let parent = index.lookup("libx-x86", "parent").unwrap();
        let child = index.lookup("libx-x86", "child").unwrap();
        assert_eq!(index.internal_callees(parent), &[child]);
        assert_eq!(index.callers(child), &[parent]);
        assert_eq!(index.gl(parent), &["memcpy"]);
        assert!(index.gl(child).is_empty());
        assert_eq!(index.callee_count(parent), 2);
    }

    #[test]
    fn homologs_cross_binaries_with_same_library() {
        let make = |bid: &'static str, arch| {
            binary(
                bid,
                "libx",
                arch,
                vec![FnSpec {
                    id: "f",
                    name: "f",
                    callees: vec![],
                    strings: vec![],
                }],
            )
        };
        let c = corpus(vec![make("libx-arm", Arch::Arm), make("libx-x86", Arch::X86)]);
        let index = CorpusIndex::build(&c);
        let a = index.lookup("libx-arm", "f").unwrap();
        let b = index.lookup("libx-x86", "f").unwrap();
        assert_eq!(index.homologs(a), vec![b]);
        assert_eq!(index.homologs(b), vec![a]);
        assert_eq!(index.archs(), &[Arch::X86, Arch::Arm]);
    }

    #[test]
    fn same_name_different_library_is_not_homologous() {
        let c = corpus(vec![
            binary(
                "liba-x86",
                "liba",
                Arch::X86,
                vec![FnSpec { id: "f", name: "f", callees: vec![], strings: vec![] }],
            ),
            binary(
                "libb-x86",
                "libb",
                Arch::X86,
                vec![FnSpec { id: "f", name: "f", callees: vec![], strings: vec![] }],
            ),
        ]);
        let index = CorpusIndex::build(&c);
        let a = index.lookup("liba-x86", "f").unwrap();
        assert!(index.homologs(a).is_empty());
    }
}
