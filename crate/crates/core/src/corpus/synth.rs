//! Seeded synthetic corpus generator. Each library gets a set of function
//! templates; each architecture gets a perturbed variant of every template
//! (same-kind label substitutions, bounded subtree edits, callee-list edits
//! simulating inlining and intrinsic replacement, constant dropout). Ground
//! truth is recorded in a manifest listing every (template, arch) member.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{NodeKind, NodeLabel};
use super::{Arch, AstNode, BinaryRecord, CalleeRef, Corpus, FunctionRecord, InstrStats};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub libraries: usize,
    pub functions_per_library: usize,
    pub archs: Vec<Arch>,
    pub ast_nodes_min: usize,
    pub ast_nodes_max: usize,
    /// Per node: chance of swapping the label for another of the same kind.
    pub label_substitution_rate: f64,
    /// Per node: chance of one child insertion or deletion.
    pub subtree_edit_rate: f64,
    /// Per callee entry: chance of delete / substitute / extra insert.
    pub callee_edit_rate: f64,
    /// Per string or numeric constant: chance of surviving into a variant.
    pub constant_retention: f64,
    /// Size of the external import name pool shared by all libraries.
    pub import_pool: usize,
    /// Fraction of templates with no callees at all.
    pub leaf_fraction: f64,
    /// Fraction of templates whose callees are all static-internal.
    pub static_only_fraction: f64,
    /// Fraction of templates exported into the dynamic symbol table.
    pub export_fraction: f64,
    /// Fraction of non-exported templates with stripped names.
    pub strip_fraction: f64,
    /// Fraction of templates carrying no string constants.
    pub no_strings_fraction: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            libraries: 10,
            functions_per_library: 8,
            archs: Arch::ALL.to_vec(),
            ast_nodes_min: 10,
            ast_nodes_max: 48,
            label_substitution_rate: 0.10,
            subtree_edit_rate: 0.05,
            callee_edit_rate: 0.15,
            constant_retention: 0.98,
            import_pool: 160,
            leaf_fraction: 0.12,
            static_only_fraction: 0.08,
            export_fraction: 0.5,
            strip_fraction: 0.05,
            no_strings_fraction: 0.25,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("label_substitution_rate", self.label_substitution_rate),
            ("subtree_edit_rate", self.subtree_edit_rate),
            ("callee_edit_rate", self.callee_edit_rate),
            ("constant_retention", self.constant_retention),
            ("leaf_fraction", self.leaf_fraction),
            ("static_only_fraction", self.static_only_fraction),
            ("export_fraction", self.export_fraction),
            ("strip_fraction", self.strip_fraction),
            ("no_strings_fraction", self.no_strings_fraction),
        ];
        for (name, value) in rates {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Param(format!("{name} must lie in [0,1], got {value}")));
            }
        }
        if self.libraries == 0 || self.functions_per_library == 0 {
            return Err(Error::Param("libraries and functions_per_library must be >= 1".into()));
        }
        if self.archs.is_empty() {
            return Err(Error::Param("archs must be non-empty".into()));
        }
        let distinct: BTreeSet<Arch> = self.archs.iter().copied().collect();
        if distinct.len() != self.archs.len() {
            return Err(Error::Param("archs must be distinct".into()));
        }
        if self.ast_nodes_min == 0 || self.ast_nodes_min > self.ast_nodes_max {
            return Err(Error::Param(format!(
                "ast node bounds must satisfy 1 <= min <= max, got {}..{}",
                self.ast_nodes_min, self.ast_nodes_max
            )));
        }
        if self.import_pool < 8 {
            return Err(Error::Param("import_pool must be >= 8".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub generator: GeneratorSpec,
    pub groups: Vec<HomologyGroup>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomologyGroup {
    pub library: String,
    pub template: String,
    /// Symbol name shared by the members; empty when the template is
    /// stripped (its variants are search candidates only).
    pub name: String,
    pub members: Vec<GroupMember>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupMember {
    pub binary_id: String,
    pub function_id: String,
    pub arch: Arch,
}

const BUILTIN_IMPORTS: [&str; 48] = [
    "memcpy", "memmove", "memset", "memcmp", "strcpy", "strncpy", "strlen", "strcmp", "strncmp",
    "strcat", "strncat", "strchr", "strrchr", "strstr", "strdup", "malloc", "calloc", "realloc",
    "free", "open", "close", "read", "write", "lseek", "printf", "fprintf", "sprintf", "snprintf",
    "atoi", "atol", "strtol", "exit", "abort", "getenv", "setenv", "fopen", "fclose", "fread",
    "fwrite", "fseek", "socket", "bind", "listen", "accept", "connect", "send", "recv", "select",
];

#[derive(Clone, Copy)]
enum TplCallee {
    Import(usize),
    Internal(usize),
}

struct Template {
    name: String,
    exported: bool,
    stripped: bool,
    ast: AstNode,
    callees: Vec<TplCallee>,
    strings: Vec<String>,
    numerics: Vec<i64>,
}

impl Template {
    fn function_id(&self, tpl_idx: usize) -> String {
        if self.stripped {
            format!("sub_{:04x}", 0x4000 + tpl_idx * 0x10)
        } else {
            self.name.clone()
        }
    }
}

fn arch_factor(arch: Arch) -> f64 {
    match arch {
        Arch::X86 => 1.0,
        Arch::X64 => 0.95,
        Arch::Arm => 1.15,
        Arch::Ppc => 1.30,
    }
}

fn leaf_label(rng: &mut ChaCha8Rng) -> NodeLabel {
    let u: f64 = rng.random();
    let id = if u < 0.50 {
        36 // var
    } else if u < 0.85 {
        37 // num
    } else {
        39 // str
    };
    NodeLabel::new(id).unwrap()
}

fn internal_label(rng: &mut ChaCha8Rng) -> NodeLabel {
    let u: f64 = rng.random();
    let id = if u < 0.30 {
        rng.random_range(1..=9) // statements
    } else if u < 0.45 {
        rng.random_range(10..=17) // assignments
    } else if u < 0.57 {
        rng.random_range(18..=23) // comparisons
    } else if u < 0.77 {
        rng.random_range(24..=34) // arithmetic
    } else {
        rng.random_range(35..=43) // other expressions
    };
    NodeLabel::new(id).unwrap()
}

/// Upper bound on child count per label; actual arity is capped by the
/// remaining node budget.
fn max_arity(label: NodeLabel, rng: &mut ChaCha8Rng) -> usize {
    match label.id() {
        1 => rng.random_range(2..=3),       // if: cond + body (+ else)
        2 => rng.random_range(2..=4),       // block
        3 => rng.random_range(2..=3),       // for
        4 => 2,                             // while
        5 => rng.random_range(2..=3),       // switch
        6 => rng.random_range(0..=1),       // return
        7..=9 => 0,                         // goto/continue/break
        10..=17 => 2,                       // assignments
        18..=23 => 2,                       // comparisons
        24..=29 => 2,                       // binary arithmetic
        30..=34 => 1,                       // not, inc/dec
        35 => 2,                            // indexing
        38 => rng.random_range(0..=2),      // call arguments
        41..=43 => 1,                       // cast/addr/deref
        _ => 0,                             // var/num/str/asm
    }
}

fn grow(rng: &mut ChaCha8Rng, budget: &mut usize, depth: usize) -> AstNode {
    let label = if *budget == 0 || depth >= 11 {
        leaf_label(rng)
    } else {
        internal_label(rng)
    };
    let mut children = Vec::new();
    let arity = max_arity(label, rng);
    for _ in 0..arity {
        if *budget == 0 {
            break;
        }
        *budget -= 1;
        children.push(grow(rng, budget, depth + 1));
    }
    AstNode::new(label, children)
}

fn gen_ast(rng: &mut ChaCha8Rng, target_nodes: usize) -> AstNode {
    let mut budget = target_nodes.saturating_sub(1);
    let block = NodeLabel::new(2).unwrap();
    let mut children = Vec::new();
    while budget > 0 {
        budget -= 1;
        children.push(grow(rng, &mut budget, 1));
    }
    AstNode::new(block, children)
}

fn substitute_same_kind(label: NodeLabel, rng: &mut ChaCha8Rng) -> NodeLabel {
    let (lo, hi) = match label.kind() {
        NodeKind::Statement => (1u16, 9u16),
        NodeKind::Expression => (10u16, 43u16),
    };
    // uniform over the other labels of the same kind
    let pick = rng.random_range(lo..hi); // one fewer than the range size
    let id = if pick >= label.id() { pick + 1 } else { pick };
    NodeLabel::new(id).unwrap()
}

fn perturb_labels(node: &mut AstNode, rate: f64, rng: &mut ChaCha8Rng) {
    let u: f64 = rng.random();
    if u < rate {
        node.label = substitute_same_kind(node.label, rng);
    }
    for child in &mut node.children {
        perturb_labels(child, rate, rng);
    }
}

fn small_subtree(rng: &mut ChaCha8Rng) -> AstNode {
    let mut budget = rng.random_range(0..=2);
    grow(rng, &mut budget, 10)
}

fn perturb_subtrees(node: &mut AstNode, rate: f64, rng: &mut ChaCha8Rng) {
    for child in &mut node.children {
        perturb_subtrees(child, rate, rng);
    }
    let u: f64 = rng.random();
    if u < rate {
        let insert = u < rate * 0.5 || node.children.is_empty();
        if insert {
            let sub = small_subtree(rng);
            let pos = rng.random_range(0..=node.children.len());
            node.children.insert(pos, sub);
        } else {
            let pos = rng.random_range(0..node.children.len());
            node.children.remove(pos);
        }
    }
}

fn instr_stats(ast: &AstNode, callee_count: usize, arch: Arch, rng: &mut ChaCha8Rng) -> InstrStats {
    let mut arith = 0u32;
    let mut cmp = 0u32;
    let mut bitwise = 0u32;
    let mut stmts = 0u32;
    let mut call_labels = 0u32;
    ast.visit_preorder(|n| match n.label.id() {
        1..=9 => stmts += 1,
        18..=23 => cmp += 1,
        24 | 25 | 30 => bitwise += 1,
        26..=29 | 31..=34 => arith += 1,
        38 => call_labels += 1,
        _ => {}
    });
    let factor = arch_factor(arch);
    let mut jittered = |base: f64| -> u32 {
        let jitter = 0.9 + 0.2 * rng.random::<f64>();
        (base * factor * jitter).round() as u32
    };
    InstrStats {
        instructions: jittered(ast.node_count() as f64 * 2.6).max(1),
        arithmetic: jittered(arith as f64 * 1.4),
        call: callee_count as u32 + call_labels,
        logical: jittered((cmp + bitwise) as f64 * 1.2),
        transfer: jittered(stmts as f64 * 1.8).max(1),
    }
}

/// Generates the corpus and its ground-truth manifest. Same spec and seed
/// always produce identical output, byte for byte once serialized.
pub fn synth_corpus(spec: &GeneratorSpec, seed: u64) -> Result<(Corpus, CorpusManifest)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let imports: Vec<String> = (0..spec.import_pool)
        .map(|i| {
            BUILTIN_IMPORTS
                .get(i)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("ext_{:03}", i - BUILTIN_IMPORTS.len()))
        })
        .collect();

    let mut binaries = Vec::new();
    let mut groups = Vec::new();

    for lib_idx in 0..spec.libraries {
        let library = format!("lib{lib_idx:02}");
        let templates = gen_templates(spec, &mut rng, lib_idx);

        for &arch in &spec.archs {
            let binary_id = format!("{library}-{arch}");
            let mut functions = BTreeMap::new();
            let mut call_graph = BTreeSet::new();
            let mut dynamic_symbols: BTreeSet<String> = templates
                .iter()
                .filter(|t| t.exported)
                .map(|t| t.name.clone())
                .collect();

            for (tpl_idx, tpl) in templates.iter().enumerate() {
                let func_id = tpl.function_id(tpl_idx);

                let mut ast = tpl.ast.clone();
                perturb_labels(&mut ast, spec.label_substitution_rate, &mut rng);
                perturb_subtrees(&mut ast, spec.subtree_edit_rate, &mut rng);

                let callees = perturb_callees(
                    &tpl.callees,
                    spec,
                    &templates,
                    tpl_idx,
                    &imports,
                    &mut rng,
                );
                let callee_refs: Vec<CalleeRef> = callees
                    .iter()
                    .map(|c| match *c {
                        TplCallee::Import(i) => CalleeRef {
                            name: imports[i].clone(),
                            dynamic: true,
                        },
                        TplCallee::Internal(t) => CalleeRef {
                            name: templates[t].function_id(t),
                            dynamic: templates[t].exported,
                        },
                    })
                    .collect();

                for r in &callee_refs {
                    if r.dynamic {
                        dynamic_symbols.insert(r.name.clone());
                    }
                    call_graph.insert((func_id.clone(), r.name.clone()));
                }

                let string_constants: Vec<String> = tpl
                    .strings
                    .iter()
                    .filter(|_| rng.random::<f64>() < spec.constant_retention)
                    .cloned()
                    .collect();
                let numeric_constants: Vec<i64> = tpl
                    .numerics
                    .iter()
                    .filter(|_| rng.random::<f64>() < spec.constant_retention)
                    .copied()
                    .collect();

                let stats = instr_stats(&ast, callee_refs.len(), arch, &mut rng);
                functions.insert(
                    func_id.clone(),
                    FunctionRecord {
                        binary_id: binary_id.clone(),
                        id: func_id.clone(),
                        name: if tpl.stripped { String::new() } else { tpl.name.clone() },
                        arch,
                        ast,
                        callees: callee_refs,
                        string_constants,
                        numeric_constants,
                        instr_stats: stats,
                    },
                );
            }

            binaries.push(BinaryRecord {
                binary_id,
                library: library.clone(),
                arch,
                functions,
                call_graph,
                dynamic_symbols,
            });
        }

        for (tpl_idx, tpl) in templates.iter().enumerate() {
            groups.push(HomologyGroup {
                library: library.clone(),
                template: tpl.name.clone(),
                name: if tpl.stripped { String::new() } else { tpl.name.clone() },
                members: spec
                    .archs
                    .iter()
                    .map(|&arch| GroupMember {
                        binary_id: format!("{library}-{arch}"),
                        function_id: tpl.function_id(tpl_idx),
                        arch,
                    })
                    .collect(),
            });
        }
    }

    let corpus = Corpus::from_binaries(binaries)?;
    let manifest = CorpusManifest {
        schema_version: super::jsonl::SCHEMA_VERSION,
        seed,
        generator: spec.clone(),
        groups,
    };
    Ok((corpus, manifest))
}

fn gen_templates(spec: &GeneratorSpec, rng: &mut ChaCha8Rng, lib_idx: usize) -> Vec<Template> {
    let count = spec.functions_per_library;
    let mut templates = Vec::with_capacity(count);
    for tpl_idx in 0..count {
        let name = format!("fn{tpl_idx:02}");
        let exported = rng.random::<f64>() < spec.export_fraction;
        let stripped = !exported && rng.random::<f64>() < spec.strip_fraction;

        let role: f64 = rng.random();
        let callees: Vec<TplCallee> = if role < spec.leaf_fraction {
            Vec::new()
        } else if role < spec.leaf_fraction + spec.static_only_fraction && count > 1 {
            let k = rng.random_range(1..=3);
            (0..k).map(|_| TplCallee::Internal(other_template(rng, count, tpl_idx))).collect()
        } else {
            let k = rng.random_range(2..=7);
            (0..k)
                .map(|_| {
                    if rng.random::<f64>() < 0.7 || count == 1 {
                        TplCallee::Import(rng.random_range(0..spec.import_pool))
                    } else {
                        TplCallee::Internal(other_template(rng, count, tpl_idx))
                    }
                })
                .collect()
        };

        let target = rng.random_range(spec.ast_nodes_min..=spec.ast_nodes_max);
        let ast = gen_ast(rng, target);

        let strings = if rng.random::<f64>() < spec.no_strings_fraction {
            Vec::new()
        } else {
            let n = rng.random_range(4..=8);
            (0..n).map(|i| format!("s_{lib_idx:02}_{tpl_idx:02}_{i}")).collect()
        };
        let numerics = {
            let n = rng.random_range(0..=6);
            (0..n).map(|_| rng.random_range(0..100_000i64)).collect()
        };

        templates.push(Template {
            name,
            exported,
            stripped,
            ast,
            callees,
            strings,
            numerics,
        });
    }
    templates
}

fn other_template(rng: &mut ChaCha8Rng, count: usize, this: usize) -> usize {
    let pick = rng.random_range(0..count - 1);
    if pick >= this {
        pick + 1
    } else {
        pick
    }
}

/// Leaf templates stay leaves (inlining removes calls, it does not invent
/// them); non-empty lists get per-entry delete / substitute / extra-insert.
fn perturb_callees(
    callees: &[TplCallee],
    spec: &GeneratorSpec,
    templates: &[Template],
    this: usize,
    imports: &[String],
    rng: &mut ChaCha8Rng,
) -> Vec<TplCallee> {
    if callees.is_empty() {
        return Vec::new();
    }
    let rate = spec.callee_edit_rate;
    let mut out = Vec::with_capacity(callees.len());
    for &callee in callees {
        let u: f64 = rng.random();
        if u >= rate || rate == 0.0 {
            out.push(callee);
            continue;
        }
        let op = ((u / rate) * 3.0) as usize;
        match op {
            0 => {} // deleted (inlined)
            1 => {
                // substituted
                let new = match callee {
                    TplCallee::Import(_) => TplCallee::Import(rng.random_range(0..imports.len())),
                    TplCallee::Internal(_) if templates.len() > 1 => {
                        TplCallee::Internal(other_template(rng, templates.len(), this))
                    }
                    TplCallee::Internal(t) => TplCallee::Internal(t),
                };
                out.push(new);
            }
            _ => {
                // kept, plus an extra inserted call
                out.push(callee);
                out.push(TplCallee::Import(rng.random_range(0..imports.len())));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::index::CorpusIndex;
    use super::*;

    fn small_spec() -> GeneratorSpec {
        GeneratorSpec {
            libraries: 2,
            functions_per_library: 5,
            ..GeneratorSpec::default()
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = small_spec();
        let (c1, m1) = synth_corpus(&spec, 99).unwrap();
        let (c2, m2) = synth_corpus(&spec, 99).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(
            serde_json::to_string(&m1).unwrap(),
            serde_json::to_string(&m2).unwrap()
        );
        let (c3, _) = synth_corpus(&spec, 100).unwrap();
        assert_ne!(c1, c3);
    }

    #[test]
    fn zero_perturbation_gives_identical_variants() {
        let spec = GeneratorSpec {
            label_substitution_rate: 0.0,
            subtree_edit_rate: 0.0,
            callee_edit_rate: 0.0,
            constant_retention: 1.0,
            ..small_spec()
        };
        let (corpus, manifest) = synth_corpus(&spec, 5).unwrap();
        for group in &manifest.groups {
            let members: Vec<&FunctionRecord> = group
                .members
                .iter()
                .map(|m| &corpus.binary(&m.binary_id).unwrap().functions[&m.function_id])
                .collect();
            for pair in members.windows(2) {
                assert_eq!(pair[0].ast, pair[1].ast);
                assert_eq!(pair[0].string_constants, pair[1].string_constants);
                assert_eq!(
                    pair[0].callees.len(),
                    pair[1].callees.len(),
                    "callee lists must match with zero perturbation"
                );
            }
        }
    }

    #[test]
    fn counts_and_ground_truth_are_complete() {
        let spec = GeneratorSpec {
            libraries: 1,
            functions_per_library: 10,
            ..GeneratorSpec::default()
        };
        let (corpus, manifest) = synth_corpus(&spec, 1).unwrap();
        assert_eq!(corpus.binaries().len(), 4);
        assert_eq!(corpus.function_count(), 40);
        assert_eq!(manifest.groups.len(), 10);
        let mut seen = BTreeSet::new();
        for g in &manifest.groups {
            assert_eq!(g.members.len(), 4);
            for m in &g.members {
                assert!(seen.insert((g.library.clone(), g.template.clone(), m.arch)));
                let b = corpus.binary(&m.binary_id).unwrap();
                assert!(b.functions.contains_key(&m.function_id));
            }
        }
        assert_eq!(seen.len(), 40);
    }

    #[test]
    fn rejects_out_of_range_rates() {
        let spec = GeneratorSpec {
            label_substitution_rate: 1.5,
            ..GeneratorSpec::default()
        };
        assert!(matches!(synth_corpus(&spec, 0), Err(Error::Param(_))));
    }

    #[test]
    fn dst_is_consistent_with_callee_flags() {
        let (corpus, _) = synth_corpus(&small_spec(), 11).unwrap();
        for b in corpus.binaries() {
            for f in b.functions.values() {
                for c in &f.callees {
                    assert_eq!(
                        c.dynamic,
                        b.dynamic_symbols.contains(&c.name),
                        "flag and DST disagree for {} in {}",
                        c.name,
                        b.binary_id
                    );
                }
            }
        }
    }

    #[test]
    fn index_builds_and_groups_match_manifest() {
        let (corpus, manifest) = synth_corpus(&small_spec(), 17).unwrap();
        let index = CorpusIndex::build(&corpus);
        let named_groups = manifest.groups.iter().filter(|g| !g.name.is_empty()).count();
        assert_eq!(index.homology_groups().len(), named_groups);
    }
}
