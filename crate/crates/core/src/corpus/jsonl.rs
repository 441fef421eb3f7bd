//! JSON-lines exchange format: one header line per binary (call graph +
//! dynamic symbol table) and one line per function. Parsing is strict; any
//! violation aborts with file and line number. Unresolvable call-graph
//! endpoints are kept as external references and logged, never fatal.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use super::{Arch, AstNode, BinaryRecord, CalleeRef, Corpus, FunctionRecord, InstrStats};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Binary(BinaryLine),
    Function(FunctionLine),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BinaryLine {
    schema_version: u32,
    binary_id: String,
    /// Defaults to binary_id; homology keys need the library identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    library: Option<String>,
    arch: Arch,
    dynamic_symbols: Vec<String>,
    call_edges: Vec<(String, String)>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schema_version: Option<u32>,
    binary_id: String,
    /// Stable per-binary handle; defaults to `name`. Required when the name
    /// is stripped so edges and reports can still address the function.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    name: String,
    arch: Arch,
    ast: AstNode,
    #[serde(default)]
    callees: Vec<CalleeRef>,
    #[serde(default)]
    strings: Vec<String>,
    #[serde(default)]
    numeric_consts: Vec<i64>,
    #[serde(default)]
    instr_stats: InstrStats,
}

/// Loads every `*.jsonl` file under `path` (or `path` itself if it is a
/// file). Returns binaries sorted by id; iteration over their functions is
/// sorted by function id.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let mut files: Vec<PathBuf> = Vec::new();
    if path.is_file() {
        files.push(path.to_path_buf());
    } else {
        let entries = fs::read_dir(path).map_err(|e| Error::io(path, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(path, e))?;
            let p = entry.path();
            if p.extension().is_some_and(|ext| ext == "jsonl") {
                files.push(p);
            }
        }
        files.sort();
    }

    let mut loader = Loader::default();
    for file in &files {
        loader.read_file(file)?;
    }
    loader.finish()
}

/// Loads a single record file.
pub fn load_corpus_file(path: &Path) -> Result<Corpus> {
    let mut loader = Loader::default();
    loader.read_file(path)?;
    loader.finish()
}

#[derive(Default)]
struct Loader {
    headers: BTreeMap<String, (BinaryLine, PathBuf, usize)>,
    functions: Vec<(FunctionRecord, PathBuf, usize)>,
}

impl Loader {
    fn read_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let line: Line = serde_json::from_str(raw)
                .map_err(|e| Error::schema(path, lineno, e.to_string()))?;
            match line {
                Line::Binary(header) => {
                    if header.schema_version != SCHEMA_VERSION {
                        return Err(Error::schema(
                            path,
                            lineno,
                            format!(
                                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                                header.schema_version
                            ),
                        ));
                    }
                    if header.binary_id.is_empty() {
                        return Err(Error::schema(path, lineno, "empty binary_id"));
                    }
                    if let Some((_, prev_path, prev_line)) = self.headers.get(&header.binary_id) {
                        return Err(Error::schema(
                            path,
                            lineno,
                            format!(
                                "duplicate binary header {:?} (first at {}:{})",
                                header.binary_id,
                                prev_path.display(),
                                prev_line
                            ),
                        ));
                    }
                    self.headers
                        .insert(header.binary_id.clone(), (header, path.to_path_buf(), lineno));
                }
                Line::Function(func) => {
                    if let Some(v) = func.schema_version {
                        if v != SCHEMA_VERSION {
                            return Err(Error::schema(
                                path,
                                lineno,
                                format!("unsupported schema_version {v} (expected {SCHEMA_VERSION})"),
                            ));
                        }
                    }
                    let id = match func.id {
                        Some(id) if !id.is_empty() => id,
                        Some(_) => {
                            return Err(Error::schema(path, lineno, "empty function id"));
                        }
                        None if !func.name.is_empty() => func.name.clone(),
                        None => {
                            return Err(Error::schema(
                                path,
                                lineno,
                                "function with empty name needs an explicit id",
                            ));
                        }
                    };
                    let record = FunctionRecord {
                        binary_id: func.binary_id,
                        id,
                        name: func.name,
                        arch: func.arch,
                        ast: func.ast,
                        callees: func.callees,
                        string_constants: func.strings,
                        numeric_constants: func.numeric_consts,
                        instr_stats: func.instr_stats,
                    };
                    self.functions.push((record, path.to_path_buf(), lineno));
                }
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<Corpus> {
        let mut binaries: BTreeMap<String, BinaryRecord> = BTreeMap::new();
        for (id, (header, _, _)) in &self.headers {
            let library = match &header.library {
                Some(lib) if !lib.is_empty() => lib.clone(),
                _ => header.binary_id.clone(),
            };
            binaries.insert(
                id.clone(),
                BinaryRecord {
                    binary_id: header.binary_id.clone(),
                    library,
                    arch: header.arch,
                    functions: BTreeMap::new(),
                    call_graph: header.call_edges.iter().cloned().collect(),
                    dynamic_symbols: header.dynamic_symbols.iter().cloned().collect(),
                },
            );
        }

        for (record, path, lineno) in self.functions {
            let binary = binaries.get_mut(&record.binary_id).ok_or_else(|| {
                Error::schema(
                    &path,
                    lineno,
                    format!("function references unknown binary {:?}", record.binary_id),
                )
            })?;
            if binary.arch != record.arch {
                return Err(Error::schema(
                    &path,
                    lineno,
                    format!(
                        "function arch {} disagrees with binary {:?} arch {}",
                        record.arch, record.binary_id, binary.arch
                    ),
                ));
            }
            if binary.functions.contains_key(&record.id) {
                return Err(Error::schema(
                    &path,
                    lineno,
                    format!("duplicate function id {:?} in binary {:?}", record.id, record.binary_id),
                ));
            }
            binary.functions.insert(record.id.clone(), record);
        }

        for binary in binaries.values() {
            for (caller, callee) in &binary.call_graph {
                if !binary.functions.contains_key(caller) {
                    warn!(
                        "binary {:?}: call edge from unknown caller {caller:?} kept as external reference",
                        binary.binary_id
                    );
                }
                if !binary.functions.contains_key(callee)
                    && !binary.dynamic_symbols.contains(callee)
                {
                    warn!(
                        "binary {:?}: call edge to {callee:?} resolves to neither a function nor a dynamic symbol; kept as external reference",
                        binary.binary_id
                    );
                }
            }
        }

        Corpus::from_binaries(binaries.into_values().collect())
    }
}

fn binary_line(b: &BinaryRecord) -> BinaryLine {
    BinaryLine {
        schema_version: SCHEMA_VERSION,
        binary_id: b.binary_id.clone(),
        library: if b.library == b.binary_id {
            None
        } else {
            Some(b.library.clone())
        },
        arch: b.arch,
        dynamic_symbols: b.dynamic_symbols.iter().cloned().collect(),
        call_edges: b.call_graph.iter().cloned().collect(),
    }
}

fn function_line(f: &FunctionRecord) -> FunctionLine {
    FunctionLine {
        schema_version: None,
        binary_id: f.binary_id.clone(),
        id: if f.id == f.name { None } else { Some(f.id.clone()) },
        name: f.name.clone(),
        arch: f.arch,
        ast: f.ast.clone(),
        callees: f.callees.clone(),
        strings: f.string_constants.clone(),
        numeric_consts: f.numeric_constants.clone(),
        instr_stats: f.instr_stats,
    }
}

fn write_binary(out: &mut impl Write, b: &BinaryRecord, path: &Path) -> Result<()> {
    let to_io = |e: std::io::Error| Error::io(path, e);
    let header = serde_json::to_string(&Line::Binary(binary_line(b)))
        .map_err(|e| Error::schema(path, 0, e.to_string()))?;
    writeln!(out, "{header}").map_err(to_io)?;
    for f in b.functions.values() {
        let line = serde_json::to_string(&Line::Function(function_line(f)))
            .map_err(|e| Error::schema(path, 0, e.to_string()))?;
        writeln!(out, "{line}").map_err(to_io)?;
    }
    Ok(())
}

/// Writes one `<binary_id>.jsonl` file per binary under `dir`.
pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for b in corpus.binaries() {
        let path = dir.join(format!("{}.jsonl", b.binary_id));
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        write_binary(&mut out, b, &path)?;
        out.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Writes the whole corpus into a single record file.
pub fn save_corpus_file(corpus: &Corpus, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for b in corpus.binaries() {
        write_binary(&mut out, b, path)?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
