//! End-to-end subcommand tests driving the compiled binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use homolog_core::corpus::{load_corpus_file, save_corpus_file, Corpus};

fn homolog() -> Command {
    Command::new(env!("CARGO_BIN_EXE_homolog"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawning homolog");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    out
}

/// Zero-perturbation corpus: every arch variant of a template is identical.
fn synth_exact(dir: &Path, name: &str, seed: u64) -> PathBuf {
    let out = dir.join(name);
    run_ok(homolog().args([
        "synth",
        "--out",
        out.to_str().unwrap(),
        "--libraries",
        "2",
        "--functions-per-library",
        "4",
        "--archs",
        "x86,arm",
        "--label-substitution-rate",
        "0",
        "--subtree-edit-rate",
        "0",
        "--callee-edit-rate",
        "0",
        "--constant-retention",
        "1",
        "--seed",
        &seed.to_string(),
    ]));
    out
}

fn train_quick(dir: &Path, corpus: &Path) -> PathBuf {
    let model = dir.join("model.json");
    let trace = dir.join("loss.csv");
    run_ok(homolog().args([
        "train",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--hidden-size",
        "6",
        "--embed-size",
        "4",
        "--epochs",
        "6",
        "--seed",
        "1",
    ]));
    model
}

/// Copies one suitable function (named, dynamic callee, strings) out of the
/// corpus into a fresh single-function query binary.
fn plant_query(dir: &Path, corpus_path: &Path) -> (PathBuf, String) {
    let corpus = load_corpus_file(corpus_path).unwrap();
    let (binary, function) = corpus
        .functions()
        .find(|(_, f)| {
            f.is_named() && !f.string_constants.is_empty() && f.callees.iter().any(|c| c.dynamic)
        })
        .expect("corpus holds a named function with dynamic callees and strings");

    let mut query_binary = binary.clone();
    query_binary.binary_id = "query-0".into();
    let mut query_fn = function.clone();
    query_fn.binary_id = "query-0".into();
    query_binary.functions = [(query_fn.id.clone(), query_fn.clone())].into_iter().collect();
    query_binary.call_graph = binary
        .call_graph
        .iter()
        .filter(|(caller, _)| *caller == query_fn.id)
        .cloned()
        .collect();

    let path = dir.join("queries.jsonl");
    let queries = Corpus::from_binaries(vec![query_binary]).unwrap();
    save_corpus_file(&queries, &path).unwrap();
    (path, query_fn.name.clone())
}

fn result_lines(report: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(report)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["type"] == "result")
        .collect()
}

#[test]
fn synth_is_deterministic_and_config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth_exact(dir.path(), "a.jsonl", 3);
    let b = synth_exact(dir.path(), "b.jsonl", 3);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        fs::read(a.with_extension("manifest.json")).unwrap(),
        fs::read(b.with_extension("manifest.json")).unwrap(),
    );

    // the same spec through a config file produces the same bytes
    let config = dir.path().join("gen.toml");
    fs::write(
        &config,
        "libraries = 2\nfunctions_per_library = 4\narchs = [\"x86\", \"arm\"]\n\
         label_substitution_rate = 0.0\nsubtree_edit_rate = 0.0\n\
         callee_edit_rate = 0.0\nconstant_retention = 1.0\n",
    )
    .unwrap();
    let c = dir.path().join("c.jsonl");
    run_ok(homolog().args([
        "synth",
        "--out",
        c.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "3",
    ]));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn search_ranks_planted_duplicate_first_via_genealogist_branch() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_exact(dir.path(), "corpus.jsonl", 3);
    let model = train_quick(dir.path(), &corpus);
    let (queries, query_name) = plant_query(dir.path(), &corpus);

    let out = dir.path().join("results.jsonl");
    run_ok(homolog().args([
        "search",
        "--corpus",
        corpus.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--queries",
        queries.to_str().unwrap(),
        "--query-id",
        &query_name,
        "--cutoff",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]));

    let results = result_lines(&out);
    assert!(!results.is_empty(), "search produced no results");
    let top = &results[0];
    assert_eq!(top["rank"], 1);
    assert_eq!(top["name"], query_name.as_str(), "exact copy should rank first");
    assert_eq!(top["filter_branch"], "gl_csr");

    // provenance arithmetic holds for every emitted candidate
    for line in &results {
        if let Some(m) = line["match"].as_object() {
            let expect = 0.1 * line["model_sim"].as_f64().unwrap() + 0.9 * m["total"].as_f64().unwrap();
            assert!((line["final_score"].as_f64().unwrap() - expect).abs() < 1e-12);
        }
    }

    // byte-identical rerun
    let out2 = dir.path().join("results2.jsonl");
    run_ok(homolog().args([
        "search",
        "--corpus",
        corpus.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--queries",
        queries.to_str().unwrap(),
        "--query-id",
        &query_name,
        "--cutoff",
        "0",
        "--out",
        out2.to_str().unwrap(),
    ]));
    let (a, b) = (fs::read_to_string(&out).unwrap(), fs::read_to_string(&out2).unwrap());
    // the meta lines embed the output-independent inputs, so whole files compare
    assert_eq!(a, b);
}

#[test]
fn search_cutoff_is_a_hard_floor() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_exact(dir.path(), "corpus.jsonl", 5);
    let model = train_quick(dir.path(), &corpus);
    let (queries, query_name) = plant_query(dir.path(), &corpus);

    // a cutoff of 1.0 sits above every softmax output: nothing survives
    let none = dir.path().join("none.jsonl");
    run_ok(homolog().args([
        "search",
        "--corpus", corpus.to_str().unwrap(),
        "--model", model.to_str().unwrap(),
        "--queries", queries.to_str().unwrap(),
        "--query-id", &query_name,
        "--cutoff", "1.0",
        "--out", none.to_str().unwrap(),
    ]));
    assert!(result_lines(&none).is_empty());

    // cutoff 0 keeps everything the filter and top-k let through
    let all = dir.path().join("all.jsonl");
    run_ok(homolog().args([
        "search",
        "--corpus", corpus.to_str().unwrap(),
        "--model", model.to_str().unwrap(),
        "--queries", queries.to_str().unwrap(),
        "--query-id", &query_name,
        "--cutoff", "0",
        "--top-k", "3",
        "--out", all.to_str().unwrap(),
    ]));
    let text = fs::read_to_string(&all).unwrap();
    let query_line: serde_json::Value = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .find(|v: &serde_json::Value| v["type"] == "query")
        .unwrap();
    let retained = query_line["retained"].as_u64().unwrap();
    let results = query_line["results"].as_u64().unwrap();
    assert_eq!(results, retained.min(3), "cutoff 0 keeps exactly min(top_k, retained)");

    let invalid = homolog()
        .args([
            "search",
            "--corpus", corpus.to_str().unwrap(),
            "--model", model.to_str().unwrap(),
            "--queries", queries.to_str().unwrap(),
            "--cutoff", "1.5",
        ])
        .output()
        .unwrap();
    assert_eq!(invalid.status.code(), Some(2), "out-of-range cutoff is a parameter error");
}

#[test]
fn unknown_query_id_fails_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_exact(dir.path(), "corpus.jsonl", 3);
    let model = train_quick(dir.path(), &corpus);
    let (queries, _) = plant_query(dir.path(), &corpus);

    let out = homolog()
        .args([
            "search",
            "--corpus", corpus.to_str().unwrap(),
            "--model", model.to_str().unwrap(),
            "--queries", queries.to_str().unwrap(),
            "--query-id", "no_such_function",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("no_such_function"), "stderr names the id: {stderr}");
}

#[test]
fn train_checkpoints_and_eval_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_exact(dir.path(), "corpus.jsonl", 3);
    let m1 = train_quick(dir.path(), &corpus);
    let m1_bytes = fs::read(&m1).unwrap();
    let m2 = train_quick(dir.path(), &corpus);
    assert_eq!(m1_bytes, fs::read(&m2).unwrap());

    // reports land in HOMOLOG_REPORT_DIR when no explicit path is given
    let reports = dir.path().join("reports");
    for _ in 0..2 {
        run_ok(
            homolog()
                .env("HOMOLOG_REPORT_DIR", &reports)
                .args([
                    "eval-v",
                    "--corpus", corpus.to_str().unwrap(),
                    "--model", m1.to_str().unwrap(),
                    "--seed", "2",
                    "--pool-size", "4",
                ]),
        );
    }
    let report = reports.join("eval_v.json");
    assert!(report.exists());
    assert!(reports.join("eval_v_timings.json").exists());
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let mrr = parsed["mrr"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&mrr));

    let first = fs::read(&report).unwrap();
    run_ok(
        homolog()
            .env("HOMOLOG_REPORT_DIR", &reports)
            .args([
                "eval-v",
                "--corpus", corpus.to_str().unwrap(),
                "--model", m1.to_str().unwrap(),
                "--seed", "2",
                "--pool-size", "4",
            ]),
    );
    assert_eq!(first, fs::read(&report).unwrap(), "eval-v report is byte-stable");

    // classification report plus a ROC curve spanning the sentinels
    run_ok(
        homolog()
            .env("HOMOLOG_REPORT_DIR", &reports)
            .args([
                "eval-c",
                "--corpus", corpus.to_str().unwrap(),
                "--model", m1.to_str().unwrap(),
                "--seed", "2",
            ]),
    );
    let roc = fs::read_to_string(reports.join("eval_c.roc.csv")).unwrap();
    let rows: Vec<&str> = roc.lines().collect();
    assert_eq!(rows[0], "threshold,tpr,fpr");
    assert!(rows[1].starts_with("inf,0,0"), "curve starts at (0,0): {}", rows[1]);
    assert!(rows.last().unwrap().starts_with("-inf,1,1"), "curve ends at (1,1)");
}

#[test]
fn ingest_rejects_malformed_lines_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_exact(dir.path(), "corpus.jsonl", 3);

    // sane corpus round-trips through ingest --out unchanged
    let normalized = dir.path().join("normalized.jsonl");
    run_ok(homolog().args([
        "ingest",
        "--input", corpus.to_str().unwrap(),
        "--out", normalized.to_str().unwrap(),
    ]));
    assert_eq!(fs::read(&corpus).unwrap(), fs::read(&normalized).unwrap());

    let broken = dir.path().join("broken.jsonl");
    let mut text = fs::read_to_string(&corpus).unwrap();
    text.push_str("{\"type\":\"function\",\"binary_id\":\"nowhere\"}\n");
    fs::write(&broken, text).unwrap();
    let out = homolog()
        .args(["ingest", "--input", broken.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "schema problems are data errors");
    let stderr = String::from_utf8_lossy(&out.stderr);
    // 4 binaries x (header + 4 functions) = 20 lines; the bad line is 21
    assert!(stderr.contains(":21:"), "error carries a line position: {stderr}");
}
