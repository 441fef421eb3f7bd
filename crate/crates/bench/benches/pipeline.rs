use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use homolog_bench::{fixture_corpus, fixture_model};
use homolog_core::corpus::CorpusIndex;
use homolog_core::prefilter::{csr, up_relation, FilterThresholds};
use homolog_core::rerank::{build_mcfs, match_score};
use homolog_core::siamese::similarity;
use homolog_core::treelstm::encode_tree;

fn bench_csr(c: &mut Criterion) {
    let mut group = c.benchmark_group("csr");
    for len in [16usize, 64, 256] {
        // worst case for the LCS table: no shared symbols
        let a: Vec<u64> = (0..len as u64).collect();
        let b: Vec<u64> = (len as u64..2 * len as u64).collect();
        group.bench_with_input(BenchmarkId::from_parameter(len), &len, |bench, _| {
            bench.iter(|| csr(black_box(&a), black_box(&b)));
        });
    }
    group.finish();
}

fn bench_encode(c: &mut Criterion) {
    let corpus = fixture_corpus();
    let index = CorpusIndex::build(&corpus);
    let model = fixture_model(16, 8);
    let largest = index
        .ids()
        .max_by_key(|&id| index.record(id).ast.node_count())
        .unwrap();
    let ast = &index.record(largest).ast;
    c.bench_function("encode_tree", |b| {
        b.iter(|| encode_tree(black_box(ast), &model.encoder).unwrap());
    });
}

fn bench_filter(c: &mut Criterion) {
    let corpus = fixture_corpus();
    let index = CorpusIndex::build(&corpus);
    let thresholds = FilterThresholds::default();
    let source = index
        .ids()
        .find(|&id| !index.gl(id).is_empty())
        .expect("fixture has a function with dynamic callees");
    let pool: Vec<_> = index.ids().filter(|&id| id != source).collect();
    c.bench_function("up_relation_full_pool", |b| {
        b.iter(|| up_relation(black_box(source), black_box(&pool), &index, &thresholds).unwrap());
    });
}

fn bench_match(c: &mut Criterion) {
    let corpus = fixture_corpus();
    let index = CorpusIndex::build(&corpus);
    let model = fixture_model(16, 8);
    let mut ids = index.ids().filter(|&id| index.record(id).callee_count() > 0);
    let src = ids.next().unwrap();
    let cand = ids.next().unwrap();
    let src_mcfs = build_mcfs(index.record(src), index.binary_of(src));
    let cand_mcfs = build_mcfs(index.record(cand), index.binary_of(cand));
    let mut sim = |a: &homolog_core::corpus::FunctionRecord,
                   b: &homolog_core::corpus::FunctionRecord| {
        similarity(&a.ast, &b.ast, &model).map(|p| p.sim)
    };
    c.bench_function("match_score", |b| {
        b.iter(|| match_score(black_box(&src_mcfs), black_box(&cand_mcfs), &mut sim).unwrap());
    });
}

criterion_group!(benches, bench_csr, bench_encode, bench_filter, bench_match);
criterion_main!(benches);
