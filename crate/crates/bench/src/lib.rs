//! Shared fixtures for the pipeline benchmarks: a seeded synthetic corpus
//! and a seeded (untrained) model. Benchmarks measure stage cost, not
//! quality, so training is unnecessary.

use homolog_core::corpus::{synth_corpus, Arch, Corpus, GeneratorSpec};
use homolog_core::siamese::SiameseModel;

pub const FIXTURE_SEED: u64 = 17;

/// Four libraries, eight functions, four architectures: 128 functions with
/// default perturbation rates.
pub fn fixture_corpus() -> Corpus {
    let spec = GeneratorSpec {
        libraries: 4,
        functions_per_library: 8,
        archs: vec![Arch::X86, Arch::X64, Arch::Arm, Arch::Ppc],
        ..GeneratorSpec::default()
    };
    synth_corpus(&spec, FIXTURE_SEED).expect("fixture spec is valid").0
}

pub fn fixture_model(hidden: usize, embed: usize) -> SiameseModel {
    SiameseModel::seeded(hidden, embed, homolog_core::corpus::VOCAB_SIZE, FIXTURE_SEED)
        .expect("fixture dimensions are valid")
}
