pub mod bench;
pub mod eval;
pub mod ingest;
pub mod search;
pub mod synth;
pub mod train;
