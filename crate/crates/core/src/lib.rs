//! Cross-architecture binary function similarity search.
//!
//! The pipeline has three stages. A cheap relational prefilter walks
//! call-graph context (dynamically linked callee names, callee counts,
//! caller relations, string constants) to discard most candidates. A
//! tree-structured recurrent encoder turns each surviving function's AST
//! into a fixed-size vector, and a two-branch comparison head scores vector
//! pairs. A structural re-ranker then rescores the top candidates by
//! matching their callee sets — named callees by intersection, anonymous
//! ones by encoding the callee bodies themselves.
//!
//! Supporting modules provide the corpus data model with JSONL persistence,
//! a seeded synthetic corpus generator, dataset builders, and evaluation
//! harnesses (ROC, MRR, recall@k, end-to-end ranking runs).

pub mod corpus;
pub mod error;
pub mod eval;
pub mod prefilter;
pub mod rerank;
pub mod siamese;
pub mod treelstm;

pub use error::{Error, Result};
