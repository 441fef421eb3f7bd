//! Evaluation harness: classification and ranking metrics plus the two
//! end-to-end experiment drivers (pair classification across architectures,
//! and ranked search with the filter and re-ranker switched on or off).

mod metrics;
mod tasks;

pub use metrics::{mrr, recall_at_k, roc_auc, RocPoint, RocReport};
pub use tasks::{run_task_c, run_task_v, RankReport, StageTimings, TaskCReport, TaskVConfig};
