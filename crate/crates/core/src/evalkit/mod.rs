//! TREC-style evaluation: qrels and run files, P@k / R@k / NDCG@k, the
//! NQ-vs-KQ robustness metric, and the blinded passage/answer judgement
//! workflow.

mod metrics;
mod pool;
mod robustness;
mod trec;

use std::io;

use thiserror::Error;

pub use metrics::{
    aggregate_qrels, evaluate_run, ndcg_at_k, precision_recall_at_k, AggregateReport, MetricReport, MetricSpec,
    PrecisionRecall,
};
pub use pool::{
    prepare_blind_pool, read_sheet, score_prqa, write_sheet, BlindPool, PoolMapping, PooledResult, PrqaScores,
    QueryResults, RowKey, RowSource, SheetRow, SystemResults, MAX_RESULTS_PER_QUERY,
};
pub use robustness::{em_f1_for_topic, robustness_em_f1, token_f1, RobustnessReport};
pub use trec::{Qrels, RunEntry, RunFile, Topic, TopicSet};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}: {1}")]
    Io(String, #[source] io::Error),
    #[error("{0}")]
    Parse(String),
    #[error("invalid run: {0}")]
    InvalidRun(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no title for documents: {}", .0.join(", "))]
    UnresolvedTitles(Vec<String>),
    #[error("unannotated rows: {}", .0.join(", "))]
    Unannotated(Vec<String>),
}

impl EvalError {
    fn parse(line: usize, msg: String) -> Self {
        if line == 0 {
            EvalError::Parse(msg)
        } else {
            EvalError::Parse(format!("line {line}: {msg}"))
        }
    }
}
