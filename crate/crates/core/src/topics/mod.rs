//! Topic modeling: z-label LDA, curation to a fixed display scheme and a
//! multi-label classifier distilled from the curated labels.

mod classifier;
mod curation;
mod lda;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classifier::{train_classifier, ClassifierConfig, LinearModel, TopicClassifier, CONFIDENCE_THRESHOLD};
pub use curation::{
    curate, curate_k, derive_doc_labels, labels_from_theta, ten_topic_ops, CuratedTopics, CurationOp,
    CURATED_TOPIC_NAMES,
};
pub use lda::{train_zlabel_lda, GibbsSampler, LdaConfig, TopicModel, ZLabelSeeds};

pub const DEFAULT_ASSIGN_THRESHOLD: f64 = 0.2;

#[derive(Debug, Error)]
pub enum TopicError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("seed term `{0}` has an empty allowed topic set")]
    EmptySeed(String),
    #[error("topic {topic} out of range for K={k}")]
    TopicOutOfRange { topic: usize, k: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("curation: {0}")]
    Curation(String),
    #[error("gold and predicted label maps cover different documents")]
    KeyMismatch,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("reading {0}: {1}")]
    Io(String, #[source] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub avg_f1: f64,
    pub avg_labels_per_doc: f64,
    pub pct_unlabeled: f64,
}

/// Set-overlap F1 of one document: `2|g∩p| / (|g| + |p|)`, 1 when both
/// sets are empty.
pub fn set_f1(gold: &BTreeSet<String>, pred: &BTreeSet<String>) -> f64 {
    if gold.is_empty() && pred.is_empty() {
        return 1.0;
    }
    let overlap = gold.intersection(pred).count();
    2.0 * overlap as f64 / (gold.len() + pred.len()) as f64
}

pub fn evaluate_f1(
    gold: &BTreeMap<String, BTreeSet<String>>,
    pred: &BTreeMap<String, BTreeSet<String>>,
) -> Result<F1Report, TopicError> {
    if !gold.keys().eq(pred.keys()) {
        return Err(TopicError::KeyMismatch);
    }
    let n = gold.len();
    if n == 0 {
        return Ok(F1Report {
            avg_f1: 0.0,
            avg_labels_per_doc: 0.0,
            pct_unlabeled: 0.0,
        });
    }
    let f1_sum: f64 = gold.iter().map(|(d, g)| set_f1(g, &pred[d])).sum();
    let labels: usize = pred.values().map(BTreeSet::len).sum();
    let unlabeled = pred.values().filter(|p| p.is_empty()).count();
    Ok(F1Report {
        avg_f1: f1_sum / n as f64,
        avg_labels_per_doc: labels as f64 / n as f64,
        pct_unlabeled: unlabeled as f64 / n as f64,
    })
}
