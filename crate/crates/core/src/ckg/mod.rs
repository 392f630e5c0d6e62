//! Scholarly knowledge graph over articles, authors, institutions, topics
//! and medical entities, with translational embeddings and document
//! recommendations.

mod embedding;
mod graph;
mod semantic;

use thiserror::Error;

pub use embedding::{train_kg_embeddings, KgEmbedding, TrainReport, TransEConfig};
pub use graph::{
    build_graph, normalize_name, BuildStats, CitationNeighbors, KnowledgeGraph, NodeId, NodeKind, PublicationKey,
    Relation, Triple,
};
pub use semantic::SemanticVectors;

use crate::text::{dense_cosine, sparse_dot};

pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Error)]
pub enum KgError {
    #[error("unknown document `{0}`")]
    NotFound(String),
    #[error("nothing to train: graph has no triples")]
    NothingToTrain,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("triple endpoint `{0}` is not a node")]
    DanglingEndpoint(String),
    #[error("relation {relation} cannot link {head} to {tail}")]
    RelationType {
        relation: &'static str,
        head: String,
        tail: String,
    },
    #[error("parse error: {0}")]
    Parse(String),
}

/// Blends semantic and knowledge-graph cosine similarity between documents.
pub struct Recommender<'a> {
    pub semantic: &'a SemanticVectors,
    pub embedding: &'a KgEmbedding,
}

impl<'a> Recommender<'a> {
    pub fn new(semantic: &'a SemanticVectors, embedding: &'a KgEmbedding) -> Self {
        Self { semantic, embedding }
    }

    /// `alpha·cos_semantic + (1 − alpha)·cos_kg`. Missing vectors count as zero.
    pub fn similarity(&self, a: &str, b: &str, alpha: f64) -> f64 {
        let sem = match (self.semantic.doc(a), self.semantic.doc(b)) {
            (Some(x), Some(y)) => sparse_dot(x, y),
            _ => 0.0,
        };
        let kg = match (
            self.embedding.entity(&NodeId::article(a)),
            self.embedding.entity(&NodeId::article(b)),
        ) {
            (Some(x), Some(y)) => dense_cosine(x, y),
            _ => 0.0,
        };
        alpha * sem + (1.0 - alpha) * kg
    }

    /// Top `k` other documents by blended similarity; ties by doc_id.
    pub fn recommend(&self, doc_id: &str, k: usize, alpha: f64) -> Result<Vec<(String, f64)>, KgError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(KgError::InvalidConfig(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        if self.semantic.doc(doc_id).is_none() {
            return Err(KgError::NotFound(doc_id.to_string()));
        }
        let mut scored: Vec<(String, f64)> = self
            .semantic
            .doc_vectors
            .keys()
            .filter(|d| d.as_str() != doc_id)
            .map(|d| (d.clone(), self.similarity(doc_id, d, alpha)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }
}
