//! Hybrid document retrieval, passage ranking, typed answer extraction and
//! FAQ matching.

mod answer;
mod engine;
mod faq;
mod index;
mod query;
mod rank;

use std::io;

use thiserror::Error;

pub use answer::{extract_answer, AnswerSpan, DEFAULT_ANSWER_THRESHOLD, UNTYPED_FALLBACK_FACTOR};
pub use engine::{Answer, DocHit, Engine, EngineInputs, PassageHit, QueryInfo, SearchConfig, SearchRequest, SearchResponse};
pub use faq::{FaqEntry, FaqMatch, FaqStore, DEFAULT_FAQ_THRESHOLD};
pub use index::{bm25_idf, bm25_term, build_index, document_tokens, Bm25Params, Index, IndexedDoc, Posting, Postings, TITLE_WEIGHT};
pub use query::{
    classify_query, expand_query, AnswerType, Classification, ExpansionTerm, Query, QueryMode, CO_CANONICAL_WEIGHT,
    GRAPH_NEIGHBORS_PER_ENTITY, GRAPH_NEIGHBOR_WEIGHT,
};
pub use rank::{bm25_rank, min_cover_window, proximity_bonus, rank_documents, rank_passages, RankWeights, ScoredDoc, ScoredPassage};

use crate::corpus::CorpusError;
use crate::ckg::KgError;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("query has no searchable terms")]
    EmptyQuery,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown document `{0}`")]
    NotFound(String),
    #[error("{0}: {1}")]
    Io(String, #[source] io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Kg(#[from] KgError),
}
