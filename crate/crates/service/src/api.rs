//! Request building and response payloads shared by the CLI and the HTTP
//! server, so both paths emit the same bytes for the same input.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use cordsearch_core::ckg::CitationNeighbors;
use cordsearch_core::corpus::Article;
use cordsearch_core::medner::EntityMention;
use cordsearch_core::search::{Engine, QueryMode, SearchRequest, SearchResponse};

use crate::error::{Error, Result};

pub const MAX_K: usize = 1000;

/// Validate raw search parameters into an engine request. Topic values may
/// also be comma-separated lists.
pub fn search_request(q: &str, topics: &[String], mode: Option<&str>, k: Option<usize>) -> Result<SearchRequest> {
    if q.trim().is_empty() {
        return Err(Error::user("query is empty"));
    }
    let mode = match mode {
        None => None,
        Some(m) => Some(m.parse::<QueryMode>()?),
    };
    if let Some(k) = k {
        if k == 0 || k > MAX_K {
            return Err(Error::user(format!("k must lie in 1..={MAX_K}, got {k}")));
        }
    }
    let topics: BTreeSet<String> = topics
        .iter()
        .flat_map(|t| t.split(','))
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect();
    Ok(SearchRequest {
        query: q.to_string(),
        topics,
        mode,
        k,
    })
}

/// Unknown topic names are rejected rather than silently matching nothing.
pub fn run_search(engine: &Engine, request: &SearchRequest) -> Result<SearchResponse> {
    let unknown: Vec<&String> = request.topics.iter().filter(|t| !engine.topics().contains(t)).collect();
    if !unknown.is_empty() {
        return Err(Error::user(format!("unknown topics: {unknown:?}")));
    }
    Ok(engine.search(request)?)
}

pub fn search_json(response: &SearchResponse) -> Result<String> {
    serde_json::to_string(response).map_err(|e| Error::internal(e.to_string()))
}

/// `/search` body: the CLI payload with the session id in front.
#[derive(Debug, Serialize)]
pub struct SearchPayload<'a> {
    pub query_id: &'a str,
    #[serde(flatten)]
    pub response: &'a SearchResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicInfo {
    pub name: String,
    pub doc_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicList {
    pub topics: Vec<TopicInfo>,
}

pub fn topic_list(engine: &Engine) -> TopicList {
    let topics = engine
        .topics()
        .iter()
        .map(|name| TopicInfo {
            name: name.clone(),
            doc_count: engine
                .articles()
                .filter(|a| engine.doc_topics(&a.doc_id).is_some_and(|t| t.contains(name)))
                .count(),
        })
        .collect();
    TopicList { topics }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleView {
    #[serde(flatten)]
    pub article: Article,
    pub topics: Vec<String>,
    pub entities: Vec<EntityMention>,
}

pub fn article_view(engine: &Engine, doc_id: &str) -> Result<ArticleView> {
    let article = engine
        .article(doc_id)
        .ok_or_else(|| Error::NotFound(format!("unknown document `{doc_id}`")))?;
    Ok(ArticleView {
        article: article.clone(),
        topics: engine.doc_topics(doc_id).map(|t| t.iter().cloned().collect()).unwrap_or_default(),
        entities: engine.mentions(doc_id).to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarArticle {
    pub doc_id: String,
    pub title: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarList {
    pub doc_id: String,
    pub alpha: f64,
    pub similar: Vec<SimilarArticle>,
}

pub fn similar(engine: &Engine, doc_id: &str, k: Option<usize>, alpha: Option<f64>) -> Result<SimilarList> {
    let k = k.unwrap_or(10);
    if k == 0 || k > MAX_K {
        return Err(Error::user(format!("k must lie in 1..={MAX_K}, got {k}")));
    }
    if let Some(a) = alpha {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::user(format!("alpha must lie in [0, 1], got {a}")));
        }
    }
    let ranked = engine.recommend(doc_id, k, alpha)?;
    Ok(SimilarList {
        doc_id: doc_id.to_string(),
        alpha: alpha.unwrap_or(engine.config().recommend_alpha),
        similar: ranked
            .into_iter()
            .map(|(d, score)| SimilarArticle {
                title: engine.article(&d).map(|a| a.title.clone()).unwrap_or_default(),
                doc_id: d,
                score,
            })
            .collect(),
    })
}

pub fn citations(engine: &Engine, doc_id: &str) -> Result<CitationNeighbors> {
    Ok(engine.citations(doc_id)?)
}
