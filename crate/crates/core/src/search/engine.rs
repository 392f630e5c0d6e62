use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::answer::{extract_answer, DEFAULT_ANSWER_THRESHOLD};
use super::faq::{FaqEntry, FaqMatch, FaqStore, DEFAULT_FAQ_THRESHOLD};
use super::index::{build_index, Bm25Params, Index};
use super::query::{expand_query, AnswerType, ExpansionTerm, Query, QueryMode};
use super::rank::{rank_documents, rank_passages, RankWeights};
use super::SearchError;
use crate::ckg::{CitationNeighbors, KgEmbedding, KnowledgeGraph, Recommender, SemanticVectors, DEFAULT_ALPHA};
use crate::corpus::{segment_passages, Article, Section, DEFAULT_STRIDE, DEFAULT_WINDOW};
use crate::medner::{extract_entities_with, EntityMention, Gazetteer, DEFAULT_NEGATION_WINDOW};
use crate::text::Analyzer;

const SNIPPET_CHARS: usize = 240;

/// Every tunable of the retrieval pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub bm25: Bm25Params,
    pub weights: RankWeights,
    pub passage_window: usize,
    pub passage_stride: usize,
    /// Passages scored for answer extraction.
    pub passages_considered: usize,
    pub answer_threshold: f64,
    pub max_answers: usize,
    pub faq_threshold: f64,
    pub negation_window: usize,
    /// Truncated-SVD rank of the semantic document vectors; `None` keeps the
    /// full TF-IDF space.
    pub semantic_rank: Option<usize>,
    pub recommend_alpha: f64,
    pub expand_queries: bool,
    pub default_k: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            bm25: Bm25Params::default(),
            weights: RankWeights::default(),
            passage_window: DEFAULT_WINDOW,
            passage_stride: DEFAULT_STRIDE,
            passages_considered: 10,
            answer_threshold: DEFAULT_ANSWER_THRESHOLD,
            max_answers: 3,
            faq_threshold: DEFAULT_FAQ_THRESHOLD,
            negation_window: DEFAULT_NEGATION_WINDOW,
            semantic_rank: None,
            recommend_alpha: DEFAULT_ALPHA,
            expand_queries: true,
            default_k: 10,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::InvalidArgument(m.to_string()));
        if self.bm25.k1 < 0.0 || !(0.0..=1.0).contains(&self.bm25.b) {
            return bad("bm25 requires k1 >= 0 and b in [0, 1]");
        }
        if self.weights.bm25 < 0.0 || self.weights.semantic < 0.0 {
            return bad("rank weights must be non-negative");
        }
        if self.passage_window == 0 || self.passage_stride == 0 || self.passage_stride > self.passage_window {
            return bad("passage window and stride must satisfy 0 < stride <= window");
        }
        if !(0.0..=1.0).contains(&self.answer_threshold) || !(0.0..=1.0).contains(&self.faq_threshold) {
            return bad("thresholds must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.recommend_alpha) {
            return bad("recommend_alpha must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Everything needed to assemble a searchable snapshot.
#[derive(Debug, Clone, Default)]
pub struct EngineInputs {
    pub articles: Vec<Article>,
    pub gazetteer: Gazetteer,
    pub doc_topics: BTreeMap<String, BTreeSet<String>>,
    /// Names of all curated topics, including ones no document carries.
    pub topic_names: Vec<String>,
    pub graph: Option<KnowledgeGraph>,
    pub embedding: Option<KgEmbedding>,
    pub faq: Vec<FaqEntry>,
    pub config: SearchConfig,
    pub analyzer: Analyzer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRequest {
    pub query: String,
    #[serde(default)]
    pub topics: BTreeSet<String>,
    #[serde(default)]
    pub mode: Option<QueryMode>,
    #[serde(default)]
    pub k: Option<usize>,
}

impl SearchRequest {
    pub fn new(query: impl Into<String>) -> Self {
        Self {
            query: query.into(),
            topics: BTreeSet::new(),
            mode: None,
            k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryInfo {
    pub raw: String,
    pub mode: QueryMode,
    pub answer_type: AnswerType,
    pub focus_terms: Vec<String>,
    pub expansion_terms: Vec<ExpansionTerm>,
    pub topic_filter: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocHit {
    pub doc_id: String,
    pub title: String,
    pub score: f64,
    pub topics: Vec<String>,
    pub snippet: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageHit {
    pub doc_id: String,
    pub passage_index: usize,
    pub section: Section,
    pub text: String,
    pub score: f64,
}

/// A highlighted answer span; offsets are byte offsets into the text of the
/// passage identified by (doc_id, passage_index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub doc_id: String,
    pub passage_index: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub query: QueryInfo,
    pub docs: Vec<DocHit>,
    pub passages: Vec<PassageHit>,
    pub answers: Vec<Answer>,
    pub faq_answer: Option<FaqMatch>,
}

/// An immutable, fully built search snapshot.
#[derive(Debug, Clone)]
pub struct Engine {
    config: SearchConfig,
    analyzer: Analyzer,
    gazetteer: Gazetteer,
    articles: BTreeMap<String, Article>,
    mentions: BTreeMap<String, Vec<EntityMention>>,
    topic_names: Vec<String>,
    index: Index,
    semantic: SemanticVectors,
    graph: Option<KnowledgeGraph>,
    embedding: Option<KgEmbedding>,
    faq: FaqStore,
}

impl Engine {
    pub fn build(inputs: EngineInputs) -> Result<Self, SearchError> {
        let EngineInputs {
            articles,
            gazetteer,
            doc_topics,
            topic_names,
            graph,
            embedding,
            faq,
            config,
            analyzer,
        } = inputs;
        config.validate()?;
        let mentions: BTreeMap<String, Vec<EntityMention>> = articles
            .par_iter()
            .map(|a| {
                let ms = extract_entities_with(&a.full_text(), &gazetteer, config.negation_window);
                (a.doc_id.clone(), ms)
            })
            .collect();
        let passages = articles
            .par_iter()
            .map(|a| segment_passages(a, config.passage_window, config.passage_stride))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .flatten()
            .collect::<Vec<_>>();
        let index = build_index(&articles, &passages, &mentions, &doc_topics, &analyzer);
        let semantic = SemanticVectors::build(&articles, &analyzer, config.semantic_rank);
        let faq = FaqStore::new(faq, analyzer.clone())?;
        let mut names: BTreeSet<String> = topic_names.into_iter().collect();
        names.extend(doc_topics.values().flatten().cloned());
        Ok(Self {
            config,
            analyzer,
            gazetteer,
            articles: articles.into_iter().map(|a| (a.doc_id.clone(), a)).collect(),
            mentions,
            topic_names: names.into_iter().collect(),
            index,
            semantic,
            graph,
            embedding,
            faq,
        })
    }

    pub fn config(&self) -> &SearchConfig {
        &self.config
    }

    pub fn analyzer(&self) -> &Analyzer {
        &self.analyzer
    }

    pub fn gazetteer(&self) -> &Gazetteer {
        &self.gazetteer
    }

    pub fn index(&self) -> &Index {
        &self.index
    }

    pub fn semantic(&self) -> &SemanticVectors {
        &self.semantic
    }

    pub fn graph(&self) -> Option<&KnowledgeGraph> {
        self.graph.as_ref()
    }

    pub fn faq(&self) -> &FaqStore {
        &self.faq
    }

    pub fn doc_count(&self) -> usize {
        self.articles.len()
    }

    pub fn article(&self, doc_id: &str) -> Option<&Article> {
        self.articles.get(doc_id)
    }

    pub fn articles(&self) -> impl Iterator<Item = &Article> {
        self.articles.values()
    }

    pub fn mentions(&self, doc_id: &str) -> &[EntityMention] {
        self.mentions.get(doc_id).map_or(&[], Vec::as_slice)
    }

    pub fn doc_topics(&self, doc_id: &str) -> Option<&BTreeSet<String>> {
        self.index.doc_ordinal(doc_id).map(|o| &self.index.docs[o].topics)
    }

    /// Sorted names of every known topic.
    pub fn topics(&self) -> &[String] {
        &self.topic_names
    }

    pub fn parse_query(&self, request: &SearchRequest) -> Result<Query, SearchError> {
        let mut query = Query::parse(
            &request.query,
            request.mode,
            request.topics.clone(),
            Some(&self.gazetteer),
            &self.analyzer,
        )?;
        if self.config.expand_queries {
            expand_query(&mut query, &self.gazetteer, self.graph.as_ref());
        }
        Ok(query)
    }

    pub fn search(&self, request: &SearchRequest) -> Result<SearchResponse, SearchError> {
        let query = self.parse_query(request)?;
        let k = request.k.unwrap_or(self.config.default_k);
        let ranked = rank_documents(
            &query,
            &self.index,
            Some(&self.semantic),
            &self.analyzer,
            self.config.bm25,
            self.config.weights,
            k,
        );
        let doc_ids: Vec<&str> = ranked.iter().map(|d| d.doc_id.as_str()).collect();
        let scored = rank_passages(
            &query,
            &self.index,
            &doc_ids,
            &self.analyzer,
            self.config.bm25,
            self.config.passages_considered,
        );

        let passages: Vec<PassageHit> = scored
            .iter()
            .map(|s| {
                let p = &self.index.passages[s.ordinal as usize];
                PassageHit {
                    doc_id: p.doc_id.clone(),
                    passage_index: p.passage_index,
                    section: p.section,
                    text: p.text.clone(),
                    score: s.score,
                }
            })
            .collect();

        let mut answers: Vec<Answer> = Vec::new();
        if query.mode == QueryMode::NaturalLanguage {
            for p in &passages {
                if answers.len() == self.config.max_answers {
                    break;
                }
                if let Some(span) = extract_answer(&query, &p.text, Some(&self.gazetteer), self.config.answer_threshold) {
                    // overlapping windows repeat sentences
                    if answers.iter().any(|a| a.doc_id == p.doc_id && a.text == span.text) {
                        continue;
                    }
                    answers.push(Answer {
                        doc_id: p.doc_id.clone(),
                        passage_index: p.passage_index,
                        char_start: span.char_start,
                        char_end: span.char_end,
                        text: span.text,
                        confidence: span.confidence,
                    });
                }
            }
            answers.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
        }

        let docs = ranked
            .iter()
            .map(|d| {
                let article = &self.articles[&d.doc_id];
                let snippet = passages
                    .iter()
                    .find(|p| p.doc_id == d.doc_id)
                    .map(|p| p.text.as_str())
                    .unwrap_or(&article.abstract_text);
                DocHit {
                    doc_id: d.doc_id.clone(),
                    title: article.title.clone(),
                    score: d.score,
                    topics: self.doc_topics(&d.doc_id).map(|t| t.iter().cloned().collect()).unwrap_or_default(),
                    snippet: truncate_chars(snippet, SNIPPET_CHARS),
                }
            })
            .collect();

        let faq_answer = self.faq.match_query(&query.raw, self.config.faq_threshold);
        Ok(SearchResponse {
            query: QueryInfo {
                raw: query.raw,
                mode: query.mode,
                answer_type: query.answer_type,
                focus_terms: query.focus_terms,
                expansion_terms: query.expansion_terms,
                topic_filter: query.topic_filter.into_iter().collect(),
            },
            docs,
            passages,
            answers,
            faq_answer,
        })
    }

    /// Articles most similar to `doc_id` by the blended semantic and graph
    /// embedding similarity. Without graph embeddings only the semantic part
    /// contributes.
    pub fn recommend(&self, doc_id: &str, k: usize, alpha: Option<f64>) -> Result<Vec<(String, f64)>, SearchError> {
        if !self.articles.contains_key(doc_id) {
            return Err(SearchError::NotFound(doc_id.to_string()));
        }
        let alpha = alpha.unwrap_or(self.config.recommend_alpha);
        let empty = KgEmbedding::default();
        let embedding = self.embedding.as_ref().unwrap_or(&empty);
        Ok(Recommender::new(&self.semantic, embedding).recommend(doc_id, k, alpha)?)
    }

    /// Citation neighbours from the knowledge graph, or from the article's
    /// own reference list when no graph is loaded.
    pub fn citations(&self, doc_id: &str) -> Result<CitationNeighbors, SearchError> {
        let Some(article) = self.articles.get(doc_id) else {
            return Err(SearchError::NotFound(doc_id.to_string()));
        };
        if let Some(graph) = &self.graph {
            return Ok(graph.citation_neighbors(doc_id)?);
        }
        let cites: BTreeSet<String> = article
            .cited_doc_ids
            .iter()
            .filter(|c| self.articles.contains_key(*c))
            .cloned()
            .collect();
        let cited_by: BTreeSet<String> = self
            .articles
            .values()
            .filter(|a| a.cited_doc_ids.iter().any(|c| c == doc_id))
            .map(|a| a.doc_id.clone())
            .collect();
        Ok(CitationNeighbors {
            cites: cites.into_iter().collect(),
            cited_by: cited_by.into_iter().collect(),
        })
    }
}

fn truncate_chars(s: &str, n: usize) -> String {
    match s.char_indices().nth(n) {
        Some((i, _)) => format!("{}…", &s[..i]),
        None => s.to_string(),
    }
}
