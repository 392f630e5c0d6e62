use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::index::{Bm25Params, Index};
use super::query::Query;
use crate::ckg::SemanticVectors;
use crate::text::{sparse_dot, Analyzer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankWeights {
    pub bm25: f64,
    pub semantic: f64,
}

impl Default for RankWeights {
    fn default() -> Self {
        Self { bm25: 0.8, semantic: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
    pub bm25: f64,
    pub semantic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPassage {
    /// Ordinal into [`Index::passages`].
    pub ordinal: u32,
    pub doc_id: String,
    pub passage_index: usize,
    pub score: f64,
    pub proximity: f64,
}

fn cosine(a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
    let na = sparse_dot(a, a).sqrt();
    let nb = sparse_dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        sparse_dot(a, b) / (na * nb)
    }
}

fn passes_filter(filter: &BTreeSet<String>, topics: &BTreeSet<String>) -> bool {
    filter.is_empty() || !filter.is_disjoint(topics)
}

/// Documents sorted by raw weighted BM25 only, ties broken by doc_id.
pub fn bm25_rank(index: &Index, params: Bm25Params, terms: &[(String, f64)], topic_filter: &BTreeSet<String>) -> Vec<(String, f64)> {
    let acc = index.doc_postings.score(params, terms.iter().map(|(t, w)| (t.as_str(), *w)));
    let mut out: Vec<(String, f64)> = acc
        .into_iter()
        .filter(|(u, _)| passes_filter(topic_filter, &index.docs[*u as usize].topics))
        .map(|(u, s)| (index.docs[u as usize].doc_id.clone(), s))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// Rank documents by `bm25·(BM25 / max BM25) + semantic·cos(query, doc)`.
///
/// Only documents matching at least one query term are candidates, and the
/// topic filter is applied before scoring. Ties go to the smaller doc_id.
pub fn rank_documents(
    query: &Query,
    index: &Index,
    semantic: Option<&SemanticVectors>,
    analyzer: &Analyzer,
    params: Bm25Params,
    weights: RankWeights,
    k: usize,
) -> Vec<ScoredDoc> {
    let terms = query.weighted_terms(analyzer);
    let base = bm25_rank(index, params, &terms, &query.topic_filter);
    let max = base.iter().map(|(_, s)| *s).fold(0.0, f64::max);
    let qvec = semantic.map(|s| s.embed_tokens(&query.focus_terms));
    let mut out: Vec<ScoredDoc> = base
        .into_iter()
        .map(|(doc_id, bm25)| {
            let sem = match (semantic, &qvec) {
                (Some(s), Some(q)) => s.doc(&doc_id).map_or(0.0, |d| cosine(q, d)),
                _ => 0.0,
            };
            let norm = if max > 0.0 { bm25 / max } else { 0.0 };
            ScoredDoc {
                score: weights.bm25 * norm + weights.semantic * sem,
                doc_id,
                bm25,
                semantic: sem,
            }
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
    out.truncate(k);
    out
}

/// Length of the shortest window of raw-token positions that contains at
/// least one occurrence of every term in `wanted`, or `None` when some term
/// never occurs.
pub fn min_cover_window(tokens: &[(String, usize)], wanted: &BTreeSet<&str>) -> Option<usize> {
    if wanted.is_empty() {
        return None;
    }
    let hits: Vec<(usize, &str)> = tokens
        .iter()
        .filter(|(t, _)| wanted.contains(t.as_str()))
        .map(|(t, p)| (*p, t.as_str()))
        .collect();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut best: Option<usize> = None;
    let mut lo = 0;
    for hi in 0..hits.len() {
        *counts.entry(hits[hi].1).or_default() += 1;
        while counts.len() == wanted.len() {
            let len = hits[hi].0 - hits[lo].0 + 1;
            best = Some(best.map_or(len, |b| b.min(len)));
            let c = counts.get_mut(hits[lo].1).unwrap();
            *c -= 1;
            if *c == 0 {
                counts.remove(hits[lo].1);
            }
            lo += 1;
        }
    }
    best
}

/// Proximity bonus `1 / (1 + w)` where `w` is the shortest window covering
/// every focus term present in the passage; zero when none is present.
pub fn proximity_bonus(tokens: &[(String, usize)], focus_terms: &[String]) -> f64 {
    let present: BTreeSet<&str> = focus_terms
        .iter()
        .map(String::as_str)
        .filter(|f| tokens.iter().any(|(t, _)| t == f))
        .collect();
    match min_cover_window(tokens, &present) {
        Some(w) => 1.0 / (1.0 + w as f64),
        None => 0.0,
    }
}

/// Score the passages of the given documents by passage-level BM25 plus the
/// proximity bonus. Passages with no query term are dropped. Ties go to
/// (doc_id, passage_index) order.
pub fn rank_passages(
    query: &Query,
    index: &Index,
    doc_ids: &[&str],
    analyzer: &Analyzer,
    params: Bm25Params,
    k: usize,
) -> Vec<ScoredPassage> {
    let allowed: BTreeSet<u32> = doc_ids
        .iter()
        .filter_map(|d| index.doc_ordinal(d))
        .flat_map(|o| index.docs[o].passages.iter().copied())
        .collect();
    if allowed.is_empty() {
        return Vec::new();
    }
    let terms = query.weighted_terms(analyzer);
    let acc = index
        .passage_postings
        .score(params, terms.iter().map(|(t, w)| (t.as_str(), *w)));
    let mut out: Vec<ScoredPassage> = acc
        .into_iter()
        .filter(|(u, _)| allowed.contains(u))
        .map(|(u, bm25)| {
            let proximity = proximity_bonus(&index.passage_tokens[u as usize], &query.focus_terms);
            let p = &index.passages[u as usize];
            ScoredPassage {
                ordinal: u,
                doc_id: p.doc_id.clone(),
                passage_index: p.passage_index,
                score: bm25 + proximity,
                proximity,
            }
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.ordinal.cmp(&b.ordinal)));
    out.truncate(k);
    out
}
