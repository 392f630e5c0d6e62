use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{Article, Passage};
use crate::medner::EntityMention;
use crate::text::Analyzer;

/// Title tokens are counted this many times in document statistics.
pub const TITLE_WEIGHT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

/// `ln(1 + (N − df + 0.5) / (df + 0.5))`, positive for every df ≤ N.
pub fn bm25_idf(n: usize, df: usize) -> f64 {
    (1.0 + (n as f64 - df as f64 + 0.5) / (df as f64 + 0.5)).ln()
}

pub fn bm25_term(params: Bm25Params, idf: f64, tf: u32, len: u32, avg_len: f64) -> f64 {
    let tf = tf as f64;
    let norm = if avg_len > 0.0 { len as f64 / avg_len } else { 0.0 };
    idf * tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    /// Ordinal into the owning [`Postings`] unit list.
    pub unit: u32,
    pub tf: u32,
}

/// An inverted index over a list of retrieval units (documents or passages).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Postings {
    pub postings: HashMap<String, Vec<Posting>>,
    pub lengths: Vec<u32>,
    pub avg_length: f64,
}

impl Postings {
    fn build(units: &[Vec<String>]) -> Self {
        let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
        for (u, tokens) in units.iter().enumerate() {
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, c) in tf {
                postings.entry(term.to_string()).or_default().push(Posting { unit: u as u32, tf: c });
            }
        }
        let lengths: Vec<u32> = units.iter().map(|t| t.len() as u32).collect();
        let avg_length = if lengths.is_empty() {
            0.0
        } else {
            lengths.iter().map(|&l| l as f64).sum::<f64>() / lengths.len() as f64
        };
        Self {
            postings,
            lengths,
            avg_length,
        }
    }

    pub fn n(&self) -> usize {
        self.lengths.len()
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// Weighted BM25 accumulation, term-at-a-time in the order given.
    /// Units without any matching term are absent from the result.
    pub fn score<'a, I>(&self, params: Bm25Params, terms: I) -> HashMap<u32, f64>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut acc: HashMap<u32, f64> = HashMap::new();
        let n = self.n();
        for (term, weight) in terms {
            let Some(list) = self.postings.get(term) else { continue };
            let idf = bm25_idf(n, list.len());
            for p in list {
                let s = bm25_term(params, idf, p.tf, self.lengths[p.unit as usize], self.avg_length);
                *acc.entry(p.unit).or_insert(0.0) += weight * s;
            }
        }
        acc
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexedDoc {
    pub doc_id: String,
    pub title: String,
    pub topics: BTreeSet<String>,
    pub entities: BTreeSet<String>,
    /// Passage ordinals belonging to this document.
    pub passages: Vec<u32>,
}

/// Document- and passage-level inverted indexes plus per-document topic and
/// entity enrichments. Document ordinals follow doc_id order.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Index {
    pub docs: Vec<IndexedDoc>,
    pub doc_postings: Postings,
    pub passages: Vec<Passage>,
    pub passage_postings: Postings,
    /// Filtered tokens of each passage with their raw-token positions.
    pub passage_tokens: Vec<Vec<(String, usize)>>,
}

/// Tokens of an article for document-level statistics: title repeated
/// [`TITLE_WEIGHT`] times, then abstract and body.
pub fn document_tokens(article: &Article, analyzer: &Analyzer) -> Vec<String> {
    let title = analyzer.tokenize(&article.title);
    let mut out = Vec::new();
    for _ in 0..TITLE_WEIGHT {
        out.extend(title.iter().cloned());
    }
    out.extend(analyzer.tokenize(&article.abstract_text));
    out.extend(analyzer.tokenize(&article.body));
    out
}

pub fn build_index(
    articles: &[Article],
    passages: &[Passage],
    mentions: &BTreeMap<String, Vec<EntityMention>>,
    doc_topic_labels: &BTreeMap<String, BTreeSet<String>>,
    analyzer: &Analyzer,
) -> Index {
    let mut sorted: Vec<&Article> = articles.iter().collect();
    sorted.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    let ordinal: BTreeMap<&str, usize> = sorted.iter().enumerate().map(|(i, a)| (a.doc_id.as_str(), i)).collect();

    let mut docs: Vec<IndexedDoc> = sorted
        .iter()
        .map(|a| IndexedDoc {
            doc_id: a.doc_id.clone(),
            title: a.title.clone(),
            topics: doc_topic_labels.get(&a.doc_id).cloned().unwrap_or_default(),
            entities: mentions
                .get(&a.doc_id)
                .map(|ms| ms.iter().map(|m| m.canonical_id.clone()).collect())
                .unwrap_or_default(),
            passages: Vec::new(),
        })
        .collect();
    let doc_tokens: Vec<Vec<String>> = sorted.iter().map(|a| document_tokens(a, analyzer)).collect();

    let mut kept: Vec<Passage> = passages
        .iter()
        .filter(|p| ordinal.contains_key(p.doc_id.as_str()))
        .cloned()
        .collect();
    kept.sort_by(|a, b| a.doc_id.cmp(&b.doc_id).then(a.passage_index.cmp(&b.passage_index)));
    for (i, p) in kept.iter().enumerate() {
        docs[ordinal[p.doc_id.as_str()]].passages.push(i as u32);
    }
    let passage_tokens: Vec<Vec<(String, usize)>> =
        kept.iter().map(|p| analyzer.tokenize_positions(&p.text)).collect();
    let passage_terms: Vec<Vec<String>> = passage_tokens
        .iter()
        .map(|ts| ts.iter().map(|(t, _)| t.clone()).collect())
        .collect();

    Index {
        docs,
        doc_postings: Postings::build(&doc_tokens),
        passage_postings: Postings::build(&passage_terms),
        passages: kept,
        passage_tokens,
    }
}

impl Index {
    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn doc_ordinal(&self, doc_id: &str) -> Option<usize> {
        self.docs.binary_search_by(|d| d.doc_id.as_str().cmp(doc_id)).ok()
    }

    pub fn doc_length(&self, doc_id: &str) -> Option<u32> {
        self.doc_ordinal(doc_id).map(|i| self.doc_postings.lengths[i])
    }

    /// Postings of `term` as (doc_id, tf), in doc_id order.
    pub fn doc_postings_of(&self, term: &str) -> Vec<(&str, u32)> {
        self.doc_postings
            .postings
            .get(term)
            .map(|ps| {
                ps.iter()
                    .map(|p| (self.docs[p.unit as usize].doc_id.as_str(), p.tf))
                    .collect()
            })
            .unwrap_or_default()
    }
}
