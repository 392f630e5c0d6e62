//! Text utilities shared by every stage of the pipeline: the canonical
//! tokenizer, title normalization, sentence splitting and a small sparse
//! TF-IDF vectorizer.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

const DEFAULT_STOPWORDS: &str = include_str!("stopwords.txt");

/// A token with its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Split `text` into lowercase alphanumeric runs, keeping byte offsets.
///
/// No filtering is applied; this is the raw token stream used for entity
/// matching and proximity computations.
pub fn raw_tokens(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            out.push(Token {
                text: text[s..i].to_lowercase(),
                start: s,
                end: i,
            });
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: text[s..].to_lowercase(),
            start: s,
            end: text.len(),
        });
    }
    out
}

/// Canonical title key: lowercase, non-alphanumeric characters stripped,
/// whitespace collapsed to single spaces.
pub fn normalize_title(title: &str) -> String {
    let mut out = String::with_capacity(title.len());
    let mut pending_space = false;
    for c in title.chars() {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
        } else if c.is_alphanumeric() {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.extend(c.to_lowercase());
        }
    }
    out
}

/// Byte spans of the sentences in `text`.
///
/// A boundary is terminal punctuation (`.`, `!`, `?`) followed by whitespace
/// and then an uppercase letter or a digit. Spans exclude surrounding
/// whitespace.
pub fn sentence_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut start: Option<usize> = None;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if start.is_none() && !c.is_whitespace() {
            start = Some(pos);
        }
        if matches!(c, '.' | '!' | '?') {
            let mut j = i + 1;
            while j < chars.len() && chars[j].1.is_whitespace() {
                j += 1;
            }
            if j > i + 1 && j < chars.len() {
                let next = chars[j].1;
                if next.is_uppercase() || next.is_ascii_digit() {
                    if let Some(s) = start.take() {
                        spans.push((s, pos + c.len_utf8()));
                    }
                    i = j;
                    continue;
                }
            }
        }
        i += 1;
    }
    if let Some(s) = start {
        let end = s + text[s..].trim_end().len();
        if end > s {
            spans.push((s, end));
        }
    }
    spans
}

/// The canonical analyzer: lowercase, split on non-alphanumeric, drop
/// stopwords and single-character tokens.
#[derive(Debug, Clone)]
pub struct Analyzer {
    stopwords: HashSet<String>,
}

impl Default for Analyzer {
    fn default() -> Self {
        static DEFAULT: OnceLock<HashSet<String>> = OnceLock::new();
        let stopwords = DEFAULT.get_or_init(|| parse_stopwords(DEFAULT_STOPWORDS)).clone();
        Self { stopwords }
    }
}

fn parse_stopwords(s: &str) -> HashSet<String> {
    s.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

impl Analyzer {
    pub fn with_stopwords<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            stopwords: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    /// Load a stopword list, one term per line.
    pub fn from_stopword_file(path: &Path) -> io::Result<Self> {
        Ok(Self {
            stopwords: parse_stopwords(&fs::read_to_string(path)?),
        })
    }

    pub fn is_stopword(&self, term: &str) -> bool {
        self.stopwords.contains(term)
    }

    fn keep(&self, term: &str) -> bool {
        term.chars().nth(1).is_some() && !self.stopwords.contains(term)
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        raw_tokens(text)
            .into_iter()
            .filter(|t| self.keep(&t.text))
            .map(|t| t.text)
            .collect()
    }

    /// Filtered tokens paired with their position in the raw token stream.
    pub fn tokenize_positions(&self, text: &str) -> Vec<(String, usize)> {
        raw_tokens(text)
            .into_iter()
            .enumerate()
            .filter(|(_, t)| self.keep(&t.text))
            .map(|(i, t)| (t.text, i))
            .collect()
    }
}

/// Sparse vector: `(dimension, value)` pairs sorted by dimension.
pub type SparseVec = Vec<(u32, f64)>;

pub fn sparse_dot(a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0;
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

pub fn dense_cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// TF-IDF vectorizer with smoothed idf `ln((1 + N) / (1 + df)) + 1`.
///
/// Vectors are L2-normalized over *all* query terms, including terms outside
/// the fitted vocabulary, so unknown words dilute similarity instead of being
/// silently ignored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TfIdf {
    vocab: BTreeMap<String, u32>,
    df: Vec<u32>,
    n_docs: usize,
}

impl TfIdf {
    pub fn fit<'a, I>(docs: I) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut df_by_term: BTreeMap<String, u32> = BTreeMap::new();
        let mut n_docs = 0;
        for doc in docs {
            n_docs += 1;
            let uniq: HashSet<&String> = doc.iter().collect();
            for t in uniq {
                *df_by_term.entry(t.clone()).or_default() += 1;
            }
        }
        let mut vocab = BTreeMap::new();
        let mut df = Vec::with_capacity(df_by_term.len());
        for (i, (term, count)) in df_by_term.into_iter().enumerate() {
            vocab.insert(term, i as u32);
            df.push(count);
        }
        Self { vocab, df, n_docs }
    }

    pub fn vocab_len(&self) -> usize {
        self.df.len()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn index_of(&self, term: &str) -> Option<u32> {
        self.vocab.get(term).copied()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, u32)> {
        self.vocab.iter().map(|(t, &i)| (t.as_str(), i))
    }

    pub fn idf_of_df(&self, df: u32) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
    }

    pub fn idf(&self, term: &str) -> f64 {
        let df = self.index_of(term).map(|i| self.df[i as usize]).unwrap_or(0);
        self.idf_of_df(df)
    }

    /// Raw (unnormalized) tf-idf weights keyed by term, in term order.
    pub fn weights(&self, tokens: &[String]) -> BTreeMap<String, f64> {
        let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
        for t in tokens {
            *tf.entry(t.as_str()).or_default() += 1;
        }
        tf.into_iter()
            .map(|(t, c)| (t.to_string(), c as f64 * self.idf(t)))
            .collect()
    }

    pub fn transform(&self, tokens: &[String]) -> SparseVec {
        let weights = self.weights(tokens);
        let norm = weights.values().map(|w| w * w).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Vec::new();
        }
        let mut v: SparseVec = weights
            .iter()
            .filter_map(|(t, w)| self.index_of(t).map(|i| (i, w / norm)))
            .collect();
        v.sort_by_key(|(i, _)| *i);
        v
    }
}
