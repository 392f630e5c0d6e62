use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::text::{sparse_dot, Analyzer, SparseVec, TfIdf};

pub const DEFAULT_FAQ_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaqEntry {
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaqMatch {
    pub question: String,
    pub answer: String,
    pub similarity: f64,
}

/// Curated question/answer pairs matched by TF-IDF cosine similarity.
#[derive(Debug, Clone, Default)]
pub struct FaqStore {
    entries: Vec<FaqEntry>,
    vectorizer: TfIdf,
    vectors: Vec<SparseVec>,
    analyzer: Analyzer,
}

impl FaqStore {
    pub fn new(entries: Vec<FaqEntry>, analyzer: Analyzer) -> Result<Self, SearchError> {
        if let Some(i) = entries.iter().position(|e| e.question.trim().is_empty()) {
            return Err(SearchError::InvalidArgument(format!("FAQ entry {i} has an empty question")));
        }
        let tokens: Vec<Vec<String>> = entries.iter().map(|e| analyzer.tokenize(&e.question)).collect();
        let vectorizer = TfIdf::fit(tokens.iter().map(Vec::as_slice));
        let vectors = tokens.iter().map(|t| vectorizer.transform(t)).collect();
        Ok(Self {
            entries,
            vectorizer,
            vectors,
            analyzer,
        })
    }

    /// Load a JSON array of `{"question", "answer"}` objects.
    pub fn load(path: &Path, analyzer: Analyzer) -> Result<Self, SearchError> {
        let content = fs::read_to_string(path).map_err(|e| SearchError::Io(path.display().to_string(), e))?;
        let entries: Vec<FaqEntry> =
            serde_json::from_str(&content).map_err(|e| SearchError::Parse(format!("{}: {e}", path.display())))?;
        Self::new(entries, analyzer)
    }

    pub fn entries(&self) -> &[FaqEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Most similar entry if its cosine similarity reaches `threshold`.
    /// Ties go to the earlier entry.
    pub fn match_query(&self, raw: &str, threshold: f64) -> Option<FaqMatch> {
        let q = self.vectorizer.transform(&self.analyzer.tokenize(raw));
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.vectors.iter().enumerate() {
            let s = sparse_dot(&q, v);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        let (i, s) = best?;
        (s >= threshold && s > 0.0).then(|| FaqMatch {
            question: self.entries[i].question.clone(),
            answer: self.entries[i].answer.clone(),
            similarity: s,
        })
    }
}
