use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;

fn read(path: &Path) -> Result<String, EvalError> {
    fs::read_to_string(path).map_err(|e| EvalError::Io(path.display().to_string(), e))
}

/// Graded relevance judgements, topic → doc → grade.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qrels {
    pub judgements: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    /// Record a judgement; a pair judged twice keeps the larger grade.
    pub fn insert(&mut self, topic: &str, doc: &str, grade: u32) {
        let g = self
            .judgements
            .entry(topic.to_string())
            .or_default()
            .entry(doc.to_string())
            .or_insert(grade);
        *g = (*g).max(grade);
    }

    pub fn grade(&self, topic: &str, doc: &str) -> u32 {
        self.judgements.get(topic).and_then(|d| d.get(doc)).copied().unwrap_or(0)
    }

    pub fn topic(&self, topic: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgements.get(topic)
    }

    /// Number of docs with grade ≥ 1 for `topic`.
    pub fn relevant_count(&self, topic: &str) -> usize {
        self.topic(topic).map_or(0, |d| d.values().filter(|&&g| g >= 1).count())
    }

    pub fn len(&self) -> usize {
        self.judgements.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parse `topic_id iteration doc_id grade` lines. Blank lines and `#`
    /// comments are skipped.
    pub fn parse(content: &str) -> Result<Self, EvalError> {
        let mut q = Qrels::default();
        for (n, line) in content.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(EvalError::parse(n + 1, format!("expected 4 fields, found {}", f.len())));
            }
            let grade: i64 = f[3]
                .parse()
                .map_err(|_| EvalError::parse(n + 1, format!("bad grade `{}`", f[3])))?;
            if grade < 0 {
                return Err(EvalError::parse(n + 1, format!("negative grade {grade}")));
            }
            q.insert(f[0], f[2], grade as u32);
        }
        Ok(q)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        Self::parse(&read(path)?)
    }

    pub fn to_trec(&self) -> String {
        let mut out = String::new();
        for (t, docs) in &self.judgements {
            for (d, g) in docs {
                let _ = writeln!(out, "{t} 0 {d} {g}");
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub doc_id: String,
    pub score: f64,
    pub rank: usize,
}

/// A ranked run: per topic, results in rank order with dense ranks from 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunFile {
    pub tag: String,
    pub topics: BTreeMap<String, Vec<RunEntry>>,
}

impl RunFile {
    /// Build from scored lists. Entries are ordered by score descending,
    /// then doc_id, and ranked densely. Duplicate docs are rejected.
    pub fn from_scored(tag: &str, lists: BTreeMap<String, Vec<(String, f64)>>) -> Result<Self, EvalError> {
        let mut topics = BTreeMap::new();
        for (topic, mut list) in lists {
            let mut seen = BTreeSet::new();
            if let Some((d, _)) = list.iter().find(|(d, _)| !seen.insert(d.clone())) {
                return Err(EvalError::InvalidRun(format!("topic {topic}: duplicate doc {d}")));
            }
            list.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            let entries = list
                .into_iter()
                .enumerate()
                .map(|(i, (doc_id, score))| RunEntry {
                    doc_id,
                    score,
                    rank: i + 1,
                })
                .collect();
            topics.insert(topic, entries);
        }
        Ok(Self {
            tag: tag.to_string(),
            topics,
        })
    }

    /// Build from already ranked doc lists; scores descend from the list
    /// length so that they stay consistent with rank.
    pub fn from_ranked(tag: &str, lists: BTreeMap<String, Vec<String>>) -> Result<Self, EvalError> {
        let scored = lists
            .into_iter()
            .map(|(t, docs)| {
                let n = docs.len();
                (t, docs.into_iter().enumerate().map(|(i, d)| (d, (n - i) as f64)).collect())
            })
            .collect();
        Self::from_scored(tag, scored)
    }

    /// Parse `topic_id Q0 doc_id rank score tag` lines. Entries are ordered
    /// by the rank column and re-ranked densely; duplicate docs and scores
    /// that increase with rank are rejected.
    pub fn parse(content: &str) -> Result<Self, EvalError> {
        let mut raw: BTreeMap<String, Vec<(usize, String, f64, usize)>> = BTreeMap::new();
        let mut tag = String::new();
        for (n, line) in content.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 {
                return Err(EvalError::parse(n + 1, format!("expected 6 fields, found {}", f.len())));
            }
            let rank: usize = f[3]
                .parse()
                .map_err(|_| EvalError::parse(n + 1, format!("bad rank `{}`", f[3])))?;
            let score: f64 = f[4]
                .parse()
                .ok()
                .filter(|s: &f64| s.is_finite())
                .ok_or_else(|| EvalError::parse(n + 1, format!("bad score `{}`", f[4])))?;
            if tag.is_empty() {
                tag = f[5].to_string();
            }
            raw.entry(f[0].to_string()).or_default().push((rank, f[2].to_string(), score, n + 1));
        }
        let mut topics = BTreeMap::new();
        for (topic, mut rows) in raw {
            rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.3.cmp(&b.3)));
            let mut seen = BTreeSet::new();
            let mut entries: Vec<RunEntry> = Vec::with_capacity(rows.len());
            for (i, (_, doc_id, score, line)) in rows.into_iter().enumerate() {
                if !seen.insert(doc_id.clone()) {
                    return Err(EvalError::InvalidRun(format!("line {line}: topic {topic} repeats doc {doc_id}")));
                }
                if let Some(prev) = entries.last() {
                    if score > prev.score {
                        return Err(EvalError::InvalidRun(format!(
                            "line {line}: topic {topic} score increases with rank"
                        )));
                    }
                }
                entries.push(RunEntry {
                    doc_id,
                    score,
                    rank: i + 1,
                });
            }
            topics.insert(topic, entries);
        }
        Ok(Self { tag, topics })
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        Self::parse(&read(path)?)
    }

    pub fn to_trec(&self) -> String {
        let tag = if self.tag.is_empty() { "run" } else { &self.tag };
        let mut out = String::new();
        for (t, entries) in &self.topics {
            for e in entries {
                let _ = writeln!(out, "{t} Q0 {} {} {} {tag}", e.doc_id, e.rank, e.score);
            }
        }
        out
    }

    /// Doc ids of the first `k` results for `topic`.
    pub fn top_k(&self, topic: &str, k: usize) -> Vec<&str> {
        self.topics
            .get(topic)
            .map(|es| es.iter().take(k).map(|e| e.doc_id.as_str()).collect())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub topic_id: String,
    /// Keyword query (KQ).
    pub keyword_query: String,
    /// Natural language question (NQ).
    pub natural_question: String,
    #[serde(default)]
    pub narrative: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicSet {
    pub topics: Vec<Topic>,
}

#[derive(Deserialize)]
struct JsonTopic {
    #[serde(alias = "number", alias = "id")]
    topic_id: serde_json::Value,
    #[serde(alias = "query", alias = "kq")]
    keyword_query: String,
    #[serde(alias = "question", alias = "nq")]
    natural_question: String,
    #[serde(default)]
    narrative: String,
}

impl TopicSet {
    fn new(topics: Vec<Topic>) -> Result<Self, EvalError> {
        let mut seen = BTreeSet::new();
        for t in &topics {
            if !seen.insert(t.topic_id.as_str()) {
                return Err(EvalError::InvalidArgument(format!("duplicate topic id {}", t.topic_id)));
            }
        }
        Ok(Self { topics })
    }

    /// JSON array of objects with `topic_id` (or `number`), `query`,
    /// `question` and optional `narrative`.
    pub fn from_json(content: &str) -> Result<Self, EvalError> {
        let raw: Vec<JsonTopic> = serde_json::from_str(content).map_err(|e| EvalError::parse(0, e.to_string()))?;
        let topics = raw
            .into_iter()
            .map(|t| Topic {
                topic_id: match t.topic_id {
                    serde_json::Value::String(s) => s,
                    other => other.to_string(),
                },
                keyword_query: t.keyword_query,
                natural_question: t.natural_question,
                narrative: t.narrative,
            })
            .collect();
        Self::new(topics)
    }

    /// TREC topic XML: `<topic number="1"><query/><question/><narrative/></topic>`.
    pub fn from_xml(content: &str) -> Result<Self, EvalError> {
        let doc = roxmltree::Document::parse(content).map_err(|e| EvalError::parse(0, e.to_string()))?;
        let mut topics = Vec::new();
        for node in doc.descendants().filter(|n| n.has_tag_name("topic")) {
            let Some(id) = node.attribute("number").or_else(|| node.attribute("id")) else {
                return Err(EvalError::parse(0, "topic without a number attribute".into()));
            };
            let field = |name: &str| {
                node.children()
                    .find(|c| c.has_tag_name(name))
                    .and_then(|c| c.text())
                    .map(|t| t.trim().to_string())
                    .unwrap_or_default()
            };
            topics.push(Topic {
                topic_id: id.to_string(),
                keyword_query: field("query"),
                natural_question: field("question"),
                narrative: field("narrative"),
            });
        }
        Self::new(topics)
    }

    /// Load by extension: `.xml` as topic XML, anything else as JSON.
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let content = read(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml")) {
            Self::from_xml(&content)
        } else {
            Self::from_json(&content)
        }
    }
}
