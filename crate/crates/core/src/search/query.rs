use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::ckg::{KnowledgeGraph, NodeId, NodeKind, Relation};
use crate::medner::{normalize_surface, EntityCategory, Gazetteer};
use crate::text::{raw_tokens, Analyzer};

pub const CO_CANONICAL_WEIGHT: f64 = 0.5;
pub const GRAPH_NEIGHBOR_WEIGHT: f64 = 0.25;
pub const GRAPH_NEIGHBORS_PER_ENTITY: usize = 3;

const INTERROGATIVES: [&str; 11] = [
    "what", "when", "which", "who", "how", "why", "is", "are", "do", "does", "can",
];

const TEMPORAL_CUES: [&str; 8] = [
    "period", "duration", "time", "date", "day", "days", "interval", "long",
];

const CATEGORY_CUES: [(&str, EntityCategory); 22] = [
    ("medication", EntityCategory::Medication),
    ("medications", EntityCategory::Medication),
    ("drug", EntityCategory::Medication),
    ("drugs", EntityCategory::Medication),
    ("antiviral", EntityCategory::Medication),
    ("antivirals", EntityCategory::Medication),
    ("medicine", EntityCategory::Medication),
    ("medicines", EntityCategory::Medication),
    ("symptom", EntityCategory::MedicalCondition),
    ("symptoms", EntityCategory::MedicalCondition),
    ("disease", EntityCategory::MedicalCondition),
    ("diseases", EntityCategory::MedicalCondition),
    ("condition", EntityCategory::MedicalCondition),
    ("conditions", EntityCategory::MedicalCondition),
    ("comorbidities", EntityCategory::MedicalCondition),
    ("organ", EntityCategory::Anatomy),
    ("organs", EntityCategory::Anatomy),
    ("tissues", EntityCategory::Anatomy),
    ("test", EntityCategory::TestTreatmentProcedure),
    ("tests", EntityCategory::TestTreatmentProcedure),
    ("procedures", EntityCategory::TestTreatmentProcedure),
    ("therapies", EntityCategory::TestTreatmentProcedure),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    Keyword,
    NaturalLanguage,
}

impl FromStr for QueryMode {
    type Err = SearchError;

    fn from_str(s: &str) -> Result<Self, SearchError> {
        match s {
            "kw" | "keyword" => Ok(QueryMode::Keyword),
            "nl" | "natural_language" => Ok(QueryMode::NaturalLanguage),
            other => Err(SearchError::InvalidArgument(format!("unknown query mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerType {
    Temporal,
    Quantity,
    EntityCategory(EntityCategory),
    Definition,
    None,
}

impl fmt::Display for AnswerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnswerType::Temporal => f.write_str("temporal"),
            AnswerType::Quantity => f.write_str("quantity"),
            AnswerType::EntityCategory(c) => write!(f, "entity_category({c})"),
            AnswerType::Definition => f.write_str("definition"),
            AnswerType::None => f.write_str("none"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionTerm {
    pub term: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub raw: String,
    pub mode: QueryMode,
    pub focus_terms: Vec<String>,
    pub expansion_terms: Vec<ExpansionTerm>,
    pub answer_type: AnswerType,
    pub topic_filter: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub mode: QueryMode,
    pub answer_type: AnswerType,
    pub focus_terms: Vec<String>,
}

/// Detect the query mode and expected answer type, and pull out focus terms.
///
/// For `which`/`what` questions the expected entity category comes from a
/// small cue lexicon (`medications`, `symptoms`, ...). Temporal cues and the
/// `what is` definition form come next, and the gazetteer category of one of
/// the first two content words is the last resort.
pub fn classify_query(raw: &str, gazetteer: Option<&Gazetteer>, analyzer: &Analyzer) -> Result<Classification, SearchError> {
    let trimmed = raw.trim();
    let toks: Vec<String> = raw_tokens(trimmed).into_iter().map(|t| t.text).collect();
    if toks.is_empty() {
        return Err(SearchError::EmptyQuery);
    }
    let first = toks[0].as_str();
    let second = toks.get(1).map(String::as_str).unwrap_or("");
    let mode = if INTERROGATIVES.contains(&first) || trimmed.ends_with('?') {
        QueryMode::NaturalLanguage
    } else {
        QueryMode::Keyword
    };

    let content: Vec<&str> = toks
        .iter()
        .skip(1)
        .map(String::as_str)
        .filter(|t| !analyzer.is_stopword(t))
        .collect();
    let lexicon_cue = content
        .iter()
        .take(2)
        .find_map(|t| CATEGORY_CUES.iter().find(|(cue, _)| cue == t).map(|(_, c)| *c));
    let gazetteer_cue = || {
        let g = gazetteer?;
        content.iter().take(2).find_map(|t| g.lookup(t)).map(|e| e.category)
    };
    let answer_type = match (first, second) {
        ("when", _) => AnswerType::Temporal,
        ("how", "long") => AnswerType::Temporal,
        ("how", "many" | "much") => AnswerType::Quantity,
        ("what" | "which", _) => {
            if let Some(c) = lexicon_cue {
                AnswerType::EntityCategory(c)
            } else if toks.iter().any(|t| TEMPORAL_CUES.contains(&t.as_str())) {
                AnswerType::Temporal
            } else if matches!(second, "is" | "are") {
                AnswerType::Definition
            } else if let Some(c) = gazetteer_cue() {
                AnswerType::EntityCategory(c)
            } else {
                AnswerType::None
            }
        }
        _ => AnswerType::None,
    };

    let mut focus_terms: Vec<String> = analyzer
        .tokenize(trimmed)
        .into_iter()
        .filter(|t| !INTERROGATIVES.contains(&t.as_str()))
        .collect();
    if focus_terms.is_empty() {
        focus_terms = toks.iter().filter(|t| !INTERROGATIVES.contains(&t.as_str())).cloned().collect();
    }
    if focus_terms.is_empty() {
        focus_terms = toks;
    }
    let mut seen = BTreeSet::new();
    focus_terms.retain(|t| seen.insert(t.clone()));
    Ok(Classification {
        mode,
        answer_type,
        focus_terms,
    })
}

impl Query {
    pub fn parse(
        raw: &str,
        forced_mode: Option<QueryMode>,
        topic_filter: BTreeSet<String>,
        gazetteer: Option<&Gazetteer>,
        analyzer: &Analyzer,
    ) -> Result<Self, SearchError> {
        let c = classify_query(raw, gazetteer, analyzer)?;
        let mode = forced_mode.unwrap_or(c.mode);
        let answer_type = if mode == QueryMode::Keyword { AnswerType::None } else { c.answer_type };
        Ok(Self {
            raw: raw.trim().to_string(),
            mode,
            focus_terms: c.focus_terms,
            expansion_terms: Vec::new(),
            answer_type,
            topic_filter,
        })
    }

    /// Query terms with their weights: focus terms at 1.0, expansion phrases
    /// tokenized with each token taking the phrase weight. A term keeps its
    /// largest weight. Sorted by term.
    pub fn weighted_terms(&self, analyzer: &Analyzer) -> Vec<(String, f64)> {
        let mut out: BTreeMap<String, f64> = BTreeMap::new();
        for t in &self.focus_terms {
            out.insert(t.clone(), 1.0);
        }
        for e in &self.expansion_terms {
            for t in analyzer.tokenize(&e.term) {
                let w = out.entry(t).or_insert(0.0);
                *w = w.max(e.weight);
            }
        }
        out.into_iter().collect()
    }
}

/// Add entity-driven expansion terms: co-canonical surface forms from the
/// gazetteer, and labels of entities co-mentioned with the query entity in the
/// knowledge graph (up to three per entity, most shared articles first).
pub fn expand_query(query: &mut Query, gazetteer: &Gazetteer, graph: Option<&KnowledgeGraph>) {
    let mut terms: BTreeMap<String, f64> = BTreeMap::new();
    let focus: BTreeSet<&str> = query.focus_terms.iter().map(String::as_str).collect();
    let mut add = |term: &str, weight: f64| {
        if term.is_empty() || focus.contains(term) {
            return;
        }
        let w = terms.entry(term.to_string()).or_insert(0.0);
        *w = w.max(weight);
    };
    for m in gazetteer.extract(&query.raw) {
        let matched = normalize_surface(&m.text);
        for s in gazetteer.surface_forms(&m.canonical_id) {
            if *s != matched {
                add(s, CO_CANONICAL_WEIGHT);
            }
        }
        let Some(graph) = graph else { continue };
        let entity = NodeId::new(NodeKind::MedicalEntity, m.canonical_id.clone());
        let mut shared: BTreeMap<&NodeId, usize> = BTreeMap::new();
        for article in graph.incoming(&entity, Relation::Mentions) {
            for other in graph.outgoing(article, Relation::Mentions) {
                if *other != entity {
                    *shared.entry(other).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(&str, usize)> = shared
            .into_iter()
            .filter_map(|(n, c)| graph.label(n).map(|l| (l, c)))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let mut taken = BTreeSet::new();
        for (label, _) in ranked {
            if taken.len() == GRAPH_NEIGHBORS_PER_ENTITY {
                break;
            }
            if taken.insert(label) {
                add(label, GRAPH_NEIGHBOR_WEIGHT);
            }
        }
    }
    query.expansion_terms = terms
        .into_iter()
        .map(|(term, weight)| ExpansionTerm { term, weight })
        .collect();
}
