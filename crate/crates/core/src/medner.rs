//! Dictionary-based biomedical entity recognition.
//!
//! A [`Gazetteer`] maps normalized surface forms to canonical entities in
//! one of five categories. Extraction is greedy longest-match over token
//! n-grams within a sentence, with a left-context negation cue window.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{raw_tokens, sentence_spans};

pub const DEFAULT_NEGATION_WINDOW: usize = 3;
pub const NEGATION_CUES: [&str; 4] = ["no", "not", "without", "denies"];

#[derive(Debug, Error)]
pub enum NerError {
    #[error("reading gazetteer {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("gazetteer line {line}: unknown category `{label}`")]
    UnknownCategory { line: usize, label: String },
    #[error("gazetteer line {line}: unknown trait `{label}`")]
    UnknownTrait { line: usize, label: String },
    #[error("gazetteer line {line}: expected at least 3 tab-separated columns")]
    MalformedRow { line: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityCategory {
    Anatomy,
    MedicalCondition,
    Medication,
    ProtectedHealthInformation,
    TestTreatmentProcedure,
}

impl EntityCategory {
    pub const ALL: [EntityCategory; 5] = [
        EntityCategory::Anatomy,
        EntityCategory::MedicalCondition,
        EntityCategory::Medication,
        EntityCategory::ProtectedHealthInformation,
        EntityCategory::TestTreatmentProcedure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityCategory::Anatomy => "Anatomy",
            EntityCategory::MedicalCondition => "MedicalCondition",
            EntityCategory::Medication => "Medication",
            EntityCategory::ProtectedHealthInformation => "ProtectedHealthInformation",
            EntityCategory::TestTreatmentProcedure => "TestTreatmentProcedure",
        }
    }
}

fn squash(label: &str) -> String {
    label
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

impl FromStr for EntityCategory {
    type Err = ();

    /// Accepts `MedicalCondition`, `Medical Condition`, `MEDICAL_CONDITION`
    /// and `Test, Treatment, & Procedure` style spellings.
    fn from_str(s: &str) -> Result<Self, ()> {
        let key = squash(s);
        Self::ALL
            .into_iter()
            .find(|c| squash(c.as_str()) == key)
            .ok_or(())
    }
}

impl fmt::Display for EntityCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityTrait {
    Negation,
    Diagnosis,
    Sign,
    Symptom,
}

impl FromStr for EntityTrait {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match squash(s).as_str() {
            "negation" => Ok(EntityTrait::Negation),
            "diagnosis" => Ok(EntityTrait::Diagnosis),
            "sign" => Ok(EntityTrait::Sign),
            "symptom" => Ok(EntityTrait::Symptom),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GazetteerEntry {
    pub canonical_id: String,
    pub category: EntityCategory,
    pub traits: BTreeSet<EntityTrait>,
}

#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: HashMap<String, GazetteerEntry>,
    /// Surface forms per canonical id, in file order.
    surfaces: BTreeMap<String, Vec<String>>,
    max_ngram: usize,
}

/// Lowercase token sequence joined by single spaces.
pub fn normalize_surface(s: &str) -> String {
    raw_tokens(s)
        .into_iter()
        .map(|t| t.text)
        .collect::<Vec<_>>()
        .join(" ")
}

impl Gazetteer {
    pub fn max_ngram(&self) -> usize {
        self.max_ngram
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, surface: &str) -> Option<&GazetteerEntry> {
        self.entries.get(&normalize_surface(surface))
    }

    /// Every normalized surface form that maps to `canonical_id`.
    pub fn surface_forms(&self, canonical_id: &str) -> &[String] {
        self.surfaces.get(canonical_id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Add an entry. The first registration of a surface form wins.
    pub fn insert(&mut self, surface: &str, entry: GazetteerEntry) -> bool {
        let key = normalize_surface(surface);
        if key.is_empty() || self.entries.contains_key(&key) {
            return false;
        }
        self.max_ngram = self.max_ngram.max(key.split(' ').count());
        self.surfaces
            .entry(entry.canonical_id.clone())
            .or_default()
            .push(key.clone());
        self.entries.insert(key, entry);
        true
    }

    /// Parse TSV rows `surface \t canonical_id \t category [\t traits]`.
    /// Blank lines and `#` comments are ignored.
    pub fn from_tsv(content: &str) -> Result<Self, NerError> {
        let mut gaz = Gazetteer::default();
        for (i, line) in content.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 3 {
                return Err(NerError::MalformedRow { line: line_no });
            }
            let category = cols[2].parse().map_err(|_| NerError::UnknownCategory {
                line: line_no,
                label: cols[2].to_string(),
            })?;
            let mut traits = BTreeSet::new();
            if let Some(t) = cols.get(3) {
                for label in t.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    traits.insert(label.parse().map_err(|_| NerError::UnknownTrait {
                        line: line_no,
                        label: label.to_string(),
                    })?);
                }
            }
            let entry = GazetteerEntry {
                canonical_id: cols[1].trim().to_string(),
                category,
                traits,
            };
            if !gaz.insert(cols[0], entry) {
                log::warn!("gazetteer line {line_no}: duplicate or empty surface form ignored");
            }
        }
        Ok(gaz)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (canonical, surfaces) in &self.surfaces {
            for s in surfaces {
                let e = &self.entries[s];
                let traits: Vec<String> = e.traits.iter().map(|t| format!("{t:?}")).collect();
                out.push_str(&format!("{s}\t{canonical}\t{}\t{}\n", e.category, traits.join(",")));
            }
        }
        out
    }

    pub fn extract(&self, text: &str) -> Vec<EntityMention> {
        extract_entities_with(text, self, DEFAULT_NEGATION_WINDOW)
    }
}

pub fn load_gazetteer(path: &Path) -> Result<Gazetteer, NerError> {
    let content = fs::read_to_string(path).map_err(|source| NerError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Gazetteer::from_tsv(&content)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityMention {
    pub text: String,
    pub canonical_id: String,
    pub category: EntityCategory,
    pub traits: BTreeSet<EntityTrait>,
    pub char_start: usize,
    pub char_end: usize,
    pub score: f64,
}

pub fn extract_entities(text: &str, gaz: &Gazetteer) -> Vec<EntityMention> {
    extract_entities_with(text, gaz, DEFAULT_NEGATION_WINDOW)
}

/// Greedy longest-match extraction. Matches never cross a sentence
/// boundary; the negation cue must sit within `negation_window` tokens to the
/// left of the match inside the same sentence.
pub fn extract_entities_with(text: &str, gaz: &Gazetteer, negation_window: usize) -> Vec<EntityMention> {
    let mut out = Vec::new();
    if gaz.is_empty() {
        return out;
    }
    for (s_start, s_end) in sentence_spans(text) {
        let sentence = &text[s_start..s_end];
        let toks = raw_tokens(sentence);
        let mut i = 0;
        while i < toks.len() {
            let longest = gaz.max_ngram.min(toks.len() - i);
            let hit = (1..=longest).rev().find_map(|n| {
                let key = toks[i..i + n]
                    .iter()
                    .map(|t| t.text.as_str())
                    .collect::<Vec<_>>()
                    .join(" ");
                gaz.entries.get(&key).map(|e| (n, e))
            });
            let Some((n, entry)) = hit else {
                i += 1;
                continue;
            };
            let mut traits: BTreeSet<EntityTrait> = entry
                .traits
                .iter()
                .copied()
                .filter(|t| *t != EntityTrait::Negation)
                .collect();
            let left = i.saturating_sub(negation_window);
            if toks[left..i].iter().any(|t| NEGATION_CUES.contains(&t.text.as_str())) {
                traits.insert(EntityTrait::Negation);
            }
            let start = s_start + toks[i].start;
            let end = s_start + toks[i + n - 1].end;
            out.push(EntityMention {
                text: text[start..end].to_string(),
                canonical_id: entry.canonical_id.clone(),
                category: entry.category,
                traits,
                char_start: start,
                char_end: end,
                score: 1.0,
            });
            i += n;
        }
    }
    out
}
