//! Corpus ingestion: CSV metadata plus per-document JSON full text,
//! title-based deduplication, passage segmentation and cross-release id
//! mapping.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{normalize_title, sentence_spans};

pub const DEFAULT_WINDOW: usize = 3;
pub const DEFAULT_STRIDE: usize = 2;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("metadata csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("metadata header is missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("invalid segmentation parameters: window={window}, stride={stride}")]
    InvalidSegmentation { window: usize, stride: usize },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub doc_id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub body: String,
    pub authors: Vec<String>,
    pub institutions: Vec<String>,
    pub cited_doc_ids: Vec<String>,
    pub publish_date: Option<String>,
    pub source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Section {
    Title,
    Abstract,
    Body,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub doc_id: String,
    pub passage_index: usize,
    pub section: Section,
    pub text: String,
    /// Byte offsets into the source section.
    pub char_start: usize,
    pub char_end: usize,
}

impl Article {
    pub fn section_text(&self, section: Section) -> &str {
        match section {
            Section::Title => &self.title,
            Section::Abstract => &self.abstract_text,
            Section::Body => &self.body,
        }
    }

    /// Title, abstract and body joined by newlines.
    pub fn full_text(&self) -> String {
        let mut s = String::with_capacity(self.title.len() + self.abstract_text.len() + self.body.len() + 2);
        s.push_str(&self.title);
        s.push('\n');
        s.push_str(&self.abstract_text);
        s.push('\n');
        s.push_str(&self.body);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub release_tag: String,
    pub doc_count: usize,
    pub title_index: BTreeMap<String, String>,
}

impl CorpusManifest {
    pub fn from_articles(release_tag: &str, articles: &[Article]) -> Self {
        let mut title_index = BTreeMap::new();
        for a in articles {
            title_index
                .entry(normalize_title(&a.title))
                .and_modify(|d: &mut String| {
                    if a.doc_id < *d {
                        *d = a.doc_id.clone();
                    }
                })
                .or_insert_with(|| a.doc_id.clone());
        }
        let doc_count = articles.iter().map(|a| &a.doc_id).collect::<BTreeSet<_>>().len();
        Self {
            release_tag: release_tag.to_string(),
            doc_count,
            title_index,
        }
    }

    /// Inverse of the title index: doc_id → normalized title.
    pub fn doc_titles(&self) -> BTreeMap<String, String> {
        self.title_index
            .iter()
            .map(|(t, d)| (d.clone(), t.clone()))
            .collect()
    }

    pub fn contains_doc(&self, doc_id: &str) -> bool {
        self.title_index.values().any(|d| d == doc_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedDuplicate {
    pub doc_id: String,
    pub duplicate_of: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub retained: usize,
    pub dropped_duplicates: Vec<DroppedDuplicate>,
    pub skipped_rows: usize,
}

#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub articles: Vec<Article>,
    pub manifest: CorpusManifest,
    pub report: IngestReport,
}

#[derive(Deserialize)]
struct FullTextFile {
    doc_id: String,
    body_text: Vec<FullTextParagraph>,
}

#[derive(Serialize, Deserialize)]
struct FullTextParagraph {
    text: String,
}

struct Columns {
    doc_id: usize,
    title: usize,
    abstract_text: usize,
    authors: usize,
    publish_date: usize,
    institutions: Option<usize>,
    cited: Option<usize>,
    source: Option<usize>,
}

impl Columns {
    fn from_header(header: &csv::StringRecord) -> Result<Self, CorpusError> {
        let find = |names: &[&str]| {
            header
                .iter()
                .position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
        };
        let need = |names: &[&'static str]| find(names).ok_or(CorpusError::MissingColumn(names[0]));
        Ok(Self {
            doc_id: need(&["doc_id", "cord_uid"])?,
            title: need(&["title"])?,
            abstract_text: need(&["abstract"])?,
            authors: need(&["authors"])?,
            publish_date: need(&["publish_date", "publish_time"])?,
            institutions: find(&["institutions"]),
            cited: find(&["cited_doc_ids", "citations"]),
            source: find(&["source", "source_x"]),
        })
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(';')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(str::to_string)
        .collect()
}

fn valid_date(s: &str) -> bool {
    match s.len() {
        4 => s.chars().all(|c| c.is_ascii_digit()),
        7 => NaiveDate::parse_from_str(&format!("{s}-01"), "%Y-%m-%d").is_ok(),
        10 => NaiveDate::parse_from_str(s, "%Y-%m-%d").is_ok(),
        _ => false,
    }
}

fn parse_row(record: &csv::StringRecord, cols: &Columns) -> Option<Article> {
    let get = |i: usize| record.get(i).unwrap_or("").trim();
    let doc_id = get(cols.doc_id).to_string();
    let title = get(cols.title).to_string();
    if doc_id.is_empty() || normalize_title(&title).is_empty() {
        return None;
    }
    let date = get(cols.publish_date);
    let publish_date = if date.is_empty() {
        None
    } else if valid_date(date) {
        Some(date.to_string())
    } else {
        return None;
    };
    let mut cited: Vec<String> = cols.cited.map(|i| split_list(get(i))).unwrap_or_default();
    cited.retain(|c| *c != doc_id);
    let mut seen = BTreeSet::new();
    cited.retain(|c| seen.insert(c.clone()));
    Some(Article {
        title,
        abstract_text: get(cols.abstract_text).to_string(),
        body: String::new(),
        authors: split_list(get(cols.authors)),
        institutions: cols.institutions.map(|i| split_list(get(i))).unwrap_or_default(),
        cited_doc_ids: cited,
        publish_date,
        source: cols.source.map(|i| get(i).to_string()).unwrap_or_default(),
        doc_id,
    })
}

/// Read every `*.json` file in `dir` and return doc_id → body text.
/// Files that fail to parse are skipped with a warning; when two files carry
/// the same doc_id the first in filename order wins.
fn load_fulltext(dir: &Path) -> Result<BTreeMap<String, String>, CorpusError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let parsed: Vec<Option<(String, String)>> = paths
        .par_iter()
        .map(|p| {
            let raw = match fs::read_to_string(p) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("skipping full text {}: {e}", p.display());
                    return None;
                }
            };
            match serde_json::from_str::<FullTextFile>(&raw) {
                Ok(f) => {
                    let body = f
                        .body_text
                        .into_iter()
                        .map(|p| p.text)
                        .collect::<Vec<_>>()
                        .join("\n");
                    Some((f.doc_id, body))
                }
                Err(e) => {
                    log::warn!("skipping full text {}: {e}", p.display());
                    None
                }
            }
        })
        .collect();
    let mut out = BTreeMap::new();
    for (id, body) in parsed.into_iter().flatten() {
        out.entry(id).or_insert(body);
    }
    Ok(out)
}

/// Load and normalize a corpus.
///
/// Malformed metadata rows (wrong field count, empty id or title, bad date)
/// are skipped and counted. Rows whose normalized titles collide keep the
/// lexicographically smallest doc_id. Missing full text yields an empty body.
pub fn load_corpus(
    metadata_path: &Path,
    fulltext_dir: Option<&Path>,
    release_tag: &str,
) -> Result<LoadedCorpus, CorpusError> {
    let file = fs::File::open(metadata_path).map_err(io_err(metadata_path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let cols = Columns::from_header(reader.headers()?)?;

    let mut report = IngestReport::default();
    let mut by_id: BTreeMap<String, Article> = BTreeMap::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                log::warn!("skipping malformed metadata row: {e}");
                report.skipped_rows += 1;
                continue;
            }
        };
        let Some(article) = parse_row(&record, &cols) else {
            report.skipped_rows += 1;
            continue;
        };
        if by_id.contains_key(&article.doc_id) {
            report.dropped_duplicates.push(DroppedDuplicate {
                doc_id: article.doc_id.clone(),
                duplicate_of: article.doc_id,
            });
            continue;
        }
        by_id.insert(article.doc_id.clone(), article);
    }

    // by_id iterates in doc_id order, so the first article seen per title is the keeper.
    let mut keeper_by_title: BTreeMap<String, String> = BTreeMap::new();
    let mut articles = Vec::with_capacity(by_id.len());
    for (doc_id, article) in by_id {
        let key = normalize_title(&article.title);
        if let Some(keeper) = keeper_by_title.get(&key) {
            report.dropped_duplicates.push(DroppedDuplicate {
                doc_id,
                duplicate_of: keeper.clone(),
            });
        } else {
            keeper_by_title.insert(key, doc_id);
            articles.push(article);
        }
    }

    if let Some(dir) = fulltext_dir {
        let mut bodies = load_fulltext(dir)?;
        for a in &mut articles {
            if let Some(body) = bodies.remove(&a.doc_id) {
                a.body = body;
            }
        }
    }

    report.retained = articles.len();
    let manifest = CorpusManifest::from_articles(release_tag, &articles);
    Ok(LoadedCorpus {
        articles,
        manifest,
        report,
    })
}

/// Write articles back out in the ingest format: `metadata.csv` plus one
/// `<doc_id>.json` full-text file per article with a non-empty body.
pub fn save_corpus(articles: &[Article], metadata_path: &Path, fulltext_dir: &Path) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_path(metadata_path)?;
    w.write_record([
        "doc_id",
        "title",
        "abstract",
        "authors",
        "publish_date",
        "institutions",
        "cited_doc_ids",
        "source",
    ])?;
    for a in articles {
        w.write_record([
            a.doc_id.as_str(),
            &a.title,
            &a.abstract_text,
            &a.authors.join("; "),
            a.publish_date.as_deref().unwrap_or(""),
            &a.institutions.join("; "),
            &a.cited_doc_ids.join("; "),
            &a.source,
        ])?;
    }
    w.flush().map_err(io_err(metadata_path))?;

    fs::create_dir_all(fulltext_dir).map_err(io_err(fulltext_dir))?;
    for a in articles.iter().filter(|a| !a.body.is_empty()) {
        let paragraphs: Vec<FullTextParagraph> = a
            .body
            .split('\n')
            .map(|t| FullTextParagraph { text: t.to_string() })
            .collect();
        let json = serde_json::json!({ "doc_id": a.doc_id, "body_text": paragraphs });
        let path = fulltext_dir.join(format!("{}.json", a.doc_id));
        fs::write(&path, serde_json::to_vec_pretty(&json)?).map_err(io_err(&path))?;
    }
    Ok(())
}

/// Segment an article into passages: one for the title, one for the
/// abstract (when non-empty) and sliding windows of `window` sentences
/// advanced by `stride` over the body.
pub fn segment_passages(article: &Article, window: usize, stride: usize) -> Result<Vec<Passage>, CorpusError> {
    if window == 0 || stride == 0 || stride > window {
        return Err(CorpusError::InvalidSegmentation { window, stride });
    }
    let mut out = Vec::new();
    let mut push = |section: Section, text: &str, start: usize, end: usize| {
        out.push(Passage {
            doc_id: article.doc_id.clone(),
            passage_index: out.len(),
            section,
            text: text[start..end].to_string(),
            char_start: start,
            char_end: end,
        });
    };
    for section in [Section::Title, Section::Abstract] {
        let text = article.section_text(section);
        let trimmed = text.trim();
        if !trimmed.is_empty() {
            let start = text.len() - text.trim_start().len();
            push(section, text, start, start + trimmed.len());
        }
    }
    let sentences = sentence_spans(&article.body);
    let mut first = 0;
    while first < sentences.len() {
        let last = (first + window).min(sentences.len()) - 1;
        push(Section::Body, &article.body, sentences[first].0, sentences[last].1);
        if last + 1 == sentences.len() {
            break;
        }
        first += stride;
    }
    Ok(out)
}

/// Where an external id landed in the current release.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdResolution {
    Exact(String),
    Title(String),
    Unmapped,
}

impl IdResolution {
    pub fn doc_id(&self) -> Option<&str> {
        match self {
            IdResolution::Exact(d) | IdResolution::Title(d) => Some(d),
            IdResolution::Unmapped => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdMapping {
    pub entries: BTreeMap<String, IdResolution>,
}

impl IdMapping {
    /// Identity mapping over a set of ids.
    pub fn identity<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            entries: ids
                .into_iter()
                .map(|i| {
                    let i = i.into();
                    (i.clone(), IdResolution::Exact(i))
                })
                .collect(),
        }
    }

    pub fn resolve(&self, id: &str) -> Option<&str> {
        self.entries.get(id).and_then(IdResolution::doc_id)
    }

    pub fn mapped_count(&self) -> usize {
        self.entries.values().filter(|r| r.doc_id().is_some()).count()
    }

    pub fn unmapped_count(&self) -> usize {
        self.entries.len() - self.mapped_count()
    }
}

/// Map external `(id, title)` pairs onto the manifest: exact doc_id first,
/// then normalized title, otherwise unmapped.
pub fn map_doc_ids<'a, I>(external_ids: I, manifest: &CorpusManifest) -> IdMapping
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let known: BTreeSet<&str> = manifest.title_index.values().map(String::as_str).collect();
    let entries = external_ids
        .into_iter()
        .map(|(id, title)| {
            let res = if known.contains(id) {
                IdResolution::Exact(id.to_string())
            } else {
                let key = normalize_title(title);
                match manifest.title_index.get(&key) {
                    Some(d) if !key.is_empty() => IdResolution::Title(d.clone()),
                    _ => IdResolution::Unmapped,
                }
            };
            (id.to_string(), res)
        })
        .collect();
    IdMapping { entries }
}
