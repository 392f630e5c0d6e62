use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;

pub const MAX_RESULTS_PER_QUERY: usize = 3;

/// One displayed result of an engine: article, passage and the highlighted
/// snippet, if any.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PooledResult {
    pub doc_id: String,
    pub title: String,
    pub passage: String,
    #[serde(default)]
    pub highlight: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResults {
    pub query: String,
    /// Results in rank order, at most three.
    pub results: Vec<PooledResult>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemResults {
    pub system: String,
    /// query_id → results.
    pub queries: BTreeMap<String, QueryResults>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheetRow {
    pub row_id: String,
    pub query: String,
    pub title: String,
    pub passage: String,
    pub highlight: String,
    pub passage_relevant: Option<bool>,
    pub answers_question: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowSource {
    pub system: String,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowKey {
    pub query_id: String,
    pub doc_id: String,
    pub sources: Vec<RowSource>,
}

/// The hidden side of a blind pool: which system produced each row, at which
/// rank. Kept apart from the annotation sheet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolMapping {
    pub seed: u64,
    pub systems: Vec<String>,
    pub queries: Vec<String>,
    pub rows: BTreeMap<String, RowKey>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindPool {
    pub sheet: Vec<SheetRow>,
    pub mapping: PoolMapping,
}

/// Pool the results of several systems into one shuffled annotation sheet.
///
/// Identical results (same query, article, passage and highlight) from
/// different systems collapse into one row. Rows are grouped by query in
/// query_id order and shuffled within each query.
pub fn prepare_blind_pool(systems: &[SystemResults], seed: u64) -> Result<BlindPool, EvalError> {
    let mut names = BTreeSet::new();
    for s in systems {
        if !names.insert(s.system.as_str()) {
            return Err(EvalError::InvalidArgument(format!("system `{}` listed twice", s.system)));
        }
        for (q, r) in &s.queries {
            if r.results.len() > MAX_RESULTS_PER_QUERY {
                return Err(EvalError::InvalidArgument(format!(
                    "system `{}` returns {} results for query {q}; at most {MAX_RESULTS_PER_QUERY} are pooled",
                    s.system,
                    r.results.len()
                )));
            }
        }
    }

    type Key = (String, String, String);
    type Rows = Vec<(Key, PooledResult, Vec<RowSource>)>;
    let mut pooled: BTreeMap<String, (String, Rows)> = BTreeMap::new();
    for s in systems {
        for (qid, qr) in &s.queries {
            let (_, rows) = pooled.entry(qid.clone()).or_insert_with(|| (qr.query.clone(), Vec::new()));
            for (i, r) in qr.results.iter().enumerate() {
                let key = (r.doc_id.clone(), r.passage.clone(), r.highlight.clone().unwrap_or_default());
                let source = RowSource {
                    system: s.system.clone(),
                    rank: i + 1,
                };
                match rows.iter_mut().find(|(k, _, _)| *k == key) {
                    Some((_, _, sources)) => sources.push(source),
                    None => rows.push((key, r.clone(), vec![source])),
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sheet = Vec::new();
    let mut rows_map = BTreeMap::new();
    let width = pooled.values().map(|(_, r)| r.len()).sum::<usize>().max(1).to_string().len();
    for (qid, (query, mut rows)) in pooled.clone() {
        rows.shuffle(&mut rng);
        for (_, r, mut sources) in rows {
            let row_id = format!("{:0width$}", sheet.len() + 1);
            sources.sort();
            rows_map.insert(
                row_id.clone(),
                RowKey {
                    query_id: qid.clone(),
                    doc_id: r.doc_id.clone(),
                    sources,
                },
            );
            sheet.push(SheetRow {
                row_id,
                query: query.clone(),
                title: r.title,
                passage: r.passage,
                highlight: r.highlight.unwrap_or_default(),
                passage_relevant: None,
                answers_question: None,
            });
        }
    }
    Ok(BlindPool {
        sheet,
        mapping: PoolMapping {
            seed,
            systems: names.into_iter().map(String::from).collect(),
            queries: pooled.into_keys().collect(),
            rows: rows_map,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrqaScores {
    /// P@1, P@2, P@3 for passage relevance.
    pub pr: [f64; 3],
    /// P@1, P@2, P@3 for answer highlighting.
    pub qa: [f64; 3],
}

/// Unblind an annotated sheet and score each system. Missing ranks and rows
/// without a highlight count as negatives; every pooled query counts for
/// every system.
pub fn score_prqa(sheet: &[SheetRow], mapping: &PoolMapping) -> Result<BTreeMap<String, PrqaScores>, EvalError> {
    let unannotated: Vec<String> = sheet
        .iter()
        .filter(|r| r.passage_relevant.is_none() || r.answers_question.is_none())
        .map(|r| r.row_id.clone())
        .collect();
    if !unannotated.is_empty() {
        return Err(EvalError::Unannotated(unannotated));
    }
    let unknown: Vec<String> = sheet
        .iter()
        .filter(|r| !mapping.rows.contains_key(&r.row_id))
        .map(|r| r.row_id.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(EvalError::InvalidArgument(format!("rows not in mapping: {}", unknown.join(", "))));
    }
    let missing: Vec<String> = mapping
        .rows
        .keys()
        .filter(|id| !sheet.iter().any(|r| &r.row_id == *id))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::Unannotated(missing));
    }

    // (system, query) → per-rank (pr, qa) labels
    let mut labels: BTreeMap<(&str, &str), [(bool, bool); MAX_RESULTS_PER_QUERY]> = BTreeMap::new();
    for row in sheet {
        let key = &mapping.rows[&row.row_id];
        let pr = row.passage_relevant == Some(true);
        let qa = qa_positive(row);
        for src in &key.sources {
            if (1..=MAX_RESULTS_PER_QUERY).contains(&src.rank) {
                let slot = labels.entry((src.system.as_str(), key.query_id.as_str())).or_default();
                slot[src.rank - 1] = (pr, qa);
            }
        }
    }

    let n_queries = mapping.queries.len().max(1) as f64;
    let mut out = BTreeMap::new();
    for system in &mapping.systems {
        let mut pr = [0.0; 3];
        let mut qa = [0.0; 3];
        for q in &mapping.queries {
            let l = labels.get(&(system.as_str(), q.as_str())).copied().unwrap_or_default();
            for j in 1..=3 {
                pr[j - 1] += l[..j].iter().filter(|x| x.0).count() as f64 / j as f64;
                qa[j - 1] += l[..j].iter().filter(|x| x.1).count() as f64 / j as f64;
            }
        }
        pr.iter_mut().chain(qa.iter_mut()).for_each(|v| *v /= n_queries);
        out.insert(system.clone(), PrqaScores { pr, qa });
    }
    Ok(out)
}

fn qa_positive(row: &SheetRow) -> bool {
    row.answers_question == Some(true) && !row.highlight.trim().is_empty()
}

fn parse_flag(s: &str) -> Result<Option<bool>, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "" => Ok(None),
        "1" | "true" | "yes" | "y" => Ok(Some(true)),
        "0" | "false" | "no" | "n" => Ok(Some(false)),
        other => Err(format!("unrecognized judgement `{other}`")),
    }
}

fn flag(v: Option<bool>) -> &'static str {
    match v {
        None => "",
        Some(true) => "1",
        Some(false) => "0",
    }
}

const SHEET_HEADER: [&str; 7] = [
    "row_id",
    "query",
    "title",
    "passage",
    "highlight",
    "passage_relevant",
    "answers_question",
];

pub fn write_sheet(path: &Path, sheet: &[SheetRow]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| EvalError::Parse(e.to_string()))?;
    let mut write = || -> Result<(), csv::Error> {
        w.write_record(SHEET_HEADER)?;
        for r in sheet {
            w.write_record([
                r.row_id.as_str(),
                &r.query,
                &r.title,
                &r.passage,
                &r.highlight,
                flag(r.passage_relevant),
                flag(r.answers_question),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| EvalError::Parse(e.to_string()))
}

pub fn read_sheet(path: &Path) -> Result<Vec<SheetRow>, EvalError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| EvalError::Parse(e.to_string()))?;
    let headers = r.headers().map_err(|e| EvalError::Parse(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| EvalError::Parse(format!("annotation sheet lacks column `{name}`")))
    };
    let idx: Vec<usize> = SHEET_HEADER.iter().map(|h| col(h)).collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| EvalError::Parse(e.to_string()))?;
        let get = |i: usize| rec.get(idx[i]).unwrap_or("").to_string();
        let line = n + 2;
        out.push(SheetRow {
            row_id: get(0),
            query: get(1),
            title: get(2),
            passage: get(3),
            highlight: get(4),
            passage_relevant: parse_flag(&get(5)).map_err(|m| EvalError::parse(line, m))?,
            answers_question: parse_flag(&get(6)).map_err(|m| EvalError::parse(line, m))?,
        });
    }
    Ok(out)
}
