use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::metrics::MetricReport;
use super::trec::RunFile;
use super::EvalError;
use crate::text::normalize_title;

/// Token-level F1 between two normalized titles, counting repeated tokens
/// as a multiset.
pub fn token_f1(a: &str, b: &str) -> f64 {
    let ta: Vec<&str> = a.split_whitespace().collect();
    let tb: Vec<&str> = b.split_whitespace().collect();
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &tb {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0;
    for t in &ta {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    2.0 * common as f64 / (ta.len() + tb.len()) as f64
}

/// EM@k and F1@k for one topic given the NQ result titles (in rank order)
/// and the KQ top-k titles. All titles must already be normalized.
pub fn em_f1_for_topic(nq_titles: &[String], kq_titles: &BTreeSet<String>, k: usize) -> (f64, f64) {
    if k == 0 {
        return (0.0, 0.0);
    }
    let mut em = 0.0;
    let mut f1 = 0.0;
    for t in nq_titles.iter().take(k) {
        if kq_titles.contains(t) {
            em += 1.0;
            f1 += 1.0;
        } else {
            f1 += kq_titles.iter().map(|g| token_f1(t, g)).fold(0.0, f64::max);
        }
    }
    (em / k as f64, f1 / k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub k: usize,
    pub em: f64,
    pub f1: f64,
    pub per_topic: BTreeMap<String, (f64, f64)>,
}

impl RobustnessReport {
    pub fn to_metric_report(&self) -> MetricReport {
        let per_topic = self
            .per_topic
            .iter()
            .map(|(t, (em, f1))| {
                let values = BTreeMap::from([(format!("EM@{}", self.k), *em), (format!("F1@{}", self.k), *f1)]);
                (t.clone(), values)
            })
            .collect();
        MetricReport::from_per_topic(per_topic)
    }
}

/// Consistency of natural-question results against keyword-query results,
/// comparing articles by normalized title. `titles` maps doc ids to titles.
pub fn robustness_em_f1(
    run_nq: &RunFile,
    run_kq: &RunFile,
    titles: &BTreeMap<String, String>,
    k: usize,
) -> Result<RobustnessReport, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidArgument("k must be at least 1".into()));
    }
    let nq: BTreeSet<&String> = run_nq.topics.keys().collect();
    let kq: BTreeSet<&String> = run_kq.topics.keys().collect();
    let one_sided: Vec<&&String> = nq.symmetric_difference(&kq).collect();
    if !one_sided.is_empty() {
        log::warn!("{} topics appear in only one run and are skipped: {:?}", one_sided.len(), one_sided);
    }

    let mut unresolved = BTreeSet::new();
    let mut title_of = |doc: &str| match titles.get(doc) {
        Some(t) => normalize_title(t),
        None => {
            unresolved.insert(doc.to_string());
            String::new()
        }
    };
    let mut per_topic = BTreeMap::new();
    for topic in nq.intersection(&kq) {
        let nq_titles: Vec<String> = run_nq.top_k(topic, k).into_iter().map(&mut title_of).collect();
        let kq_titles: BTreeSet<String> = run_kq.top_k(topic, k).into_iter().map(&mut title_of).collect();
        per_topic.insert((*topic).clone(), em_f1_for_topic(&nq_titles, &kq_titles, k));
    }
    if !unresolved.is_empty() {
        return Err(EvalError::UnresolvedTitles(unresolved.into_iter().collect()));
    }
    let n = per_topic.len().max(1) as f64;
    Ok(RobustnessReport {
        k,
        em: per_topic.values().map(|(e, _)| e).sum::<f64>() / n,
        f1: per_topic.values().map(|(_, f)| f).sum::<f64>() / n,
        per_topic,
    })
}
