use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::trec::{Qrels, RunFile};
use crate::corpus::IdMapping;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateReport {
    /// Judgements whose doc id had no mapping, per round.
    pub dropped_unmapped: Vec<usize>,
}

/// Merge judgement rounds into one table keyed by current doc ids. Pairs
/// judged more than once keep their maximum grade.
pub fn aggregate_qrels(rounds: &[Qrels], id_map: &IdMapping) -> (Qrels, AggregateReport) {
    let mut out = Qrels::default();
    let mut report = AggregateReport::default();
    for round in rounds {
        let mut dropped = 0;
        for (topic, docs) in &round.judgements {
            for (doc, &grade) in docs {
                match id_map.resolve(doc) {
                    Some(d) => out.insert(topic, d, grade),
                    None => dropped += 1,
                }
            }
        }
        if dropped > 0 {
            log::warn!("{dropped} judgements dropped: doc ids without a mapping");
        }
        report.dropped_unmapped.push(dropped);
    }
    (out, report)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: BTreeMap<usize, f64>,
    /// Absent when the topic has no relevant document.
    pub recall: BTreeMap<usize, f64>,
}

fn judged_topics<'a>(run: &'a RunFile, qrels: &Qrels) -> Vec<&'a String> {
    let missing: Vec<&String> = run.topics.keys().filter(|t| qrels.topic(t).is_none()).collect();
    if !missing.is_empty() {
        log::warn!("{} run topics have no judgements and are skipped: {:?}", missing.len(), missing);
    }
    run.topics.keys().filter(|t| qrels.topic(t).is_some()).collect()
}

/// Per-topic P@k and R@k with relevance binarized at grade ≥ 1.
pub fn precision_recall_at_k(run: &RunFile, qrels: &Qrels, ks: &[usize]) -> BTreeMap<String, PrecisionRecall> {
    let mut out = BTreeMap::new();
    for topic in judged_topics(run, qrels) {
        let total = qrels.relevant_count(topic);
        let mut pr = PrecisionRecall::default();
        for &k in ks.iter().filter(|&&k| k > 0) {
            let hits = run.top_k(topic, k).iter().filter(|d| qrels.grade(topic, d) >= 1).count() as f64;
            pr.precision.insert(k, hits / k as f64);
            if total > 0 {
                pr.recall.insert(k, hits / total as f64);
            }
        }
        out.insert(topic.clone(), pr);
    }
    out
}

fn dcg(gains: impl Iterator<Item = u32>) -> f64 {
    gains
        .enumerate()
        .map(|(i, g)| g as f64 / ((i + 2) as f64).log2())
        .sum()
}

/// Per-topic NDCG@k with graded gains. The ideal ordering uses every judged
/// doc of the topic; topics whose ideal DCG is zero are omitted.
pub fn ndcg_at_k(run: &RunFile, qrels: &Qrels, k: usize) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for topic in judged_topics(run, qrels) {
        let mut ideal: Vec<u32> = qrels.topic(topic).map(|d| d.values().copied().collect()).unwrap_or_default();
        ideal.sort_unstable_by(|a, b| b.cmp(a));
        let idcg = dcg(ideal.into_iter().take(k));
        if idcg == 0.0 {
            continue;
        }
        let got = dcg(run.top_k(topic, k).into_iter().map(|d| qrels.grade(topic, d)));
        out.insert(topic.clone(), got / idcg);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub precision_ks: Vec<usize>,
    pub recall_ks: Vec<usize>,
    pub ndcg_ks: Vec<usize>,
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self {
            precision_ks: vec![1, 5, 10, 20],
            recall_ks: vec![10, 20],
            ndcg_ks: vec![20],
        }
    }
}

impl MetricSpec {
    pub fn uniform(ks: &[usize]) -> Self {
        Self {
            precision_ks: ks.to_vec(),
            recall_ks: ks.to_vec(),
            ndcg_ks: ks.to_vec(),
        }
    }
}

/// Per-topic and mean metric values keyed by metric name (`P@5`, `R@10`,
/// `ndcg@20`, `EM@3`, ...). A mean is the average of the per-topic values
/// reported for that metric.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_topic: BTreeMap<String, BTreeMap<String, f64>>,
    pub mean: BTreeMap<String, f64>,
}

impl MetricReport {
    pub fn from_per_topic(per_topic: BTreeMap<String, BTreeMap<String, f64>>) -> Self {
        let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for values in per_topic.values() {
            for (m, v) in values {
                let e = sums.entry(m.clone()).or_default();
                e.0 += v;
                e.1 += 1;
            }
        }
        let mean = sums.into_iter().map(|(m, (s, n))| (m, s / n as f64)).collect();
        Self { per_topic, mean }
    }

    /// Fold another report's per-topic values into this one.
    pub fn merge(self, other: MetricReport) -> Self {
        let mut per_topic = self.per_topic;
        for (t, values) in other.per_topic {
            per_topic.entry(t).or_default().extend(values);
        }
        Self::from_per_topic(per_topic)
    }
}

pub fn evaluate_run(run: &RunFile, qrels: &Qrels, spec: &MetricSpec) -> MetricReport {
    let mut per_topic: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut ks: Vec<usize> = spec.precision_ks.iter().chain(&spec.recall_ks).copied().collect();
    ks.sort_unstable();
    ks.dedup();
    for (topic, pr) in precision_recall_at_k(run, qrels, &ks) {
        let values = per_topic.entry(topic).or_default();
        for k in &spec.precision_ks {
            if let Some(p) = pr.precision.get(k) {
                values.insert(format!("P@{k}"), *p);
            }
        }
        for k in &spec.recall_ks {
            if let Some(r) = pr.recall.get(k) {
                values.insert(format!("R@{k}"), *r);
            }
        }
    }
    for &k in &spec.ndcg_ks {
        for (topic, v) in ndcg_at_k(run, qrels, k) {
            per_topic.entry(topic).or_default().insert(format!("ndcg@{k}"), v);
        }
    }
    MetricReport::from_per_topic(per_topic)
}
