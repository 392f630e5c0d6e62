use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::lda::TopicModel;
use super::TopicError;

/// The ten-topic display scheme used for document labels.
pub const CURATED_TOPIC_NAMES: [&str; 10] = [
    "Vaccines/immunology",
    "Genomics",
    "Public health Policies",
    "Epidemiology",
    "Clinical Treatment",
    "Virology",
    "Influenza",
    "Healthcare Industry",
    "Pulmonary Infections",
    "Lab Trials (human)",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurationOp {
    Merge(Vec<usize>),
    Delete(usize),
    Rename { index: usize, name: String },
}

/// Curated topic scheme: display names plus the original → curated mapping
/// (`None` for deleted topics).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CuratedTopics {
    pub names: Vec<String>,
    pub mapping: Vec<Option<usize>>,
}

/// Apply merge/delete/rename operations to a K-topic model.
///
/// Curated topics are ordered by their smallest original index. A topic
/// may appear in at most one merge, be deleted at most once and never be both
/// deleted and merged or renamed; a merged group may be renamed once through
/// any of its members.
pub fn curate(model: &TopicModel, ops: &[CurationOp]) -> Result<CuratedTopics, TopicError> {
    curate_k(model.k, ops)
}

pub fn curate_k(k: usize, ops: &[CurationOp]) -> Result<CuratedTopics, TopicError> {
    let check = |i: usize| {
        if i >= k {
            Err(TopicError::TopicOutOfRange { topic: i, k })
        } else {
            Ok(i)
        }
    };
    // group representative per original topic
    let mut group: Vec<usize> = (0..k).collect();
    let mut merged = BTreeSet::new();
    let mut deleted = BTreeSet::new();
    let mut renames: BTreeMap<usize, (usize, String)> = BTreeMap::new();

    for op in ops {
        match op {
            CurationOp::Merge(indices) => {
                if indices.len() < 2 {
                    return Err(TopicError::Curation("merge needs at least two topics".into()));
                }
                let rep = *indices.iter().min().unwrap();
                for &i in indices {
                    check(i)?;
                    if !merged.insert(i) {
                        return Err(TopicError::Curation(format!("topic {i} appears in more than one merge")));
                    }
                    group[i] = rep;
                }
            }
            CurationOp::Delete(i) => {
                check(*i)?;
                if !deleted.insert(*i) {
                    return Err(TopicError::Curation(format!("topic {i} deleted twice")));
                }
            }
            CurationOp::Rename { index, .. } => {
                check(*index)?;
            }
        }
    }
    if let Some(i) = deleted.iter().find(|i| merged.contains(i)) {
        return Err(TopicError::Curation(format!("topic {i} is both merged and deleted")));
    }
    for op in ops {
        if let CurationOp::Rename { index, name } = op {
            if deleted.contains(index) {
                return Err(TopicError::Curation(format!("topic {index} is both renamed and deleted")));
            }
            let rep = group[*index];
            if let Some((prev, _)) = renames.insert(rep, (*index, name.clone())) {
                return Err(TopicError::Curation(format!(
                    "topics {prev} and {index} rename the same curated topic"
                )));
            }
        }
    }

    let mut names = Vec::new();
    let mut curated_of_rep: BTreeMap<usize, usize> = BTreeMap::new();
    let mut mapping = vec![None; k];
    for t in 0..k {
        if deleted.contains(&t) {
            continue;
        }
        let rep = group[t];
        let c = *curated_of_rep.entry(rep).or_insert_with(|| {
            names.push(
                renames
                    .get(&rep)
                    .map(|(_, n)| n.clone())
                    .unwrap_or_else(|| format!("Topic {rep}")),
            );
            names.len() - 1
        });
        mapping[t] = Some(c);
    }
    if names.is_empty() {
        return Err(TopicError::Curation("every topic was deleted".into()));
    }
    let unique: BTreeSet<&String> = names.iter().collect();
    if unique.len() != names.len() {
        return Err(TopicError::Curation("curated topic names must be unique".into()));
    }
    Ok(CuratedTopics { names, mapping })
}

/// Operations that reduce a model to the ten-topic scheme: `groups[i]`
/// lists the original topics forming `CURATED_TOPIC_NAMES[i]`; every topic
/// not listed is deleted.
pub fn ten_topic_ops(k: usize, groups: &[Vec<usize>; 10]) -> Vec<CurationOp> {
    let mut ops = Vec::new();
    let listed: BTreeSet<usize> = groups.iter().flatten().copied().collect();
    for (g, name) in groups.iter().zip(CURATED_TOPIC_NAMES) {
        if g.len() > 1 {
            ops.push(CurationOp::Merge(g.clone()));
        }
        if let Some(&first) = g.first() {
            ops.push(CurationOp::Rename {
                index: first,
                name: name.to_string(),
            });
        }
    }
    ops.extend((0..k).filter(|t| !listed.contains(t)).map(CurationOp::Delete));
    ops
}

impl CuratedTopics {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Word-topic counts of the curated topics: merged topics are summed,
    /// indexed `[curated][word]`.
    pub fn word_counts(&self, model: &TopicModel) -> Vec<Vec<u64>> {
        let mut out = vec![vec![0u64; model.vocab.len()]; self.names.len()];
        for (w, row) in model.n_wt.iter().enumerate() {
            for (t, &c) in row.iter().enumerate() {
                if let Some(ct) = self.mapping[t] {
                    out[ct][w] += c as u64;
                }
            }
        }
        out
    }

    /// Document mixture over curated topics. Mass of deleted topics is
    /// dropped and the rest renormalized, so a document dominated by a deleted
    /// topic falls through to its next-best retained topic.
    pub fn theta(&self, model: &TopicModel, doc: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.names.len()];
        for (t, &c) in model.n_dt[doc].iter().enumerate() {
            if let Some(ct) = self.mapping[t] {
                out[ct] += c as f64 + model.alpha;
            }
        }
        let total: f64 = out.iter().sum();
        out.iter_mut().for_each(|x| *x /= total);
        out
    }
}

/// Gold labels: every curated topic whose θ reaches `assign_threshold`, or the
/// argmax topic when none does.
pub fn derive_doc_labels(
    model: &TopicModel,
    curated: &CuratedTopics,
    assign_threshold: f64,
) -> Result<BTreeMap<String, BTreeSet<String>>, TopicError> {
    if !(assign_threshold > 0.0 && assign_threshold < 1.0) {
        return Err(TopicError::InvalidConfig(format!(
            "assign threshold must lie in (0, 1), got {assign_threshold}"
        )));
    }
    let mut out = BTreeMap::new();
    for (d, doc_id) in model.doc_ids.iter().enumerate() {
        let theta = curated.theta(model, d);
        out.insert(doc_id.clone(), labels_from_theta(&theta, &curated.names, assign_threshold));
    }
    Ok(out)
}

pub fn labels_from_theta(theta: &[f64], names: &[String], threshold: f64) -> BTreeSet<String> {
    let mut labels: BTreeSet<String> = theta
        .iter()
        .zip(names)
        .filter(|(&p, _)| p >= threshold)
        .map(|(_, n)| n.clone())
        .collect();
    if labels.is_empty() {
        let best = theta
            .iter()
            .enumerate()
            .fold(0, |best, (i, &p)| if p > theta[best] { i } else { best });
        labels.insert(names[best].clone());
    }
    labels
}
