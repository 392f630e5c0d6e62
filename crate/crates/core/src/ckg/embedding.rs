//! Translational (TransE-style) knowledge-graph embeddings.
//!
//! `score(h, r, t) = -‖v_h + v_r - v_t‖₂`, trained with a margin ranking
//! loss against corrupted triples and SGD. Entity vectors are projected into
//! the unit ball after every epoch.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{KnowledgeGraph, NodeId, Relation};
use super::KgError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransEConfig {
    pub dim: usize,
    pub epochs: usize,
    pub margin: f64,
    pub learning_rate: f64,
    pub negatives_per_positive: usize,
    pub rng_seed: u64,
    /// Also record the exact loss over every corruption after each epoch.
    /// Costs O(triples × entities) per epoch.
    pub track_full_loss: bool,
}

impl Default for TransEConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            epochs: 200,
            margin: 1.0,
            learning_rate: 0.01,
            negatives_per_positive: 1,
            rng_seed: 42,
            track_full_loss: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KgEmbedding {
    pub dim: usize,
    #[serde(rename = "entities")]
    pub entity_vectors: BTreeMap<NodeId, Vec<f64>>,
    #[serde(rename = "relations")]
    pub relation_vectors: BTreeMap<Relation, Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean margin loss per (positive, negative) pair, one entry per epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean margin loss over all filtered corruptions of every triple, after
    /// each epoch. Empty unless `track_full_loss` is set.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub full_losses: Vec<f64>,
}

fn distance(h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    h.iter()
        .zip(r)
        .zip(t)
        .map(|((h, r), t)| {
            let d = h + r - t;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn project_to_unit_ball(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 1.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

impl KgEmbedding {
    pub fn entity(&self, id: &NodeId) -> Option<&[f64]> {
        self.entity_vectors.get(id).map(Vec::as_slice)
    }

    pub fn score(&self, head: &NodeId, relation: Relation, tail: &NodeId) -> Option<f64> {
        let h = self.entity_vectors.get(head)?;
        let r = self.relation_vectors.get(&relation)?;
        let t = self.entity_vectors.get(tail)?;
        Some(-distance(h, r, t))
    }
}

struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Gradient of ‖h + r − t‖ with respect to (h + r − t).
fn unit_residual(h: &[f64], r: &[f64], t: &[f64], out: &mut [f64]) {
    let mut norm = 0.0;
    for i in 0..out.len() {
        out[i] = h[i] + r[i] - t[i];
        norm += out[i] * out[i];
    }
    let norm = norm.sqrt();
    if norm > 0.0 {
        out.iter_mut().for_each(|x| *x /= norm);
    }
}

fn full_loss(
    ent: &Matrix,
    rel: &Matrix,
    triples: &[(usize, usize, usize)],
    known: &HashSet<(usize, usize, usize)>,
    margin: f64,
) -> f64 {
    let n_entities = ent.data.len() / ent.dim;
    let mut sum = 0.0;
    let mut n = 0usize;
    for &(h, r, t) in triples {
        let d_pos = distance(ent.row(h), rel.row(r), ent.row(t));
        for e in 0..n_entities {
            for (nh, nt) in [(e, t), (h, e)] {
                if known.contains(&(nh, r, nt)) {
                    continue;
                }
                sum += (margin + d_pos - distance(ent.row(nh), rel.row(r), ent.row(nt))).max(0.0);
                n += 1;
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

const MAX_CORRUPTION_DRAWS: usize = 64;

/// Replace the head or the tail uniformly, rejecting draws that reproduce a
/// triple of the graph. `None` when no corruption was found.
fn corrupt(
    rng: &mut ChaCha8Rng,
    (h, r, t): (usize, usize, usize),
    n_entities: usize,
    known: &HashSet<(usize, usize, usize)>,
) -> Option<(usize, usize)> {
    for _ in 0..MAX_CORRUPTION_DRAWS {
        let corrupt_head = rng.gen_bool(0.5);
        let replacement = rng.gen_range(0..n_entities);
        let (nh, nt) = if corrupt_head { (replacement, t) } else { (h, replacement) };
        if !known.contains(&(nh, r, nt)) {
            return Some((nh, nt));
        }
    }
    None
}

pub fn train_kg_embeddings(graph: &KnowledgeGraph, config: &TransEConfig) -> Result<(KgEmbedding, TrainReport), KgError> {
    if config.dim < 2 {
        return Err(KgError::InvalidConfig(format!("dim must be at least 2, got {}", config.dim)));
    }
    if graph.triples().is_empty() {
        return Err(KgError::NothingToTrain);
    }
    let entity_ids: Vec<&NodeId> = graph.nodes().keys().collect();
    let entity_index: BTreeMap<&NodeId, usize> = entity_ids.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let triples: Vec<(usize, usize, usize)> = graph
        .triples()
        .iter()
        .map(|t| {
            let r = Relation::ALL.iter().position(|x| *x == t.relation).unwrap();
            (entity_index[&t.head], r, entity_index[&t.tail])
        })
        .collect();
    let known: HashSet<(usize, usize, usize)> = triples.iter().copied().collect();

    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let bound = 6.0 / (dim as f64).sqrt();
    let mut ent = Matrix {
        dim,
        data: (0..entity_ids.len() * dim).map(|_| rng.gen_range(-bound..bound)).collect(),
    };
    let mut rel = Matrix {
        dim,
        data: (0..Relation::ALL.len() * dim).map(|_| rng.gen_range(-bound..bound)).collect(),
    };
    for r in 0..Relation::ALL.len() {
        let v = rel.row_mut(r);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
    }
    for e in 0..entity_ids.len() {
        project_to_unit_ball(ent.row_mut(e));
    }

    let n_entities = entity_ids.len();
    let lr = config.learning_rate;
    let mut order: Vec<usize> = (0..triples.len()).collect();
    let mut g_pos = vec![0.0; dim];
    let mut g_neg = vec![0.0; dim];
    let mut report = TrainReport::default();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut pairs = 0usize;
        for &ti in &order {
            let (h, r, t) = triples[ti];
            for _ in 0..config.negatives_per_positive {
                let Some((nh, nt)) = corrupt(&mut rng, (h, r, t), n_entities, &known) else {
                    continue;
                };

                let d_pos = distance(ent.row(h), rel.row(r), ent.row(t));
                let d_neg = distance(ent.row(nh), rel.row(r), ent.row(nt));
                let loss = config.margin + d_pos - d_neg;
                pairs += 1;
                if loss <= 0.0 {
                    continue;
                }
                loss_sum += loss;
                unit_residual(ent.row(h), rel.row(r), ent.row(t), &mut g_pos);
                unit_residual(ent.row(nh), rel.row(r), ent.row(nt), &mut g_neg);
                for i in 0..dim {
                    ent.row_mut(h)[i] -= lr * g_pos[i];
                    ent.row_mut(t)[i] += lr * g_pos[i];
                    ent.row_mut(nh)[i] += lr * g_neg[i];
                    ent.row_mut(nt)[i] -= lr * g_neg[i];
                    rel.row_mut(r)[i] -= lr * (g_pos[i] - g_neg[i]);
                }
            }
        }
        for e in 0..n_entities {
            project_to_unit_ball(ent.row_mut(e));
        }
        report.epoch_losses.push(if pairs == 0 { 0.0 } else { loss_sum / pairs as f64 });
        if config.track_full_loss {
            report.full_losses.push(full_loss(&ent, &rel, &triples, &known, config.margin));
        }
    }

    let embedding = KgEmbedding {
        dim,
        entity_vectors: entity_ids
            .iter()
            .enumerate()
            .map(|(i, id)| ((*id).clone(), ent.row(i).to_vec()))
            .collect(),
        relation_vectors: Relation::ALL
            .iter()
            .enumerate()
            .map(|(i, r)| (*r, rel.row(i).to_vec()))
            .collect(),
    };
    Ok((embedding, report))
}
