//! One-vs-rest logistic regression over TF-IDF features, trained to reproduce
//! topic-model labels on unseen documents.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TopicError;
use crate::text::{SparseVec, TfIdf};

pub const CONFIDENCE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub max_iter: usize,
    /// Stop once the largest gradient component falls below this value.
    pub tolerance: f64,
    pub rng_seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            learning_rate: 4.0,
            l2: 1e-4,
            max_iter: 2000,
            tolerance: 1e-4,
            rng_seed: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

impl LinearModel {
    fn margin(&self, x: &[(u32, f64)]) -> f64 {
        self.bias + x.iter().map(|&(i, v)| self.weights[i as usize] * v).sum::<f64>()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicClassifier {
    pub label_set: Vec<String>,
    pub vectorizer: TfIdf,
    pub models: Vec<LinearModel>,
    pub threshold: f64,
}

impl TopicClassifier {
    /// Per-label probabilities, aligned with `label_set`.
    pub fn scores(&self, tokens: &[String]) -> Vec<f64> {
        let x = self.vectorizer.transform(tokens);
        self.models.iter().map(|m| sigmoid(m.margin(&x))).collect()
    }

    /// Labels whose probability is at least the threshold.
    pub fn predict(&self, tokens: &[String]) -> BTreeSet<String> {
        self.scores(tokens)
            .into_iter()
            .zip(&self.label_set)
            .filter(|(p, _)| *p >= self.threshold)
            .map(|(_, l)| l.clone())
            .collect()
    }
}

fn fit_binary(xs: &[SparseVec], ys: &[f64], dim: usize, cfg: &ClassifierConfig, rng: &mut ChaCha8Rng) -> LinearModel {
    let n = xs.len() as f64;
    let mut w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1e-3..1e-3)).collect();
    let mut b = 0.0;
    let mut grad = vec![0.0; dim];
    let mut iterations = 0;
    for it in 0..cfg.max_iter {
        iterations = it + 1;
        grad.iter_mut().zip(&w).for_each(|(g, wi)| *g = cfg.l2 * wi);
        let mut grad_b = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let z = b + x.iter().map(|&(i, v)| w[i as usize] * v).sum::<f64>();
            let err = (sigmoid(z) - y) / n;
            grad_b += err;
            for &(i, v) in x {
                grad[i as usize] += err * v;
            }
        }
        let max_g = grad.iter().fold(grad_b.abs(), |m, g| m.max(g.abs()));
        if max_g < cfg.tolerance {
            break;
        }
        w.iter_mut().zip(&grad).for_each(|(wi, g)| *wi -= cfg.learning_rate * g);
        b -= cfg.learning_rate * grad_b;
    }
    LinearModel {
        weights: w,
        bias: b,
        iterations,
    }
}

/// Train one binary model per label in `labels`. Labels with no positive
/// training document are dropped with a warning.
pub fn train_classifier(
    docs: &[(String, Vec<String>)],
    gold: &BTreeMap<String, BTreeSet<String>>,
    labels: &[String],
    config: &ClassifierConfig,
) -> Result<TopicClassifier, TopicError> {
    if docs.is_empty() {
        return Err(TopicError::EmptyCorpus);
    }
    let vectorizer = TfIdf::fit(docs.iter().map(|(_, t)| t.as_slice()));
    let xs: Vec<SparseVec> = docs.iter().map(|(_, t)| vectorizer.transform(t)).collect();
    let empty = BTreeSet::new();
    let doc_labels: Vec<&BTreeSet<String>> = docs.iter().map(|(d, _)| gold.get(d).unwrap_or(&empty)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut label_set = Vec::new();
    let mut models = Vec::new();
    for label in labels {
        let ys: Vec<f64> = doc_labels.iter().map(|l| if l.contains(label) { 1.0 } else { 0.0 }).collect();
        if ys.iter().all(|&y| y == 0.0) {
            log::warn!("label `{label}` has no positive training documents; excluded");
            continue;
        }
        models.push(fit_binary(&xs, &ys, vectorizer.vocab_len(), config, &mut rng));
        label_set.push(label.clone());
    }
    if label_set.is_empty() {
        return Err(TopicError::InvalidConfig("no label has a positive training document".into()));
    }
    Ok(TopicClassifier {
        label_set,
        vectorizer,
        models,
        threshold: CONFIDENCE_THRESHOLD,
    })
}
