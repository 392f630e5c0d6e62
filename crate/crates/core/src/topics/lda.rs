//! Collapsed Gibbs sampling for LDA with hard z-labels: a seeded term may only
//! be assigned to topics in its allowed set.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TopicError;

/// term → allowed topic indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZLabelSeeds(pub BTreeMap<String, BTreeSet<usize>>);

impl ZLabelSeeds {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, term: &str, topics: impl IntoIterator<Item = usize>) -> Self {
        self.0.insert(term.to_string(), topics.into_iter().collect());
        self
    }

    /// Seeds TSV: `term \t comma-separated topic indices`.
    pub fn from_tsv(content: &str) -> Result<Self, TopicError> {
        let mut seeds = BTreeMap::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (term, topics) = line
                .split_once('\t')
                .ok_or_else(|| TopicError::Parse(format!("seeds line {}: expected term<TAB>topics", i + 1)))?;
            let allowed = topics
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| TopicError::Parse(format!("seeds line {}: bad topic index `{s}`", i + 1)))
                })
                .collect::<Result<BTreeSet<_>, _>>()?;
            seeds.insert(term.trim().to_lowercase(), allowed);
        }
        Ok(Self(seeds))
    }

    pub fn load(path: &Path) -> Result<Self, TopicError> {
        Self::from_tsv(&fs::read_to_string(path).map_err(|e| TopicError::Io(path.display().to_string(), e))?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub k: usize,
    /// Defaults to 50 / K when absent.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub rng_seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            k: 20,
            alpha: None,
            beta: 0.01,
            iterations: 500,
            rng_seed: 7,
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }
}

/// Trained model state. `n_wt` is indexed `[word][topic]`, `n_dt`
/// `[doc][topic]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub vocab: Vec<String>,
    pub n_wt: Vec<Vec<u32>>,
    pub n_dt: Vec<Vec<u32>>,
    pub n_t: Vec<u64>,
    pub seed: u64,
    pub iterations: usize,
    pub doc_ids: Vec<String>,
    pub docs: Vec<Vec<u32>>,
    pub z: Vec<Vec<u16>>,
}

impl TopicModel {
    pub fn vocab_len(&self) -> usize {
        self.vocab.len()
    }

    /// φ_t(w) = (n_wt + β) / (n_t + Vβ)
    pub fn phi(&self, topic: usize, word: usize) -> f64 {
        let v = self.vocab.len() as f64;
        (self.n_wt[word][topic] as f64 + self.beta) / (self.n_t[topic] as f64 + v * self.beta)
    }

    pub fn phi_row(&self, topic: usize) -> Vec<f64> {
        (0..self.vocab.len()).map(|w| self.phi(topic, w)).collect()
    }

    /// θ_d(t) = (n_dt + α) / (|d| + Kα)
    pub fn theta(&self, doc: usize) -> Vec<f64> {
        let len: u32 = self.n_dt[doc].iter().sum();
        let denom = len as f64 + self.k as f64 * self.alpha;
        self.n_dt[doc].iter().map(|&c| (c as f64 + self.alpha) / denom).collect()
    }

    pub fn word_index(&self, term: &str) -> Option<usize> {
        self.vocab.binary_search_by(|v| v.as_str().cmp(term)).ok()
    }

    /// The `n` most probable terms of `topic`, ties broken lexicographically.
    pub fn top_terms(&self, topic: usize, n: usize) -> Result<Vec<(String, f64)>, TopicError> {
        if topic >= self.k {
            return Err(TopicError::TopicOutOfRange { topic, k: self.k });
        }
        let mut terms: Vec<(String, f64)> = self
            .vocab
            .iter()
            .enumerate()
            .map(|(w, t)| (t.clone(), self.phi(topic, w)))
            .collect();
        terms.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        terms.truncate(n);
        Ok(terms)
    }

    /// Recount n_wt, n_dt and n_t from z and compare with the stored tables.
    pub fn counts_consistent(&self) -> bool {
        let mut n_wt = vec![vec![0u32; self.k]; self.vocab.len()];
        let mut n_dt = vec![vec![0u32; self.k]; self.docs.len()];
        let mut n_t = vec![0u64; self.k];
        for (d, (words, zs)) in self.docs.iter().zip(&self.z).enumerate() {
            for (&w, &t) in words.iter().zip(zs) {
                n_wt[w as usize][t as usize] += 1;
                n_dt[d][t as usize] += 1;
                n_t[t as usize] += 1;
            }
        }
        n_wt == self.n_wt && n_dt == self.n_dt && n_t == self.n_t
    }
}

/// Sweep-by-sweep collapsed Gibbs sampler.
pub struct GibbsSampler {
    k: usize,
    alpha: f64,
    beta: f64,
    vocab: Vec<String>,
    doc_ids: Vec<String>,
    docs: Vec<Vec<u32>>,
    z: Vec<Vec<u16>>,
    n_wt: Vec<u32>,
    n_dt: Vec<u32>,
    n_t: Vec<u64>,
    allowed: Vec<Option<Vec<usize>>>,
    rng: ChaCha8Rng,
    seed: u64,
    sweeps: usize,
    probs: Vec<f64>,
}

impl GibbsSampler {
    pub fn new(docs: &[(String, Vec<String>)], config: &LdaConfig, seeds: &ZLabelSeeds) -> Result<Self, TopicError> {
        let k = config.k;
        if k == 0 || k > u16::MAX as usize {
            return Err(TopicError::InvalidConfig(format!("K must be in 1..=65535, got {k}")));
        }
        if config.beta <= 0.0 || config.alpha() <= 0.0 {
            return Err(TopicError::InvalidConfig("alpha and beta must be positive".into()));
        }
        let total: usize = docs.iter().map(|(_, t)| t.len()).sum();
        if total == 0 {
            return Err(TopicError::EmptyCorpus);
        }
        for (term, allowed) in &seeds.0 {
            if allowed.is_empty() {
                return Err(TopicError::EmptySeed(term.clone()));
            }
            if let Some(&bad) = allowed.iter().find(|&&t| t >= k) {
                return Err(TopicError::TopicOutOfRange { topic: bad, k });
            }
        }

        let vocab: Vec<String> = docs
            .iter()
            .flat_map(|(_, t)| t.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index = |term: &str| vocab.binary_search_by(|v| v.as_str().cmp(term)).unwrap() as u32;
        let mut allowed: Vec<Option<Vec<usize>>> = vec![None; vocab.len()];
        for (term, topics) in &seeds.0 {
            match vocab.binary_search(term) {
                Ok(w) => allowed[w] = Some(topics.iter().copied().collect()),
                Err(_) => log::warn!("seed term `{term}` is not in the vocabulary; ignored"),
            }
        }

        let word_docs: Vec<Vec<u32>> = docs.iter().map(|(_, t)| t.iter().map(|w| index(w)).collect()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let v = vocab.len();
        let mut n_wt = vec![0u32; v * k];
        let mut n_dt = vec![0u32; docs.len() * k];
        let mut n_t = vec![0u64; k];
        let z: Vec<Vec<u16>> = word_docs
            .iter()
            .enumerate()
            .map(|(d, words)| {
                words
                    .iter()
                    .map(|&w| {
                        let t = match &allowed[w as usize] {
                            Some(a) => a[rng.gen_range(0..a.len())],
                            None => rng.gen_range(0..k),
                        };
                        n_wt[w as usize * k + t] += 1;
                        n_dt[d * k + t] += 1;
                        n_t[t] += 1;
                        t as u16
                    })
                    .collect()
            })
            .collect();

        Ok(Self {
            k,
            alpha: config.alpha(),
            beta: config.beta,
            vocab,
            doc_ids: docs.iter().map(|(d, _)| d.clone()).collect(),
            docs: word_docs,
            z,
            n_wt,
            n_dt,
            n_t,
            allowed,
            rng,
            seed: config.rng_seed,
            sweeps: 0,
            probs: vec![0.0; k],
        })
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// One pass over every token.
    pub fn sweep(&mut self) {
        let k = self.k;
        let vbeta = self.vocab.len() as f64 * self.beta;
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i] as usize;
                let old = self.z[d][i] as usize;
                self.n_wt[w * k + old] -= 1;
                self.n_dt[d * k + old] -= 1;
                self.n_t[old] -= 1;

                let weight = |t: usize, s: &Self| {
                    (s.n_dt[d * k + t] as f64 + s.alpha) * (s.n_wt[w * k + t] as f64 + s.beta)
                        / (s.n_t[t] as f64 + vbeta)
                };
                let new = match &self.allowed[w] {
                    Some(topics) => {
                        let mut total = 0.0;
                        for (j, &t) in topics.iter().enumerate() {
                            total += weight(t, self);
                            self.probs[j] = total;
                        }
                        let u = self.rng.gen::<f64>() * total;
                        let j = self.probs[..topics.len()].iter().position(|&c| u < c).unwrap_or(topics.len() - 1);
                        topics[j]
                    }
                    None => {
                        let mut total = 0.0;
                        for t in 0..k {
                            total += weight(t, self);
                            self.probs[t] = total;
                        }
                        let u = self.rng.gen::<f64>() * total;
                        self.probs.iter().position(|&c| u < c).unwrap_or(k - 1)
                    }
                };

                self.z[d][i] = new as u16;
                self.n_wt[w * k + new] += 1;
                self.n_dt[d * k + new] += 1;
                self.n_t[new] += 1;
            }
        }
        self.sweeps += 1;
    }

    /// Number of seeded tokens currently assigned outside their allowed set.
    pub fn zlabel_violations(&self) -> usize {
        self.docs
            .iter()
            .zip(&self.z)
            .flat_map(|(ws, zs)| ws.iter().zip(zs))
            .filter(|(&w, &t)| {
                self.allowed[w as usize]
                    .as_ref()
                    .is_some_and(|a| !a.contains(&(t as usize)))
            })
            .count()
    }

    pub fn snapshot(&self) -> TopicModel {
        let k = self.k;
        TopicModel {
            k,
            alpha: self.alpha,
            beta: self.beta,
            vocab: self.vocab.clone(),
            n_wt: self.n_wt.chunks(k).map(<[u32]>::to_vec).collect(),
            n_dt: self.n_dt.chunks(k).map(<[u32]>::to_vec).collect(),
            n_t: self.n_t.clone(),
            seed: self.seed,
            iterations: self.sweeps,
            doc_ids: self.doc_ids.clone(),
            docs: self.docs.clone(),
            z: self.z.clone(),
        }
    }
}

/// Train a z-label LDA model for `config.iterations` sweeps.
///
/// K = 1 is accepted as the degenerate single-topic model.
pub fn train_zlabel_lda(
    docs: &[(String, Vec<String>)],
    config: &LdaConfig,
    seeds: &ZLabelSeeds,
) -> Result<TopicModel, TopicError> {
    let mut sampler = GibbsSampler::new(docs, config, seeds)?;
    for _ in 0..config.iterations {
        sampler.sweep();
    }
    Ok(sampler.snapshot())
}
