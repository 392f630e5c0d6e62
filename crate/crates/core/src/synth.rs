//! Deterministic synthetic data for benchmarks, fuzzing and model checks.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Article;
use crate::topics::CURATED_TOPIC_NAMES;

/// A document id with its tokens.
pub type TokenDoc = (String, Vec<String>);

const MEDICATIONS: [&str; 8] = [
    "ribavirin",
    "hydroxychloroquine",
    "chloroquine",
    "remdesivir",
    "lopinavir",
    "corticosteroids",
    "interferon",
    "tocilizumab",
];

const CONDITIONS: [&str; 8] = [
    "pneumonia",
    "fever",
    "cough",
    "sepsis",
    "myocarditis",
    "anosmia",
    "hypoxemia",
    "acute respiratory distress syndrome",
];

const ANATOMY: [&str; 4] = ["lung", "kidney", "liver", "heart"];

const PROCEDURES: [&str; 4] = ["pcr", "ct scan", "intubation", "serology"];

/// Topic-flavoured vocabulary, aligned with [`CURATED_TOPIC_NAMES`].
const THEME_WORDS: [[&str; 8]; 10] = [
    ["patients", "hospital", "symptoms", "clinical", "cohort", "admission", "severity", "outcomes"],
    ["dosage", "trial", "therapy", "randomized", "efficacy", "placebo", "regimen", "antiviral"],
    ["diagnosis", "assay", "screening", "sensitivity", "specificity", "detection", "imaging", "testing"],
    ["transmission", "incidence", "outbreak", "prevalence", "reproduction", "spread", "cases", "surveillance"],
    ["genome", "sequence", "mutation", "phylogenetic", "strain", "lineage", "variant", "evolution"],
    ["lockdown", "distancing", "policy", "mobility", "quarantine", "masks", "intervention", "closure"],
    ["bats", "zoonotic", "reservoir", "pangolin", "spillover", "wildlife", "animal", "host"],
    ["vaccine", "antibody", "immunization", "epitope", "adjuvant", "neutralizing", "dose", "candidate"],
    ["protein", "spike", "receptor", "binding", "ace2", "cleavage", "structure", "entry"],
    ["incubation", "period", "latency", "onset", "shedding", "duration", "interval", "viral"],
];

const FILLER: [&str; 24] = [
    "study", "analysis", "results", "data", "model", "observed", "reported", "significant", "associated", "increased",
    "compared", "group", "levels", "response", "factors", "population", "evidence", "methods", "review", "samples",
    "infection", "disease", "coronavirus", "covid",
];

const TEMPORAL_FACTS: [&str; 5] = ["5-6 days", "3 to 14 days", "2 weeks", "10 days", "24 hours"];

/// Gazetteer rows (TSV) covering every entity the synthetic corpus mentions.
pub fn synthetic_gazetteer_tsv() -> String {
    let mut out = String::new();
    let mut row = |surface: &str, id: String, cat: &str| {
        out.push_str(&format!("{surface}\t{id}\t{cat}\n"));
    };
    for (i, m) in MEDICATIONS.iter().enumerate() {
        row(m, format!("RX{:03}", i + 1), "Medication");
    }
    row("hcq", "RX002".into(), "Medication");
    for (i, c) in CONDITIONS.iter().enumerate() {
        row(c, format!("MC{:03}", i + 1), "MedicalCondition");
    }
    row("ards", "MC008".into(), "MedicalCondition");
    for (i, a) in ANATOMY.iter().enumerate() {
        row(a, format!("AN{:03}", i + 1), "Anatomy");
    }
    for (i, p) in PROCEDURES.iter().enumerate() {
        row(p, format!("TP{:03}", i + 1), "TestTreatmentProcedure");
    }
    out
}

/// A synthetic corpus with its gold topic labels.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub articles: Vec<Article>,
    pub doc_topics: BTreeMap<String, BTreeSet<String>>,
}

fn sentence(rng: &mut ChaCha8Rng, themes: &[usize], len: usize) -> String {
    let mut words: Vec<String> = Vec::with_capacity(len + 4);
    for _ in 0..len {
        let w = if rng.gen_bool(0.55) {
            let t = themes[rng.gen_range(0..themes.len())];
            THEME_WORDS[t][rng.gen_range(0..8)]
        } else {
            FILLER[rng.gen_range(0..FILLER.len())]
        };
        words.push(w.to_string());
    }
    match rng.gen_range(0..10) {
        0 | 1 => words.push(format!("with {}", MEDICATIONS.choose(rng).unwrap())),
        2 | 3 => words.push(format!("and {}", CONDITIONS.choose(rng).unwrap())),
        4 => words.push(format!("in the {}", ANATOMY.choose(rng).unwrap())),
        5 => words.push(format!("by {}", PROCEDURES.choose(rng).unwrap())),
        6 => words.push(format!("over {}", TEMPORAL_FACTS.choose(rng).unwrap())),
        7 => words.push(format!("in {} patients", rng.gen_range(10..500))),
        _ => {}
    }
    let mut s = words.join(" ");
    if let Some(first) = s.get(..1) {
        s.replace_range(..1, &first.to_uppercase());
    }
    s.push('.');
    s
}

fn paragraph(rng: &mut ChaCha8Rng, themes: &[usize], sentences: usize) -> String {
    (0..sentences)
        .map(|_| {
            let len = rng.gen_range(8..16);
            sentence(rng, themes, len)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Generate `n_docs` articles. Each article draws one or two themes that
/// shape its vocabulary and become its gold topic labels.
pub fn synthetic_corpus(n_docs: usize, seed: u64) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let authors: Vec<String> = (0..60).map(|i| format!("Author {i:02}")).collect();
    let institutions: Vec<String> = (0..15).map(|i| format!("Institute {i:02}")).collect();
    let width = n_docs.max(1).to_string().len().max(4);
    let mut articles = Vec::with_capacity(n_docs);
    let mut doc_topics = BTreeMap::new();
    for i in 0..n_docs {
        let doc_id = format!("syn{i:0width$}");
        let mut themes = vec![rng.gen_range(0..10)];
        if rng.gen_bool(0.4) {
            let t = rng.gen_range(0..10);
            if t != themes[0] {
                themes.push(t);
            }
        }
        let title_len = rng.gen_range(5..9);
        let mut title = sentence(&mut rng, &themes, title_len);
        title.pop();
        title.push_str(&format!(" {i}"));
        let n_auth = rng.gen_range(1..4);
        let cited: BTreeSet<String> = if i > 0 {
            (0..rng.gen_range(0..4)).map(|_| format!("syn{:0width$}", rng.gen_range(0..i))).collect()
        } else {
            BTreeSet::new()
        };
        articles.push(Article {
            doc_id: doc_id.clone(),
            title,
            abstract_text: paragraph(&mut rng, &themes, 4),
            body: paragraph(&mut rng, &themes, 12),
            authors: authors.choose_multiple(&mut rng, n_auth).cloned().collect(),
            institutions: vec![institutions.choose(&mut rng).unwrap().clone()],
            cited_doc_ids: cited.into_iter().collect(),
            publish_date: Some(format!("2020-{:02}-{:02}", rng.gen_range(1..13), rng.gen_range(1..29))),
            source: "synthetic".into(),
        });
        doc_topics.insert(doc_id, themes.iter().map(|&t| CURATED_TOPIC_NAMES[t].to_string()).collect());
    }
    SyntheticCorpus { articles, doc_topics }
}

/// A mix of keyword queries and natural-language questions over the
/// synthetic vocabulary.
pub fn synthetic_queries(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let theme = &THEME_WORDS[rng.gen_range(0..10)];
            let w1 = theme[rng.gen_range(0..8)];
            let w2 = theme[rng.gen_range(0..8)];
            let cond = CONDITIONS.choose(&mut rng).unwrap();
            let med = MEDICATIONS.choose(&mut rng).unwrap();
            match rng.gen_range(0..6) {
                0 => format!("{w1} {w2}"),
                1 => format!("{med} {cond}"),
                2 => format!("What is the incubation period of {cond}?"),
                3 => format!("Which medications were used for {cond}?"),
                4 => format!("How many patients received {med}?"),
                _ => format!("When does {w1} {w2} occur?"),
            }
        })
        .collect()
}

/// Documents drawn from a known LDA model with block-structured topics.
#[derive(Debug, Clone)]
pub struct LdaFixture {
    pub vocab: Vec<String>,
    /// True topic-word distributions, `k × vocab`.
    pub phi: Vec<Vec<f64>>,
    pub docs: Vec<(String, Vec<String>)>,
}

/// `k` topics over `vocab_size` words. Topic `t` puts 90% of its mass
/// uniformly on its own block of words and spreads the rest over the whole
/// vocabulary. Each document draws 80% of its tokens from one dominant topic.
pub fn lda_fixture(n_docs: usize, vocab_size: usize, k: usize, doc_len: usize, seed: u64) -> LdaFixture {
    assert!(k > 0 && vocab_size >= k, "need at least one word per topic");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab: Vec<String> = (0..vocab_size).map(|i| format!("w{i:03}")).collect();
    let block = vocab_size / k;
    let phi: Vec<Vec<f64>> = (0..k)
        .map(|t| {
            (0..vocab_size)
                .map(|w| {
                    let in_block = w / block == t || (t == k - 1 && w >= block * k);
                    let own = if t == k - 1 { vocab_size - block * (k - 1) } else { block };
                    0.1 / vocab_size as f64 + if in_block { 0.9 / own as f64 } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let draw = |rng: &mut ChaCha8Rng, dist: &[f64]| {
        let mut u: f64 = rng.gen();
        for (i, p) in dist.iter().enumerate() {
            if u < *p {
                return i;
            }
            u -= p;
        }
        dist.len() - 1
    };
    let docs = (0..n_docs)
        .map(|d| {
            let main = rng.gen_range(0..k);
            let tokens = (0..doc_len)
                .map(|_| {
                    let t = if k == 1 || rng.gen_bool(0.8) { main } else { rng.gen_range(0..k) };
                    vocab[draw(&mut rng, &phi[t])].clone()
                })
                .collect();
            (format!("d{d:04}"), tokens)
        })
        .collect();
    LdaFixture { vocab, phi, docs }
}

/// Multi-label documents where every label owns five signature words that
/// appear only in documents carrying that label.
pub fn separable_multilabel(n_docs: usize, labels: &[String], seed: u64) -> (Vec<TokenDoc>, BTreeMap<String, BTreeSet<String>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(n_docs);
    let mut gold = BTreeMap::new();
    for d in 0..n_docs {
        let id = format!("m{d:04}");
        let n_labels = rng.gen_range(1..=3.min(labels.len()));
        let chosen: BTreeSet<usize> = (0..labels.len()).collect::<Vec<_>>().choose_multiple(&mut rng, n_labels).copied().collect();
        let mut tokens = Vec::new();
        for &l in &chosen {
            for _ in 0..rng.gen_range(6..10) {
                tokens.push(format!("sig{l}x{}", rng.gen_range(0..5)));
            }
        }
        for _ in 0..rng.gen_range(10..20) {
            tokens.push(FILLER[rng.gen_range(0..FILLER.len())].to_string());
        }
        tokens.shuffle(&mut rng);
        gold.insert(id.clone(), chosen.iter().map(|&l| labels[l].clone()).collect());
        docs.push((id, tokens));
    }
    (docs, gold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic() {
        let a = synthetic_corpus(20, 3);
        let b = synthetic_corpus(20, 3);
        assert_eq!(a.articles, b.articles);
        assert_eq!(a.doc_topics, b.doc_topics);
        assert!(a.articles.iter().all(|x| !x.title.is_empty() && x.cited_doc_ids.iter().all(|c| c < &x.doc_id)));
    }

    #[test]
    fn lda_fixture_rows_are_distributions() {
        let f = lda_fixture(10, 60, 3, 20, 1);
        for row in &f.phi {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(f.docs.iter().all(|(_, t)| t.len() == 20));
    }
}
