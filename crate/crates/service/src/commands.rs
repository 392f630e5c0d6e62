//! Artifact-producing operations behind the CLI subcommands.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use cordsearch_core::ckg::{build_graph, train_kg_embeddings, NodeKind, Relation, TransEConfig};
use cordsearch_core::corpus::{map_doc_ids, save_corpus, IdMapping};
use cordsearch_core::evalkit::{
    aggregate_qrels, evaluate_run, robustness_em_f1, AggregateReport, MetricReport, MetricSpec, PooledResult, Qrels,
    QueryResults, RobustnessReport, RunFile, SystemResults, TopicSet,
};
use cordsearch_core::search::{Engine, QueryMode, SearchRequest};
use cordsearch_core::synth::{synthetic_corpus, synthetic_gazetteer_tsv};
use cordsearch_core::topics::{
    curate, derive_doc_labels, evaluate_f1, train_classifier, train_zlabel_lda, ClassifierConfig, CurationOp,
    CuratedTopics, F1Report, LdaConfig, TopicClassifier, TopicModel, ZLabelSeeds, CURATED_TOPIC_NAMES,
};

use crate::datadir::{
    read_json, write_atomic, write_json, DataDir, CLASSIFIER, CURATED, DOC_TOPICS, EMBEDDING, LDA_MODEL, TOPIC_NAMES,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicTerms {
    pub topic: usize,
    pub terms: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaSummary {
    pub k: usize,
    pub iterations: usize,
    pub docs: usize,
    pub vocab: usize,
    pub counts_consistent: bool,
    pub topics: Vec<TopicTerms>,
}

pub fn topics_train(dir: &DataDir, config: &LdaConfig, seeds: Option<&Path>, top_n: usize) -> Result<LdaSummary> {
    let seeds = match seeds {
        Some(p) => ZLabelSeeds::load(p)?,
        None => ZLabelSeeds::new(),
    };
    let docs = dir.token_docs()?;
    let model = train_zlabel_lda(&docs, config, &seeds)?;
    dir.write(LDA_MODEL, &model)?;
    let topics = (0..model.k)
        .map(|t| {
            Ok(TopicTerms {
                topic: t,
                terms: model.top_terms(t, top_n)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LdaSummary {
        k: model.k,
        iterations: model.iterations,
        docs: model.doc_ids.len(),
        vocab: model.vocab_len(),
        counts_consistent: model.counts_consistent(),
        topics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationSummary {
    pub names: Vec<String>,
    pub mapping: Vec<Option<usize>>,
    pub doc_counts: BTreeMap<String, usize>,
    pub avg_labels_per_doc: f64,
}

/// Apply curation operations to the trained model and relabel every
/// document from its curated θ.
pub fn topics_curate(dir: &DataDir, ops: &[CurationOp], assign_threshold: f64) -> Result<CurationSummary> {
    let model: TopicModel = dir.read(LDA_MODEL)?;
    let curated: CuratedTopics = curate(&model, ops)?;
    let labels = derive_doc_labels(&model, &curated, assign_threshold)?;
    dir.write(CURATED, &curated)?;
    dir.write(DOC_TOPICS, &labels)?;
    dir.write(TOPIC_NAMES, &curated.names)?;
    let mut doc_counts: BTreeMap<String, usize> = curated.names.iter().map(|n| (n.clone(), 0)).collect();
    for l in labels.values().flatten() {
        *doc_counts.entry(l.clone()).or_default() += 1;
    }
    let total: usize = labels.values().map(BTreeSet::len).sum();
    Ok(CurationSummary {
        names: curated.names,
        mapping: curated.mapping,
        doc_counts,
        avg_labels_per_doc: total as f64 / labels.len().max(1) as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifySummary {
    pub labels: Vec<String>,
    pub train_docs: usize,
    pub test_docs: usize,
    /// Held-out scores against the gold labels.
    pub held_out: F1Report,
    /// Documents without gold labels that received predicted ones.
    pub newly_labelled: usize,
}

/// Train one-vs-rest classifiers on a seeded split of the labelled
/// documents, score the held-out part and, with `apply`, label every
/// document that has no gold labels.
pub fn topics_classify(
    dir: &DataDir,
    config: &ClassifierConfig,
    test_fraction: f64,
    threshold: f64,
    apply: bool,
) -> Result<ClassifySummary> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::user(format!("test fraction must lie in [0, 1), got {test_fraction}")));
    }
    let gold = dir.doc_topics()?;
    let docs = dir.token_docs()?;
    let mut labelled: Vec<&(String, Vec<String>)> = docs.iter().filter(|(d, _)| gold.contains_key(d)).collect();
    if labelled.is_empty() {
        return Err(Error::user("no labelled documents; run `topics curate` or supply doc_topics"));
    }
    labelled.shuffle(&mut ChaCha8Rng::seed_from_u64(config.rng_seed));
    let n_test = (labelled.len() as f64 * test_fraction).round() as usize;
    let (test, train) = labelled.split_at(n_test);
    let train: Vec<(String, Vec<String>)> = train.iter().map(|d| (*d).clone()).collect();
    let mut names: Vec<String> = dir.topic_names()?;
    if names.is_empty() {
        names = gold.values().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    }
    let mut classifier: TopicClassifier = train_classifier(&train, &gold, &names, config)?;
    classifier.threshold = threshold;

    let test_gold: BTreeMap<String, BTreeSet<String>> =
        test.iter().map(|(d, _)| (d.clone(), gold[d].clone())).collect();
    let test_pred: BTreeMap<String, BTreeSet<String>> =
        test.iter().map(|(d, t)| (d.clone(), classifier.predict(t))).collect();
    let held_out = evaluate_f1(&test_gold, &test_pred)?;
    dir.write(CLASSIFIER, &classifier)?;

    let mut newly_labelled = 0;
    if apply {
        let mut all = gold.clone();
        for (d, tokens) in docs.iter().filter(|(d, _)| !gold.contains_key(d)) {
            let pred = classifier.predict(tokens);
            if !pred.is_empty() {
                newly_labelled += 1;
                all.insert(d.clone(), pred);
            }
        }
        dir.write(DOC_TOPICS, &all)?;
    }
    Ok(ClassifySummary {
        labels: classifier.label_set.clone(),
        train_docs: train.len(),
        test_docs: test.len(),
        held_out,
        newly_labelled,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub nodes: BTreeMap<String, usize>,
    pub triples: BTreeMap<String, usize>,
    pub dangling_citations: usize,
}

const NODE_KINDS: [NodeKind; 5] = [
    NodeKind::Article,
    NodeKind::Author,
    NodeKind::Institution,
    NodeKind::Topic,
    NodeKind::MedicalEntity,
];

pub fn kg_build(dir: &DataDir) -> Result<GraphSummary> {
    let articles = dir.articles()?;
    let mentions = dir.mentions(&articles)?;
    let (graph, stats) = build_graph(&articles, &mentions, &dir.doc_topics()?);
    dir.write_graph(&graph)?;
    // the old embedding no longer matches the graph
    let stale = dir.path(EMBEDDING);
    if stale.is_file() {
        fs::remove_file(&stale).map_err(|e| Error::write(&stale, e))?;
    }
    Ok(GraphSummary {
        nodes: NODE_KINDS
            .iter()
            .map(|k| (k.prefix().to_string(), graph.node_count(*k)))
            .collect(),
        triples: Relation::ALL.iter().map(|r| (r.as_str().to_string(), graph.triple_count(*r))).collect(),
        dangling_citations: stats.dangling_citations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSummary {
    pub dim: usize,
    pub epochs: usize,
    pub entities: usize,
    pub first_loss: Option<f64>,
    pub final_loss: Option<f64>,
}

pub fn kg_train(dir: &DataDir, config: &TransEConfig) -> Result<EmbeddingSummary> {
    let graph = dir
        .graph()?
        .ok_or_else(|| Error::user("no knowledge graph in the data directory; run `kg build` first"))?;
    let (embedding, report) = train_kg_embeddings(&graph, config)?;
    dir.write(EMBEDDING, &embedding)?;
    Ok(EmbeddingSummary {
        dim: embedding.dim,
        epochs: report.epoch_losses.len(),
        entities: embedding.entity_vectors.len(),
        first_loss: report.epoch_losses.first().copied(),
        final_loss: report.epoch_losses.last().copied(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrReport {
    pub metrics: MetricReport,
    pub aggregate: AggregateReport,
}

/// Score a run against one or more judgement rounds. With a data directory
/// the rounds are first mapped onto its doc ids, using `id_titles` for ids
/// that changed between releases.
pub fn eval_dr(
    run: &Path,
    qrels: &[PathBuf],
    spec: &MetricSpec,
    dir: Option<&DataDir>,
    id_titles: Option<&Path>,
) -> Result<DrReport> {
    if qrels.is_empty() {
        return Err(Error::user("at least one qrels file is required"));
    }
    let run = RunFile::load(run)?;
    let rounds = qrels.iter().map(|p| Qrels::load(p)).collect::<std::result::Result<Vec<_>, _>>()?;
    let ids: BTreeSet<&str> = rounds
        .iter()
        .flat_map(|r| r.judgements.values().flat_map(|d| d.keys().map(String::as_str)))
        .collect();
    let mapping = match dir {
        Some(dir) => {
            let titles: BTreeMap<String, String> = match id_titles {
                Some(p) => read_json(p)?,
                None => BTreeMap::new(),
            };
            let manifest = dir.manifest()?;
            map_doc_ids(ids.iter().map(|id| (*id, titles.get(*id).map_or("", String::as_str))), &manifest)
        }
        None => IdMapping::identity(ids.iter().copied()),
    };
    let (merged, aggregate) = aggregate_qrels(&rounds, &mapping);
    Ok(DrReport {
        metrics: evaluate_run(&run, &merged, spec),
        aggregate,
    })
}

pub fn eval_robustness(
    nq: &Path,
    kq: &Path,
    k: usize,
    dir: Option<&DataDir>,
    titles: Option<&Path>,
) -> Result<RobustnessReport> {
    let titles: BTreeMap<String, String> = match (titles, dir) {
        (Some(p), _) => read_json(p)?,
        (None, Some(dir)) => dir.articles()?.into_iter().map(|a| (a.doc_id, a.title)).collect(),
        (None, None) => return Err(Error::user("titles come from --titles or --data-dir; neither was given")),
    };
    Ok(robustness_em_f1(&RunFile::load(nq)?, &RunFile::load(kq)?, &titles, k)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum QueryField {
    /// Keyword query.
    Kq,
    /// Natural-language question.
    Nq,
}

fn topic_request(topic: &cordsearch_core::evalkit::Topic, field: QueryField, k: usize) -> SearchRequest {
    let (query, mode) = match field {
        QueryField::Kq => (topic.keyword_query.clone(), QueryMode::Keyword),
        QueryField::Nq => (topic.natural_question.clone(), QueryMode::NaturalLanguage),
    };
    SearchRequest {
        query,
        topics: BTreeSet::new(),
        mode: Some(mode),
        k: Some(k),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub out: PathBuf,
    pub topics: usize,
    pub skipped: Vec<String>,
    pub results: usize,
}

/// Search every topic and write a TREC run file. Topics whose query has no
/// searchable terms are skipped.
pub fn eval_run(engine: &Engine, topics: &TopicSet, field: QueryField, k: usize, tag: &str, out: &Path) -> Result<RunSummary> {
    let mut lists = BTreeMap::new();
    let mut skipped = Vec::new();
    for t in &topics.topics {
        match engine.search(&topic_request(t, field, k)) {
            Ok(r) => {
                lists.insert(t.topic_id.clone(), r.docs.into_iter().map(|d| (d.doc_id, d.score)).collect());
            }
            Err(cordsearch_core::search::SearchError::EmptyQuery) => skipped.push(t.topic_id.clone()),
            Err(e) => return Err(e.into()),
        }
    }
    let run = RunFile::from_scored(tag, lists)?;
    write_atomic(out, run.to_trec().as_bytes())?;
    Ok(RunSummary {
        out: out.to_path_buf(),
        topics: run.topics.len(),
        skipped,
        results: run.topics.values().map(Vec::len).sum(),
    })
}

/// Top-3 displayed results per topic, the input of a blind pool.
pub fn eval_results(engine: &Engine, topics: &TopicSet, field: QueryField, system: &str) -> Result<SystemResults> {
    let mut queries = BTreeMap::new();
    for t in &topics.topics {
        let request = topic_request(t, field, 3);
        let response = match engine.search(&request) {
            Ok(r) => r,
            Err(cordsearch_core::search::SearchError::EmptyQuery) => continue,
            Err(e) => return Err(e.into()),
        };
        let results = response
            .docs
            .iter()
            .map(|d| {
                let passage = response.passages.iter().find(|p| p.doc_id == d.doc_id);
                let highlight = passage.and_then(|p| {
                    response
                        .answers
                        .iter()
                        .find(|a| a.doc_id == p.doc_id && a.passage_index == p.passage_index)
                        .map(|a| a.text.clone())
                });
                PooledResult {
                    doc_id: d.doc_id.clone(),
                    title: d.title.clone(),
                    passage: passage.map_or_else(|| d.snippet.clone(), |p| p.text.clone()),
                    highlight,
                }
            })
            .collect();
        queries.insert(
            t.topic_id.clone(),
            QueryResults {
                query: request.query,
                results,
            },
        );
    }
    Ok(SystemResults {
        system: system.to_string(),
        queries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub out: PathBuf,
    pub docs: usize,
    pub config: PathBuf,
}

/// Write a synthetic corpus with its gazetteer, labels and a ready-to-use
/// `index build` config.
pub fn synth_corpus(out: &Path, docs: usize, seed: u64) -> Result<SynthSummary> {
    let corpus = synthetic_corpus(docs, seed);
    let corpus_dir = out.join("corpus");
    fs::create_dir_all(&corpus_dir).map_err(|e| Error::write(&corpus_dir, e))?;
    save_corpus(
        &corpus.articles,
        &corpus_dir.join("metadata.csv"),
        &corpus_dir.join("fulltext"),
    )
    .map_err(|e| Error::internal(e.to_string()))?;
    write_atomic(&out.join("gazetteer.tsv"), synthetic_gazetteer_tsv().as_bytes())?;
    write_json(&out.join("doc_topics.json"), &corpus.doc_topics)?;
    let names: Vec<String> = CURATED_TOPIC_NAMES.iter().map(|s| s.to_string()).collect();
    let config = format!(
        "release = \"synthetic-{seed}\"\nmetadata = \"corpus/metadata.csv\"\nfulltext = \"corpus/fulltext\"\n\
         gazetteer = \"gazetteer.tsv\"\ndoc_topics = \"doc_topics.json\"\ntopic_names = {}\noutput = \"data\"\n",
        serde_json::to_string(&names).map_err(|e| Error::internal(e.to_string()))?
    );
    let config_path = out.join("config.toml");
    write_atomic(&config_path, config.as_bytes())?;
    Ok(SynthSummary {
        out: out.to_path_buf(),
        docs,
        config: config_path,
    })
}
