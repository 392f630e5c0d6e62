#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::PathBuf;

use cordsearch_core::corpus::{load_corpus, Article};
use cordsearch_core::medner::{load_gazetteer, Gazetteer};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn golden(name: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(fixtures().join("golden").join(name)).unwrap()).unwrap()
}

pub fn fixture_articles() -> Vec<Article> {
    let dir = fixtures().join("corpus");
    load_corpus(&dir.join("metadata.csv"), Some(&dir.join("fulltext")), "fixture")
        .unwrap()
        .articles
}

pub fn fixture_gazetteer() -> Gazetteer {
    load_gazetteer(&fixtures().join("gazetteer.tsv")).unwrap()
}

pub fn fixture_doc_topics() -> BTreeMap<String, BTreeSet<String>> {
    serde_json::from_str(&fs::read_to_string(fixtures().join("doc_topics.json")).unwrap()).unwrap()
}

pub fn fixture_faq() -> Vec<cordsearch_core::search::FaqEntry> {
    serde_json::from_str(&fs::read_to_string(fixtures().join("faq.json")).unwrap()).unwrap()
}

/// The 50-doc fixture engine with its knowledge graph (no graph embedding).
pub fn fixture_engine() -> cordsearch_core::search::Engine {
    use cordsearch_core::ckg::build_graph;
    use cordsearch_core::medner::extract_entities;
    use cordsearch_core::search::{Engine, EngineInputs};

    let articles = fixture_articles();
    let gazetteer = fixture_gazetteer();
    let doc_topics = fixture_doc_topics();
    let mentions = articles
        .iter()
        .map(|a| (a.doc_id.clone(), extract_entities(&a.full_text(), &gazetteer)))
        .collect();
    let (graph, _) = build_graph(&articles, &mentions, &doc_topics);
    Engine::build(EngineInputs {
        articles,
        gazetteer,
        doc_topics,
        graph: Some(graph),
        faq: fixture_faq(),
        ..Default::default()
    })
    .unwrap()
}
