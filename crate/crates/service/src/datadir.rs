//! On-disk layout of a built index. The engine itself is rebuilt from these
//! files on load, so a data directory only ever holds plain inputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use cordsearch_core::ckg::{build_graph, KgEmbedding, KnowledgeGraph};
use cordsearch_core::corpus::{load_corpus, Article, CorpusManifest, IngestReport};
use cordsearch_core::medner::{extract_entities_with, load_gazetteer, EntityMention, Gazetteer};
use cordsearch_core::search::{Engine, EngineInputs, FaqEntry, SearchConfig};
use cordsearch_core::text::Analyzer;
use cordsearch_core::topics::CURATED_TOPIC_NAMES;

use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const ARTICLES: &str = "articles.jsonl";
pub const GAZETTEER: &str = "gazetteer.tsv";
pub const FAQ: &str = "faq.json";
pub const DOC_TOPICS: &str = "doc_topics.json";
pub const TOPIC_NAMES: &str = "topics.json";
pub const SEARCH_CONFIG: &str = "search_config.json";
pub const STOPWORDS: &str = "stopwords.txt";
pub const GRAPH: &str = "graph.tsv";
pub const EMBEDDING: &str = "embedding.json";
pub const LDA_MODEL: &str = "topics/lda.json";
pub const CURATED: &str = "topics/curated.json";
pub const CLASSIFIER: &str = "topics/classifier.json";
pub const SESSIONS_LOG: &str = "sessions.jsonl";
pub const FEEDBACK_LOG: &str = "feedback.jsonl";

fn default_release() -> String {
    "unversioned".into()
}

fn default_true() -> bool {
    true
}

/// `index build` configuration. Relative paths resolve against the directory
/// of the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildConfig {
    #[serde(default = "default_release")]
    pub release: String,
    pub metadata: PathBuf,
    #[serde(default)]
    pub fulltext: Option<PathBuf>,
    pub gazetteer: PathBuf,
    #[serde(default)]
    pub faq: Option<PathBuf>,
    /// JSON map doc_id → topic names.
    #[serde(default)]
    pub doc_topics: Option<PathBuf>,
    /// Defaults to the ten curated topic names.
    #[serde(default)]
    pub topic_names: Option<Vec<String>>,
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
    pub output: PathBuf,
    /// Build the knowledge graph alongside the index.
    #[serde(default = "default_true")]
    pub graph: bool,
    #[serde(default)]
    pub search: SearchConfig,
}

impl BuildConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::read(path, e))?;
        let mut config: BuildConfig = toml::from_str(&text).map_err(|e| Error::read(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.metadata);
        resolve(&mut config.gazetteer);
        resolve(&mut config.output);
        for p in [&mut config.fulltext, &mut config.faq, &mut config.doc_topics, &mut config.stopwords]
            .into_iter()
            .flatten()
        {
            resolve(p);
        }
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub output: PathBuf,
    pub release: String,
    pub doc_count: usize,
    pub ingest: IngestReport,
    pub gazetteer_entries: usize,
    pub faq_entries: usize,
    pub labelled_docs: usize,
    pub graph_triples: Option<usize>,
    pub dangling_citations: Option<usize>,
    pub seconds: f64,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::read(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::read(path, e))
}

/// Write through a temporary file and rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::write(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::write(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::write(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::internal(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

#[derive(Debug, Clone)]
pub struct DataDir {
    root: PathBuf,
}

impl DataDir {
    /// Open an existing data directory.
    pub fn open(root: &Path) -> Result<Self> {
        if !root.join(MANIFEST).is_file() {
            return Err(Error::user(format!(
                "{} is not a data directory (no {MANIFEST}); run `index build` first",
                root.display()
            )));
        }
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn has(&self, name: &str) -> bool {
        self.path(name).is_file()
    }

    pub fn read<T: DeserializeOwned>(&self, name: &str) -> Result<T> {
        read_json(&self.path(name))
    }

    pub fn write<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<()> {
        write_json(&self.path(name), value)
    }

    pub fn manifest(&self) -> Result<CorpusManifest> {
        self.read(MANIFEST)
    }

    pub fn articles(&self) -> Result<Vec<Article>> {
        let path = self.path(ARTICLES);
        let file = fs::File::open(&path).map_err(|e| Error::read(&path, e))?;
        let mut out = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::read(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| Error::read(&path, format!("line {}: {e}", n + 1)))?);
        }
        Ok(out)
    }

    pub fn analyzer(&self) -> Result<Analyzer> {
        let path = self.path(STOPWORDS);
        if path.is_file() {
            Analyzer::from_stopword_file(&path).map_err(|e| Error::read(&path, e))
        } else {
            Ok(Analyzer::default())
        }
    }

    pub fn gazetteer(&self) -> Result<Gazetteer> {
        Ok(load_gazetteer(&self.path(GAZETTEER))?)
    }

    pub fn search_config(&self) -> Result<SearchConfig> {
        if self.has(SEARCH_CONFIG) {
            self.read(SEARCH_CONFIG)
        } else {
            Ok(SearchConfig::default())
        }
    }

    pub fn doc_topics(&self) -> Result<BTreeMap<String, BTreeSet<String>>> {
        if self.has(DOC_TOPICS) {
            self.read(DOC_TOPICS)
        } else {
            Ok(BTreeMap::new())
        }
    }

    pub fn topic_names(&self) -> Result<Vec<String>> {
        if self.has(TOPIC_NAMES) {
            self.read(TOPIC_NAMES)
        } else {
            Ok(Vec::new())
        }
    }

    pub fn graph(&self) -> Result<Option<KnowledgeGraph>> {
        let path = self.path(GRAPH);
        if !path.is_file() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::read(&path, e))?;
        Ok(Some(KnowledgeGraph::from_triples_tsv(&text)?))
    }

    pub fn write_graph(&self, graph: &KnowledgeGraph) -> Result<()> {
        write_atomic(&self.path(GRAPH), graph.to_triples_tsv().as_bytes())
    }

    pub fn embedding(&self) -> Result<Option<KgEmbedding>> {
        if self.has(EMBEDDING) {
            self.read(EMBEDDING).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn faq(&self) -> Result<Vec<FaqEntry>> {
        if self.has(FAQ) {
            self.read(FAQ)
        } else {
            Ok(Vec::new())
        }
    }

    /// Entity mentions of every article, as the engine extracts them.
    pub fn mentions(&self, articles: &[Article]) -> Result<BTreeMap<String, Vec<EntityMention>>> {
        let gazetteer = self.gazetteer()?;
        let window = self.search_config()?.negation_window;
        Ok(articles
            .iter()
            .map(|a| (a.doc_id.clone(), extract_entities_with(&a.full_text(), &gazetteer, window)))
            .collect())
    }

    /// Analyzed tokens of every article in doc_id order.
    pub fn token_docs(&self) -> Result<Vec<(String, Vec<String>)>> {
        let analyzer = self.analyzer()?;
        let mut articles = self.articles()?;
        articles.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        Ok(articles
            .iter()
            .map(|a| (a.doc_id.clone(), analyzer.tokenize(&a.full_text())))
            .collect())
    }

    pub fn engine_inputs(&self) -> Result<EngineInputs> {
        Ok(EngineInputs {
            articles: self.articles()?,
            gazetteer: self.gazetteer()?,
            doc_topics: self.doc_topics()?,
            topic_names: self.topic_names()?,
            graph: self.graph()?,
            embedding: self.embedding()?,
            faq: self.faq()?,
            config: self.search_config()?,
            analyzer: self.analyzer()?,
        })
    }

    pub fn load_engine(&self) -> Result<Engine> {
        Ok(Engine::build(self.engine_inputs()?)?)
    }
}

fn write_articles(path: &Path, articles: &[Article]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let file = fs::File::create(&tmp).map_err(|e| Error::write(&tmp, e))?;
    let mut w = BufWriter::new(file);
    for a in articles {
        serde_json::to_writer(&mut w, a).map_err(|e| Error::write(&tmp, e))?;
        w.write_all(b"\n").map_err(|e| Error::write(&tmp, e))?;
    }
    w.flush().map_err(|e| Error::write(&tmp, e))?;
    drop(w);
    fs::rename(&tmp, path).map_err(|e| Error::write(path, e))
}

/// Ingest a corpus, build the engine once to validate everything, and write
/// the data directory.
pub fn build_index(config: &BuildConfig) -> Result<BuildSummary> {
    let started = Instant::now();
    config.search.validate()?;
    let loaded = load_corpus(&config.metadata, config.fulltext.as_deref(), &config.release)?;
    let gazetteer = load_gazetteer(&config.gazetteer)?;
    let analyzer = match &config.stopwords {
        Some(p) => Analyzer::from_stopword_file(p).map_err(|e| Error::read(p, e))?,
        None => Analyzer::default(),
    };
    let faq: Vec<FaqEntry> = match &config.faq {
        Some(p) => read_json(p)?,
        None => Vec::new(),
    };
    let known: BTreeSet<&str> = loaded.articles.iter().map(|a| a.doc_id.as_str()).collect();
    let mut doc_topics: BTreeMap<String, BTreeSet<String>> = match &config.doc_topics {
        Some(p) => read_json(p)?,
        None => BTreeMap::new(),
    };
    let before = doc_topics.len();
    doc_topics.retain(|d, _| known.contains(d.as_str()));
    if doc_topics.len() < before {
        log::warn!("{} topic labels refer to documents outside the corpus", before - doc_topics.len());
    }
    let topic_names = config
        .topic_names
        .clone()
        .unwrap_or_else(|| CURATED_TOPIC_NAMES.iter().map(|s| s.to_string()).collect());

    let mut graph_stats = None;
    let graph = if config.graph {
        let mentions = loaded
            .articles
            .iter()
            .map(|a| {
                let ms = extract_entities_with(&a.full_text(), &gazetteer, config.search.negation_window);
                (a.doc_id.clone(), ms)
            })
            .collect();
        let (graph, stats) = build_graph(&loaded.articles, &mentions, &doc_topics);
        graph_stats = Some((graph.triples().len(), stats.dangling_citations));
        Some(graph)
    } else {
        None
    };

    let engine = Engine::build(EngineInputs {
        articles: loaded.articles.clone(),
        gazetteer: gazetteer.clone(),
        doc_topics: doc_topics.clone(),
        topic_names: topic_names.clone(),
        graph: graph.clone(),
        embedding: None,
        faq: faq.clone(),
        config: config.search.clone(),
        analyzer,
    })?;

    let out = &config.output;
    fs::create_dir_all(out).map_err(|e| Error::write(out, e))?;
    // a rebuilt corpus invalidates every derived artifact
    for stale in [EMBEDDING, GRAPH, LDA_MODEL, CURATED, CLASSIFIER, STOPWORDS] {
        let p = out.join(stale);
        if p.is_file() {
            fs::remove_file(&p).map_err(|e| Error::write(&p, e))?;
        }
    }
    write_articles(&out.join(ARTICLES), &loaded.articles)?;
    write_atomic(&out.join(GAZETTEER), gazetteer.to_tsv().as_bytes())?;
    write_json(&out.join(FAQ), &faq)?;
    write_json(&out.join(DOC_TOPICS), &doc_topics)?;
    write_json(&out.join(TOPIC_NAMES), &topic_names)?;
    write_json(&out.join(SEARCH_CONFIG), &config.search)?;
    if let Some(p) = &config.stopwords {
        fs::copy(p, out.join(STOPWORDS)).map_err(|e| Error::write(&out.join(STOPWORDS), e))?;
    }
    if let Some(g) = &graph {
        write_atomic(&out.join(GRAPH), g.to_triples_tsv().as_bytes())?;
    }
    // manifest last: its presence marks a complete directory
    write_json(&out.join(MANIFEST), &loaded.manifest)?;

    Ok(BuildSummary {
        output: out.clone(),
        release: config.release.clone(),
        doc_count: engine.doc_count(),
        ingest: loaded.report,
        gazetteer_entries: gazetteer.len(),
        faq_entries: faq.len(),
        labelled_docs: doc_topics.len(),
        graph_triples: graph_stats.map(|s| s.0),
        dangling_citations: graph_stats.map(|s| s.1),
        seconds: started.elapsed().as_secs_f64(),
    })
}
