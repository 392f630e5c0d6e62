use std::ffi::OsString;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cordsearch_core::ckg::TransEConfig;
use cordsearch_core::evalkit::{prepare_blind_pool, read_sheet, score_prqa, write_sheet, MetricSpec, PoolMapping, SystemResults, TopicSet};
use cordsearch_core::topics::{ClassifierConfig, CurationOp, LdaConfig, CONFIDENCE_THRESHOLD, DEFAULT_ASSIGN_THRESHOLD};

use crate::api;
use crate::commands::{self, QueryField};
use crate::datadir::{build_index, read_json, write_json, BuildConfig, DataDir, FEEDBACK_LOG, SESSIONS_LOG};
use crate::error::{Error, Result};
use crate::server::{self, AppState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Parser)]
#[command(name = "cordsearch", version, about = "Scientific-literature search: indexing, topics, knowledge graph, search and evaluation")]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Data directory written by `index build`.
    #[arg(long, env = "CORDSEARCH_DATA_DIR")]
    pub data_dir: PathBuf,
}

impl DataArgs {
    fn open(&self) -> Result<DataDir> {
        DataDir::open(&self.data_dir)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a data directory from a corpus.
    Index {
        #[command(subcommand)]
        command: IndexCommand,
    },
    /// Topic modelling, curation and classification.
    Topics {
        #[command(subcommand)]
        command: TopicsCommand,
    },
    /// Knowledge graph construction, embedding and recommendation.
    Kg {
        #[command(subcommand)]
        command: KgCommand,
    },
    /// Run one query.
    Search(SearchArgs),
    /// Retrieval evaluation.
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Generate synthetic data.
    Synth {
        #[command(subcommand)]
        command: SynthCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// Ingest the corpus named in a TOML config and write the data directory.
    Build { config: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum TopicsCommand {
    /// Train a z-label LDA model over the indexed corpus.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value_t = 500)]
        iterations: usize,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        beta: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Seed words, `term<TAB>topic,topic` per line.
        #[arg(long)]
        seeds: Option<PathBuf>,
        /// Terms listed per topic in the summary.
        #[arg(long, default_value_t = 10)]
        top_terms: usize,
    },
    /// Merge, delete and rename topics, then relabel documents.
    Curate {
        #[command(flatten)]
        data: DataArgs,
        /// JSON list of operations, e.g. [{"merge":[0,3]},{"delete":5},{"rename":{"index":0,"name":"Virology"}}].
        #[arg(long)]
        ops: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ASSIGN_THRESHOLD)]
        assign_threshold: f64,
    },
    /// Train the multi-label classifier and report held-out F1.
    Classify {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        #[arg(long, default_value_t = CONFIDENCE_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value_t = 11)]
        seed: u64,
        /// Only report; leave unlabelled documents unlabelled.
        #[arg(long)]
        no_apply: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum KgCommand {
    /// Build the knowledge graph from the indexed corpus.
    Build {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Train TransE embeddings over the graph.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 1.0)]
        margin: f64,
        #[arg(long, default_value_t = 0.01)]
        learning_rate: f64,
        #[arg(long, default_value_t = 1)]
        negatives: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Articles most similar to one article.
    Recommend {
        doc_id: String,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Weight of semantic similarity against graph similarity.
        #[arg(long)]
        alpha: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    pub query: String,
    #[command(flatten)]
    pub data: DataArgs,
    /// Restrict to documents carrying one of these topics.
    #[arg(long)]
    pub topics: Vec<String>,
    /// kw or nl; detected from the query when absent.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Document ranking metrics of a run against judgements.
    Dr {
        #[arg(long)]
        run: PathBuf,
        /// Judgement rounds; repeat for several.
        #[arg(long, required = true)]
        qrels: Vec<PathBuf>,
        /// Cutoffs for every metric, e.g. 1,5,10. Defaults to P@{1,5,10,20}, R@{10,20}, NDCG@20.
        #[arg(long, value_delimiter = ',')]
        ks: Vec<usize>,
        /// Map judged ids onto this data directory's documents.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// JSON map of judged id → title, for ids that changed between releases.
        #[arg(long)]
        id_titles: Option<PathBuf>,
    },
    /// EM/F1 agreement between natural-question and keyword-query runs.
    Robustness {
        #[arg(long)]
        nq_run: PathBuf,
        #[arg(long)]
        kq_run: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Take titles from this data directory.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// JSON map doc_id → title.
        #[arg(long)]
        titles: Option<PathBuf>,
    },
    /// Search every topic and write a TREC run file.
    Run {
        #[command(flatten)]
        data: DataArgs,
        /// Topic file (JSON or TREC XML).
        #[arg(long)]
        topics: PathBuf,
        #[arg(long, value_enum, default_value_t = QueryField::Nq)]
        field: QueryField,
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long, default_value = "cordsearch")]
        tag: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Top-3 displayed results per topic, for pooling.
    Results {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        topics: PathBuf,
        #[arg(long, value_enum, default_value_t = QueryField::Nq)]
        field: QueryField,
        #[arg(long)]
        system: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pool system results into a blind annotation sheet.
    Pool {
        /// System results JSON; repeat per system.
        #[arg(long, required = true)]
        system: Vec<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        sheet: PathBuf,
        #[arg(long)]
        mapping: PathBuf,
    },
    /// Unblind an annotated sheet and score PR/QA precision.
    ScorePrqa {
        #[arg(long)]
        sheet: PathBuf,
        #[arg(long)]
        mapping: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, env = "CORDSEARCH_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Defaults to feedback.jsonl in the data directory.
    #[arg(long)]
    pub feedback_log: Option<PathBuf>,
    /// Defaults to sessions.jsonl in the data directory.
    #[arg(long)]
    pub sessions_log: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Write a synthetic corpus and its `index build` config.
    Corpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        docs: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

/// A command result: JSON for machines, rows for `--format table`.
pub struct Output {
    pub json: String,
    pub table: Vec<Vec<String>>,
}

impl Output {
    fn new<T: Serialize>(value: &T, table: Vec<Vec<String>>) -> Result<Self> {
        Ok(Self {
            json: serde_json::to_string(value).map_err(|e| Error::internal(e.to_string()))?,
            table,
        })
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.json.clone(),
            Format::Table => render_table(&self.table),
        }
    }
}

fn render_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    rows.iter()
        .map(|r| {
            let cells: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(i, s)| format!("{s:<w$}", w = widths[i]))
                .collect();
            cells.join("  ").trim_end().to_string()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn row<I: IntoIterator<Item = S>, S: ToString>(cells: I) -> Vec<String> {
    cells.into_iter().map(|c| c.to_string()).collect()
}

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

fn key_values<I: IntoIterator<Item = (String, String)>>(items: I) -> Vec<Vec<String>> {
    let mut rows = vec![row(["field", "value"])];
    rows.extend(items.into_iter().map(|(k, v)| vec![k, v]));
    rows
}

fn metric_rows(report: &cordsearch_core::evalkit::MetricReport) -> Vec<Vec<String>> {
    let mut rows = vec![row(["metric", "mean", "topics"])];
    for (m, v) in &report.mean {
        let n = report.per_topic.values().filter(|t| t.contains_key(m)).count();
        rows.push(row([m.clone(), fmt(*v), n.to_string()]));
    }
    rows
}

pub fn execute(command: Command) -> Result<Output> {
    match command {
        Command::Index {
            command: IndexCommand::Build { config },
        } => {
            let config = BuildConfig::load(&config)?;
            let s = build_index(&config)?;
            let table = key_values([
                ("output".into(), s.output.display().to_string()),
                ("docs".into(), s.doc_count.to_string()),
                ("duplicates dropped".into(), s.ingest.dropped_duplicates.len().to_string()),
                ("rows skipped".into(), s.ingest.skipped_rows.to_string()),
                ("labelled docs".into(), s.labelled_docs.to_string()),
                ("graph triples".into(), s.graph_triples.map_or("-".into(), |n| n.to_string())),
                ("seconds".into(), format!("{:.2}", s.seconds)),
            ]);
            Output::new(&s, table)
        }
        Command::Topics { command } => topics(command),
        Command::Kg { command } => kg(command),
        Command::Search(args) => {
            let request = api::search_request(&args.query, &args.topics, args.mode.as_deref(), args.k)?;
            let engine = args.data.open()?.load_engine()?;
            let response = api::run_search(&engine, &request)?;
            let mut table = vec![row(["rank", "doc_id", "score", "topics", "title"])];
            for (i, d) in response.docs.iter().enumerate() {
                table.push(row([(i + 1).to_string(), d.doc_id.clone(), fmt(d.score), d.topics.join("; "), d.title.clone()]));
            }
            for a in &response.answers {
                table.push(row(["answer".to_string(), a.doc_id.clone(), fmt(a.confidence), String::new(), a.text.clone()]));
            }
            if let Some(f) = &response.faq_answer {
                table.push(row(["faq".to_string(), String::new(), fmt(f.similarity), String::new(), f.answer.clone()]));
            }
            Ok(Output {
                json: api::search_json(&response)?,
                table,
            })
        }
        Command::Eval { command } => eval(command),
        Command::Serve(args) => serve(args),
        Command::Synth {
            command: SynthCommand::Corpus { out, docs, seed },
        } => {
            let s = commands::synth_corpus(&out, docs, seed)?;
            let table = key_values([
                ("out".into(), s.out.display().to_string()),
                ("docs".into(), s.docs.to_string()),
                ("config".into(), s.config.display().to_string()),
            ]);
            Output::new(&s, table)
        }
    }
}

fn topics(command: TopicsCommand) -> Result<Output> {
    match command {
        TopicsCommand::Train {
            data,
            k,
            iterations,
            alpha,
            beta,
            seed,
            seeds,
            top_terms,
        } => {
            let config = LdaConfig {
                k,
                alpha,
                beta,
                iterations,
                rng_seed: seed,
            };
            let s = commands::topics_train(&data.open()?, &config, seeds.as_deref(), top_terms)?;
            let mut table = vec![row(["topic", "top terms"])];
            for t in &s.topics {
                let terms: Vec<&str> = t.terms.iter().map(|(w, _)| w.as_str()).collect();
                table.push(row([t.topic.to_string(), terms.join(" ")]));
            }
            Output::new(&s, table)
        }
        TopicsCommand::Curate {
            data,
            ops,
            assign_threshold,
        } => {
            let ops: Vec<CurationOp> = read_json(&ops)?;
            let s = commands::topics_curate(&data.open()?, &ops, assign_threshold)?;
            let mut table = vec![row(["topic", "docs"])];
            for (n, c) in &s.doc_counts {
                table.push(row([n.clone(), c.to_string()]));
            }
            Output::new(&s, table)
        }
        TopicsCommand::Classify {
            data,
            test_fraction,
            threshold,
            seed,
            no_apply,
        } => {
            let config = ClassifierConfig {
                rng_seed: seed,
                ..Default::default()
            };
            let s = commands::topics_classify(&data.open()?, &config, test_fraction, threshold, !no_apply)?;
            let table = key_values([
                ("train docs".into(), s.train_docs.to_string()),
                ("test docs".into(), s.test_docs.to_string()),
                ("avg F1".into(), fmt(s.held_out.avg_f1)),
                ("avg labels/doc".into(), fmt(s.held_out.avg_labels_per_doc)),
                ("pct unlabeled".into(), fmt(s.held_out.pct_unlabeled)),
                ("newly labelled".into(), s.newly_labelled.to_string()),
            ]);
            Output::new(&s, table)
        }
    }
}

fn kg(command: KgCommand) -> Result<Output> {
    match command {
        KgCommand::Build { data } => {
            let s = commands::kg_build(&data.open()?)?;
            let mut table = vec![row(["kind", "name", "count"])];
            table.extend(s.nodes.iter().map(|(k, v)| row(["node", k, &v.to_string()])));
            table.extend(s.triples.iter().map(|(k, v)| row(["triple", k, &v.to_string()])));
            Output::new(&s, table)
        }
        KgCommand::Train {
            data,
            dim,
            epochs,
            margin,
            learning_rate,
            negatives,
            seed,
        } => {
            let config = TransEConfig {
                dim,
                epochs,
                margin,
                learning_rate,
                negatives_per_positive: negatives,
                rng_seed: seed,
                track_full_loss: false,
            };
            let s = commands::kg_train(&data.open()?, &config)?;
            let table = key_values([
                ("dim".into(), s.dim.to_string()),
                ("epochs".into(), s.epochs.to_string()),
                ("entities".into(), s.entities.to_string()),
                ("first loss".into(), s.first_loss.map_or("-".into(), fmt)),
                ("final loss".into(), s.final_loss.map_or("-".into(), fmt)),
            ]);
            Output::new(&s, table)
        }
        KgCommand::Recommend { doc_id, data, k, alpha } => {
            let engine = data.open()?.load_engine()?;
            let s = api::similar(&engine, &doc_id, Some(k), alpha)?;
            let mut table = vec![row(["rank", "doc_id", "score", "title"])];
            for (i, a) in s.similar.iter().enumerate() {
                table.push(row([(i + 1).to_string(), a.doc_id.clone(), fmt(a.score), a.title.clone()]));
            }
            Output::new(&s, table)
        }
    }
}

fn eval(command: EvalCommand) -> Result<Output> {
    match command {
        EvalCommand::Dr {
            run,
            qrels,
            ks,
            data_dir,
            id_titles,
        } => {
            let spec = if ks.is_empty() {
                MetricSpec::default()
            } else {
                MetricSpec::uniform(&ks)
            };
            let dir = data_dir.as_deref().map(DataDir::open).transpose()?;
            let r = commands::eval_dr(&run, &qrels, &spec, dir.as_ref(), id_titles.as_deref())?;
            Output::new(&r, metric_rows(&r.metrics))
        }
        EvalCommand::Robustness {
            nq_run,
            kq_run,
            k,
            data_dir,
            titles,
        } => {
            let dir = data_dir.as_deref().map(DataDir::open).transpose()?;
            let r = commands::eval_robustness(&nq_run, &kq_run, k, dir.as_ref(), titles.as_deref())?;
            Output::new(&r, metric_rows(&r.to_metric_report()))
        }
        EvalCommand::Run {
            data,
            topics,
            field,
            k,
            tag,
            out,
        } => {
            let topics = TopicSet::load(&topics)?;
            let engine = data.open()?.load_engine()?;
            let s = commands::eval_run(&engine, &topics, field, k, &tag, &out)?;
            let table = key_values([
                ("out".into(), s.out.display().to_string()),
                ("topics".into(), s.topics.to_string()),
                ("results".into(), s.results.to_string()),
                ("skipped".into(), s.skipped.join(" ")),
            ]);
            Output::new(&s, table)
        }
        EvalCommand::Results {
            data,
            topics,
            field,
            system,
            out,
        } => {
            let topics = TopicSet::load(&topics)?;
            let engine = data.open()?.load_engine()?;
            let results = commands::eval_results(&engine, &topics, field, &system)?;
            write_json(&out, &results)?;
            let summary = serde_json::json!({"out": out, "system": system, "queries": results.queries.len()});
            let table = key_values([
                ("out".into(), out.display().to_string()),
                ("queries".into(), results.queries.len().to_string()),
            ]);
            Output::new(&summary, table)
        }
        EvalCommand::Pool {
            system,
            seed,
            sheet,
            mapping,
        } => {
            let systems = system
                .iter()
                .map(|p| read_json::<SystemResults>(p))
                .collect::<Result<Vec<_>>>()?;
            let pool = prepare_blind_pool(&systems, seed)?;
            write_sheet(&sheet, &pool.sheet).map_err(|e| Error::write(&sheet, e))?;
            write_json(&mapping, &pool.mapping)?;
            let summary = serde_json::json!({
                "sheet": sheet, "mapping": mapping, "rows": pool.sheet.len(),
                "queries": pool.mapping.queries.len(), "systems": pool.mapping.systems,
            });
            let table = key_values([
                ("rows".into(), pool.sheet.len().to_string()),
                ("queries".into(), pool.mapping.queries.len().to_string()),
                ("systems".into(), pool.mapping.systems.join(" ")),
            ]);
            Output::new(&summary, table)
        }
        EvalCommand::ScorePrqa { sheet, mapping } => {
            let rows = read_sheet(&sheet)?;
            let mapping: PoolMapping = read_json(&mapping)?;
            let scores = score_prqa(&rows, &mapping)?;
            let mut table = vec![row(["system", "PR@1", "PR@2", "PR@3", "QA@1", "QA@2", "QA@3"])];
            for (s, v) in &scores {
                let mut r = vec![s.clone()];
                r.extend(v.pr.iter().chain(&v.qa).map(|x| fmt(*x)));
                table.push(r);
            }
            Output::new(&scores, table)
        }
    }
}

fn serve(args: ServeArgs) -> Result<Output> {
    let dir = &args.data.data_dir;
    // fail fast on a missing directory; the engine itself loads in the background
    DataDir::open(dir)?;
    let sessions = args.sessions_log.unwrap_or_else(|| dir.join(SESSIONS_LOG));
    let feedback = args.feedback_log.unwrap_or_else(|| dir.join(FEEDBACK_LOG));
    let state = AppState::new(Some(dir.clone()), &sessions, &feedback)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::internal(e.to_string()))?;
    runtime.block_on(server::serve(state, SocketAddr::new(args.host, args.port)))?;
    Output::new(&serde_json::json!({"status": "stopped"}), vec![row(["stopped"])])
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Parse arguments, run, print, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    let format = cli.format;
    match execute(cli.command) {
        Ok(out) => {
            // a closed pipe (`| head`) is not a failure of the command
            let _ = writeln!(std::io::stdout().lock(), "{}", out.render(format));
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

