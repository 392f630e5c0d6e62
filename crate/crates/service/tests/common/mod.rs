#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use tower::ServiceExt;

use cordsearch_service::datadir::{build_index, BuildConfig, DataDir};
use cordsearch_service::server::{router, AppState};

pub fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixtures() -> PathBuf {
    repo().join("fixtures")
}

/// An `index build` config over the 50-doc fixture corpus writing to
/// `root/data`.
pub fn write_fixture_config(root: &Path) -> PathBuf {
    let f = fixtures();
    let config = format!(
        "release = \"fixture\"\nmetadata = \"{}\"\nfulltext = \"{}\"\ngazetteer = \"{}\"\nfaq = \"{}\"\ndoc_topics = \"{}\"\noutput = \"data\"\n",
        f.join("corpus/metadata.csv").display(),
        f.join("corpus/fulltext").display(),
        f.join("gazetteer.tsv").display(),
        f.join("faq.json").display(),
        f.join("doc_topics.json").display(),
    );
    fs::create_dir_all(root).unwrap();
    let path = root.join("config.toml");
    fs::write(&path, config).unwrap();
    path
}

/// Fixture data directory, built once per test binary.
pub fn fixture_data_dir() -> &'static Path {
    static DIR: OnceLock<(tempfile::TempDir, PathBuf)> = OnceLock::new();
    let (_, path) = DIR.get_or_init(|| {
        let tmp = tempfile::tempdir().unwrap();
        let config = BuildConfig::load(&write_fixture_config(tmp.path())).unwrap();
        let summary = build_index(&config).unwrap();
        (tmp, summary.output)
    });
    path
}

pub fn fixture_doc_topics() -> BTreeMap<String, BTreeSet<String>> {
    serde_json::from_str(&fs::read_to_string(fixtures().join("doc_topics.json")).unwrap()).unwrap()
}

/// Doc ids the loader keeps, from the golden corpus listing.
pub fn retained_ids() -> BTreeSet<String> {
    let listing: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fixtures().join("golden/corpus_listing.json")).unwrap()).unwrap();
    listing["retained"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["doc_id"].as_str().unwrap().to_string())
        .collect()
}

/// Server state over the fixture engine with logs in `logs`.
pub fn fixture_state(logs: &Path) -> Arc<AppState> {
    let dir = fixture_data_dir();
    let state = AppState::new(Some(dir.to_path_buf()), &logs.join("sessions.jsonl"), &logs.join("feedback.jsonl")).unwrap();
    state.install(DataDir::open(dir).unwrap().load_engine().unwrap());
    state
}

pub async fn send(state: &Arc<AppState>, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

pub async fn get(state: &Arc<AppState>, uri: &str) -> (StatusCode, Vec<u8>) {
    send(state, Request::get(uri).body(Body::empty()).unwrap()).await
}

pub async fn post_json(state: &Arc<AppState>, uri: &str, body: &str) -> (StatusCode, Vec<u8>) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    send(state, req).await
}

pub fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("not JSON ({e}): {}", String::from_utf8_lossy(bytes)))
}

pub fn schema(name: &str) -> jsonschema::Validator {
    let path = repo().join("docs/schemas").join(format!("{name}.schema.json"));
    let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&value).unwrap()
}

pub fn assert_valid(validator: &jsonschema::Validator, value: &serde_json::Value) {
    let errors: Vec<String> = validator.iter_errors(value).map(|e| format!("{e} at {}", e.instance_path)).collect();
    assert!(errors.is_empty(), "schema violations: {errors:?}\n{value}");
}

pub fn encode(s: &str) -> String {
    form_urlencoded::byte_serialize(s.as_bytes()).collect()
}

pub fn line_count(path: &Path) -> usize {
    fs::read_to_string(path).map(|s| s.lines().count()).unwrap_or(0)
}

pub type Lists = BTreeMap<String, Vec<String>>;
pub type Judged = BTreeMap<String, BTreeMap<String, u32>>;

/// Straight-line P@{1,5,10,20}, R@{10,20} and ndcg@20 per topic. Grade ≥ 1
/// is relevant; NDCG uses linear gains over log2(rank + 1).
pub fn reference_metrics(lists: &Lists, judged: &Judged) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (topic, docs) in lists {
        let Some(j) = judged.get(topic) else { continue };
        let grade = |d: &String| j.get(d).copied().unwrap_or(0);
        let relevant = j.values().filter(|&&g| g >= 1).count();
        let mut m = BTreeMap::new();
        for k in [1usize, 5, 10, 20] {
            let hits = docs.iter().take(k).filter(|d| grade(d) >= 1).count();
            m.insert(format!("P@{k}"), hits as f64 / k as f64);
            if (k == 10 || k == 20) && relevant > 0 {
                m.insert(format!("R@{k}"), hits as f64 / relevant as f64);
            }
        }
        let mut dcg = 0.0;
        for (i, d) in docs.iter().take(20).enumerate() {
            dcg += grade(d) as f64 / ((i + 2) as f64).log2();
        }
        let mut ideal: Vec<u32> = j.values().copied().collect();
        ideal.sort_unstable_by(|a, b| b.cmp(a));
        let mut idcg = 0.0;
        for (i, g) in ideal.iter().take(20).enumerate() {
            idcg += *g as f64 / ((i + 2) as f64).log2();
        }
        if idcg > 0.0 {
            m.insert("ndcg@20".to_string(), dcg / idcg);
        }
        out.insert(topic.clone(), m);
    }
    out
}

/// Random run and judgements over a shared pool of doc ids. Every topic
/// ranks at least one doc, since a run file cannot express an empty list.
pub fn random_run(seed: u64, topics: usize) -> (Lists, Judged) {
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<String> = (0..120).map(|i| format!("doc{i}")).collect();
    let mut lists = Lists::new();
    let mut judged = Judged::new();
    for t in 0..topics {
        let id = format!("{}", t + 1);
        let n = rng.gen_range(1..=60);
        lists.insert(id.clone(), pool.choose_multiple(&mut rng, n).cloned().collect());
        let mut j = BTreeMap::new();
        for _ in 0..rng.gen_range(0..40) {
            j.insert(pool.choose(&mut rng).unwrap().clone(), rng.gen_range(0..4));
        }
        if !j.is_empty() {
            judged.insert(id, j);
        }
    }
    (lists, judged)
}

pub fn trec_run(lists: &Lists) -> String {
    let mut s = String::new();
    for (t, docs) in lists {
        for (i, d) in docs.iter().enumerate() {
            s += &format!("{t} Q0 {d} {} {} test\n", i + 1, 1000 - i);
        }
    }
    s
}

pub fn trec_qrels(judged: &Judged) -> String {
    let mut s = String::new();
    for (t, docs) in judged {
        for (d, g) in docs {
            s += &format!("{t} 0 {d} {g}\n");
        }
    }
    s
}

pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn cordsearch<I, S>(args: I) -> CliOutput
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_cordsearch"))
        .args(args)
        .env_remove("CORDSEARCH_DATA_DIR")
        .env_remove("CORDSEARCH_PORT")
        .output()
        .unwrap();
    CliOutput {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

/// Run and insist on success, returning stdout.
pub fn cordsearch_ok<I, S>(args: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = cordsearch(args);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    out.stdout
}

/// A `cordsearch serve` child process, killed on drop.
pub struct Server {
    child: std::process::Child,
    pub port: u16,
}

impl Server {
    pub fn start(data_dir: &Path, logs: &Path) -> Self {
        let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let child = std::process::Command::new(env!("CARGO_BIN_EXE_cordsearch"))
            .arg("serve")
            .arg("--data-dir")
            .arg(data_dir)
            .args(["--port", &port.to_string()])
            .arg("--sessions-log")
            .arg(logs.join("sessions.jsonl"))
            .arg("--feedback-log")
            .arg(logs.join("feedback.jsonl"))
            .stdout(std::process::Stdio::null())
            .stderr(std::process::Stdio::null())
            .spawn()
            .unwrap();
        let server = Self { child, port };
        let deadline = std::time::Instant::now() + std::time::Duration::from_secs(120);
        loop {
            if let Some((200, body)) = server.try_get("/health") {
                if body.contains("\"ready\"") {
                    break;
                }
            }
            assert!(std::time::Instant::now() < deadline, "server never became ready");
            std::thread::sleep(std::time::Duration::from_millis(50));
        }
        server
    }

    fn try_get(&self, path: &str) -> Option<(u16, String)> {
        use std::io::{Read, Write};
        let mut stream = std::net::TcpStream::connect(("127.0.0.1", self.port)).ok()?;
        write!(stream, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").ok()?;
        let mut raw = Vec::new();
        stream.read_to_end(&mut raw).ok()?;
        let text = String::from_utf8(raw).ok()?;
        let (head, body) = text.split_once("\r\n\r\n")?;
        let status = head.split_whitespace().nth(1)?.parse().ok()?;
        assert!(!head.to_ascii_lowercase().contains("transfer-encoding: chunked"));
        Some((status, body.to_string()))
    }

    /// Raw HTTP/1.1 GET returning status and body bytes as sent.
    pub fn get(&self, path: &str) -> (u16, String) {
        self.try_get(path).expect("request failed")
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Insert `"query_id":"<id>",` at the front of a CLI search payload.
pub fn with_query_id(cli_json: &str, query_id: &str) -> String {
    format!("{{\"query_id\":\"{query_id}\",{}", &cli_json[1..])
}
