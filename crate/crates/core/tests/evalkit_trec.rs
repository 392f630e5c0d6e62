mod common;

use std::collections::BTreeMap;

use common::fixtures;
use cordsearch_core::corpus::{load_corpus, map_doc_ids};
use cordsearch_core::evalkit::{aggregate_qrels, EvalError, Qrels, RunFile, TopicSet};

#[test]
fn qrels_round_trip() {
    let text = "# round 1\n1 0 d1 2\n1 0 d2 0\n\n2 0 d9 1\n1 0 d1 1\n";
    let q = Qrels::parse(text).unwrap();
    assert_eq!(q.grade("1", "d1"), 2);
    assert_eq!(q.relevant_count("1"), 1);
    assert_eq!(q.len(), 3);
    assert_eq!(Qrels::parse(&q.to_trec()).unwrap(), q);
    assert!(Qrels::parse("1 0 d1").is_err());
    assert!(Qrels::parse("1 0 d1 -1").is_err());
}

#[test]
fn run_round_trip_and_strictness() {
    let lists = BTreeMap::from([
        ("1".to_string(), vec![("b".to_string(), 1.5), ("a".to_string(), 1.5), ("c".to_string(), 3.0)]),
        ("2".to_string(), vec![("z".to_string(), 0.25)]),
    ]);
    let run = RunFile::from_scored("sys", lists).unwrap();
    assert_eq!(run.top_k("1", 3), vec!["c", "a", "b"]);
    assert_eq!(run.topics["1"].iter().map(|e| e.rank).collect::<Vec<_>>(), vec![1, 2, 3]);
    let back = RunFile::parse(&run.to_trec()).unwrap();
    assert_eq!(back, run);

    // rank column decides order; ranks become dense
    let sparse = RunFile::parse("1 Q0 x 10 1.0 t\n1 Q0 y 2 2.0 t\n").unwrap();
    assert_eq!(sparse.top_k("1", 5), vec!["y", "x"]);
    assert_eq!(sparse.topics["1"][1].rank, 2);

    assert!(matches!(RunFile::parse("1 Q0 x 1 1.0 t\n1 Q0 x 2 0.5 t\n"), Err(EvalError::InvalidRun(_))));
    assert!(matches!(RunFile::parse("1 Q0 x 1 1.0 t\n1 Q0 y 2 1.5 t\n"), Err(EvalError::InvalidRun(_))));
    assert!(RunFile::parse("1 Q0 x 1 nan t\n").is_err());
    assert!(RunFile::parse("1 Q0 x 1\n").is_err());
}

#[test]
fn topics_from_json_and_xml_agree() {
    let json = r#"[{"number": 1, "query": "coronavirus origin", "question": "what is the origin of COVID-19?", "narrative": "n1"},
                   {"topic_id": "2", "query": "hcq", "question": "does hcq help?"}]"#;
    let xml = r#"<topics>
      <topic number="1"><query>coronavirus origin</query><question>what is the origin of COVID-19?</question><narrative> n1 </narrative></topic>
      <topic number="2"><query>hcq</query><question>does hcq help?</question></topic>
    </topics>"#;
    let a = TopicSet::from_json(json).unwrap();
    let b = TopicSet::from_xml(xml).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.topics[0].topic_id, "1");
    assert_eq!(a.topics[1].narrative, "");
    assert!(TopicSet::from_xml("<topics><topic number=\"1\"/><topic number=\"1\"/></topics>").is_err());
    assert!(TopicSet::from_xml("<topics><topic/></topics>").is_err());
}

#[test]
fn three_rounds_merge_onto_current_ids() {
    let dir = fixtures().join("corpus");
    let manifest = load_corpus(&dir.join("metadata.csv"), None, "fixture").unwrap().manifest;
    let rounds = [
        Qrels::parse("1 0 fx001 1\n1 0 fx002 2\n2 0 fx006 0\n").unwrap(),
        Qrels::parse("1 0 old-1 1\n1 0 fx001 2\n1 0 old-4 1\n2 0 fx006 1\n").unwrap(),
        Qrels::parse("1 0 fx003 0\n1 0 old-5 2\n1 0 fx002 1\n2 0 old-2 2\n").unwrap(),
    ];
    let titles = BTreeMap::from([
        ("old-1", "SALIVARY viral load in COVID-19 patients"),
        ("old-2", "Chloroquine is a potent inhibitor of coronavirus infection, in vitro."),
        ("old-4", "An unknown title"),
    ]);
    let mut ids: Vec<&str> = rounds
        .iter()
        .flat_map(|r| r.judgements.values().flat_map(|d| d.keys().map(String::as_str)))
        .collect();
    ids.sort();
    ids.dedup();
    let mapping = map_doc_ids(ids.iter().map(|id| (*id, titles.get(id).copied().unwrap_or(""))), &manifest);
    let (merged, report) = aggregate_qrels(&rounds, &mapping);

    let mut want = Qrels::default();
    for (t, d, g) in [
        ("1", "fx001", 2),
        ("1", "fx002", 2),
        ("1", "fx003", 1),
        ("2", "fx005", 2),
        ("2", "fx006", 1),
    ] {
        want.insert(t, d, g);
    }
    assert_eq!(merged, want);
    assert_eq!(report.dropped_unmapped, vec![0, 1, 1]);
}
