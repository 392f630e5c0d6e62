mod common;

use std::collections::{BTreeMap, BTreeSet};

use cordsearch_core::synth::{lda_fixture, separable_multilabel};
use cordsearch_core::text::Analyzer;
use cordsearch_core::topics::{
    curate, derive_doc_labels, evaluate_f1, set_f1, ten_topic_ops, train_classifier, train_zlabel_lda,
    ClassifierConfig, GibbsSampler, LdaConfig, ZLabelSeeds, CURATED_TOPIC_NAMES,
};
use proptest::prelude::*;

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn three_topic_corpus_is_recovered() {
    let fx = lda_fixture(300, 60, 3, 50, 2024);
    let seeds = ZLabelSeeds::new().with("w000", [0]).with("w059", [1, 2]);
    let cfg = LdaConfig {
        k: 3,
        iterations: 500,
        rng_seed: 5,
        ..Default::default()
    };
    let mut sampler = GibbsSampler::new(&fx.docs, &cfg, &seeds).unwrap();
    for sweep in 1..=cfg.iterations {
        sampler.sweep();
        assert_eq!(sampler.zlabel_violations(), 0, "sweep {sweep}");
        if sweep % 50 == 0 {
            assert!(sampler.snapshot().counts_consistent(), "sweep {sweep}");
        }
    }
    let model = sampler.snapshot();
    assert_eq!(model.vocab, fx.vocab);

    // exhaustive assignment search; K! is tiny
    let learned: Vec<Vec<f64>> = (0..3).map(|t| model.phi_row(t)).collect();
    let best = permutations(3)
        .into_iter()
        .map(|p| {
            let cos: Vec<f64> = (0..3).map(|t| cosine(&fx.phi[t], &learned[p[t]])).collect();
            (cos.iter().sum::<f64>(), cos)
        })
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    for (t, c) in best.1.iter().enumerate() {
        assert!(*c >= 0.8, "topic {t}: aligned cosine {c}");
    }

    for t in 0..3 {
        assert!((model.phi_row(t).iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
    for d in 0..model.doc_ids.len() {
        assert!((model.theta(d).iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
    let w0 = model.word_index("w000").unwrap();
    assert!(model.n_wt[w0][1] == 0 && model.n_wt[w0][2] == 0);
}

#[test]
fn training_is_deterministic() {
    let fx = lda_fixture(40, 30, 3, 20, 1);
    let cfg = LdaConfig {
        k: 3,
        iterations: 30,
        ..Default::default()
    };
    let a = train_zlabel_lda(&fx.docs, &cfg, &ZLabelSeeds::new()).unwrap();
    let b = train_zlabel_lda(&fx.docs, &cfg, &ZLabelSeeds::new()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn seeded_vaccine_term_ranks_in_its_topic_on_the_fixture() {
    let analyzer = Analyzer::default();
    let docs: Vec<(String, Vec<String>)> = common::fixture_articles()
        .iter()
        .map(|a| (a.doc_id.clone(), analyzer.tokenize(&a.full_text())))
        .collect();
    let cfg = LdaConfig {
        k: 20,
        iterations: 100,
        ..Default::default()
    };
    let seeds = ZLabelSeeds::new().with("vaccine", [3]);
    let model = train_zlabel_lda(&docs, &cfg, &seeds).unwrap();
    let top: Vec<String> = model.top_terms(3, 10).unwrap().into_iter().map(|(t, _)| t).collect();
    assert!(top.iter().any(|t| t == "vaccine"), "{top:?}");
    let w = model.word_index("vaccine").unwrap();
    assert!(model.n_wt[w].iter().enumerate().all(|(t, &c)| t == 3 || c == 0));

    // curate the 20 topics down to the ten display names
    let groups: [Vec<usize>; 10] = std::array::from_fn(|i| vec![2 * i, 2 * i + 1]);
    let curated = curate(&model, &ten_topic_ops(20, &groups)).unwrap();
    assert_eq!(curated.names, CURATED_TOPIC_NAMES.map(String::from).to_vec());
    let labels = derive_doc_labels(&model, &curated, 0.2).unwrap();
    assert_eq!(labels.len(), docs.len());
    assert!(labels.values().all(|l| !l.is_empty()));
    let mean = labels.values().map(BTreeSet::len).sum::<usize>() as f64 / labels.len() as f64;
    println!("fixture gold labels per document: {mean:.2}");
}

fn split<T: Clone>(items: &[T]) -> (Vec<T>, Vec<T>) {
    let cut = items.len() * 4 / 5;
    (items[..cut].to_vec(), items[cut..].to_vec())
}

#[test]
fn separable_ten_label_set_holds_out_above_point_nine() {
    let labels: Vec<String> = CURATED_TOPIC_NAMES.iter().map(|s| s.to_string()).collect();
    let (docs, gold) = separable_multilabel(500, &labels, 77);
    let (train, test) = split(&docs);
    let clf = train_classifier(&train, &gold, &labels, &ClassifierConfig::default()).unwrap();
    assert_eq!(clf.threshold, 0.5);
    let pred: BTreeMap<String, BTreeSet<String>> = test.iter().map(|(d, t)| (d.clone(), clf.predict(t))).collect();
    let test_gold: BTreeMap<String, BTreeSet<String>> = test.iter().map(|(d, _)| (d.clone(), gold[d].clone())).collect();
    let report = evaluate_f1(&test_gold, &pred).unwrap();
    println!(
        "held-out avg_f1={:.4} avg_labels_per_doc={:.2} pct_unlabeled={:.4}",
        report.avg_f1, report.avg_labels_per_doc, report.pct_unlabeled
    );
    assert!(report.avg_f1 >= 0.90, "{report:?}");
}

#[test]
fn separable_two_label_set_fits_training_data_exactly() {
    let labels = vec!["A".to_string(), "B".to_string()];
    let (docs, gold) = separable_multilabel(60, &labels, 3);
    let clf = train_classifier(&docs, &gold, &labels, &ClassifierConfig::default()).unwrap();
    let pred = docs.iter().map(|(d, t)| (d.clone(), clf.predict(t))).collect();
    assert_eq!(evaluate_f1(&gold, &pred).unwrap().avg_f1, 1.0);
}

#[test]
fn predictions_respect_label_set_and_threshold() {
    let labels: Vec<String> = CURATED_TOPIC_NAMES.iter().map(|s| s.to_string()).collect();
    let (docs, gold) = separable_multilabel(120, &labels, 9);
    let clf = train_classifier(&docs, &gold, &labels, &ClassifierConfig::default()).unwrap();
    for (_, t) in &docs {
        let scores = clf.scores(t);
        let pred = clf.predict(t);
        for (l, s) in clf.label_set.iter().zip(&scores) {
            assert_eq!(pred.contains(l), *s >= 0.5);
        }
        assert!(pred.iter().all(|l| clf.label_set.contains(l)));
    }
}

fn label_sets() -> impl Strategy<Value = BTreeMap<String, (BTreeSet<String>, BTreeSet<String>)>> {
    let set = || prop::collection::btree_set(prop::sample::select(vec!["A", "B", "C", "D"]), 0..4);
    prop::collection::btree_map("[a-z]{1,3}", (set(), set()), 1..20).prop_map(|m| {
        m.into_iter()
            .map(|(k, (g, p))| {
                let s = |x: BTreeSet<&str>| x.into_iter().map(String::from).collect();
                (k, (s(g), s(p)))
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn f1_is_symmetric_bounded_and_one_iff_equal(m in label_sets()) {
        let gold: BTreeMap<_, _> = m.iter().map(|(k, (g, _))| (k.clone(), g.clone())).collect();
        let pred: BTreeMap<_, _> = m.iter().map(|(k, (_, p))| (k.clone(), p.clone())).collect();
        let a = evaluate_f1(&gold, &pred).unwrap();
        let b = evaluate_f1(&pred, &gold).unwrap();
        prop_assert!((a.avg_f1 - b.avg_f1).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&a.avg_f1));
        prop_assert_eq!(a.avg_f1 == 1.0, gold == pred);
        for (g, p) in m.values() {
            prop_assert_eq!(set_f1(g, p), set_f1(p, g));
        }
    }
}
