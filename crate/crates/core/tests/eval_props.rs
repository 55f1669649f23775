mod common;

use std::collections::BTreeMap;

use common::{fixture, oracle_file, oracle_metrics, random_instance, rng};
use lexsimp::eval::{
    acc_at_n_top1, align_predictions, evaluate, load_predictions, load_tsar, map_at_k,
    potential_at_k, EvalError, GoldInstance, Prediction,
};
use proptest::prelude::*;

/// Values produced by `tests/oracles/tsar_metrics_oracle.py` on the metric
/// fixture, frozen next to it.
fn frozen_expected() -> BTreeMap<String, f64> {
    std::fs::read_to_string(oracle_file("metric_fixture_expected.tsv"))
        .unwrap()
        .lines()
        .filter_map(|l| {
            let (k, v) = l.split_once('\t')?;
            Some((k.to_string(), v.parse().ok()?))
        })
        .collect()
}

#[test]
fn fixture_matches_frozen_oracle() {
    let golds = load_tsar(&fixture("metric_gold.tsv")).unwrap();
    assert!(golds.malformed.is_empty());
    let rows = load_predictions(&fixture("metric_pred.tsv")).unwrap();
    let preds = align_predictions(&golds.instances, rows).unwrap();
    let report = evaluate(&preds, &golds.instances).unwrap();
    let expected = frozen_expected();
    for (name, value) in report.metric_rows() {
        let want = expected[&name];
        assert!((value - want).abs() < 1e-9, "{name}: {value} vs {want}");
    }
    assert_eq!(report.instance_count as f64, expected["instance_count"]);
    assert_eq!(report.skipped_count as f64, expected["skipped_count"]);
}

fn to_instances(raw: &[(Vec<String>, Vec<String>)]) -> (Vec<GoldInstance>, Vec<Prediction>) {
    raw.iter()
        .enumerate()
        .map(|(i, (g, p))| {
            (
                GoldInstance::new(&format!("sentence {i}"), "w", g).unwrap(),
                Prediction::dedup(p.iter().cloned()),
            )
        })
        .unzip()
}

#[test]
fn thousand_fuzzed_instances_match_oracle() {
    let mut r = rng(0xe7a1);
    let raw: Vec<_> = (0..1000).map(|_| random_instance(&mut r)).collect();
    let (golds, preds) = to_instances(&raw);
    let report = evaluate(&preds, &golds).unwrap();
    let golds_raw: Vec<Vec<String>> = raw.iter().map(|(g, _)| g.clone()).collect();
    let preds_raw: Vec<Vec<String>> = raw.iter().map(|(_, p)| p.clone()).collect();
    let oracle = oracle_metrics(&golds_raw, &preds_raw);
    let rows = report.metric_rows();
    assert_eq!(rows.len(), oracle.len());
    for (name, value) in rows {
        assert!((value - oracle[&name]).abs() < 1e-9, "{name}: {value} vs {}", oracle[&name]);
    }
}

#[test]
fn mini_gold_file_aggregates_and_reports_malformed() {
    let ds = load_tsar(&fixture("tsar_mini.tsv")).unwrap();
    assert_eq!(ds.instances.len(), 3);
    let lines: Vec<usize> = ds.malformed.iter().map(|m| m.line_no).collect();
    assert_eq!(lines, [2, 4]);
    let clement = &ds.instances[1];
    assert_eq!(clement.count("mild"), 3);
    assert_eq!(clement.top_voted(), ["mild"]);
    let walked = &ds.instances[0];
    assert_eq!(walked.count("went"), 3);
    assert_eq!(walked.key_count(), 3);
}

#[test]
fn unknown_prediction_rows_are_rejected() {
    let ds = load_tsar(&fixture("tsar_mini.tsv")).unwrap();
    let rows = load_predictions(&fixture("metric_pred.tsv")).unwrap();
    assert!(matches!(align_predictions(&ds.instances, rows), Err(EvalError::Alignment(_))));
}

fn instance() -> impl Strategy<Value = (Vec<String>, Vec<String>)> {
    let word = prop::sample::select(vec!["a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l"]);
    (
        prop::collection::vec(word.clone().prop_map(String::from), 1..10),
        prop::collection::vec(word.prop_map(String::from), 0..12),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn per_instance_identities((g, p) in instance()) {
        let gold = GoldInstance::new("s", "w", &g).unwrap();
        let pred = Prediction::dedup(p);
        let pot1 = potential_at_k(&pred, &gold, 1);
        prop_assert_eq!(map_at_k(&pred, &gold, 1), pot1);
        for k in 1..12 {
            for v in [potential_at_k(&pred, &gold, k), map_at_k(&pred, &gold, k), acc_at_n_top1(&pred, &gold, k)] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!(potential_at_k(&pred, &gold, k + 1) >= potential_at_k(&pred, &gold, k));
            prop_assert!(acc_at_n_top1(&pred, &gold, k + 1) >= acc_at_n_top1(&pred, &gold, k));
            prop_assert!(potential_at_k(&pred, &gold, k) >= acc_at_n_top1(&pred, &gold, k));
        }
    }

    #[test]
    fn dataset_order_does_not_matter(raw in prop::collection::vec(instance(), 1..30), seed in any::<u64>()) {
        let (golds, preds) = to_instances(&raw);
        let base = evaluate(&preds, &golds).unwrap();
        let mut idx: Vec<usize> = (0..raw.len()).collect();
        let mut s = seed;
        for i in (1..idx.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            idx.swap(i, (s >> 33) as usize % (i + 1));
        }
        let g2: Vec<GoldInstance> = idx.iter().map(|&i| golds[i].clone()).collect();
        let p2: Vec<Prediction> = idx.iter().map(|&i| preds[i].clone()).collect();
        let permuted = evaluate(&p2, &g2).unwrap();
        for ((n, a), (_, b)) in base.metric_rows().into_iter().zip(permuted.metric_rows()) {
            prop_assert!((a - b).abs() < 1e-12, "{}", n);
        }
    }
}
