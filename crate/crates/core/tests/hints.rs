use std::collections::BTreeMap;

use hypotree_core::dataset::{ingest, Dtype};
use hypotree_core::hints::{
    best_column_pair, compute_payload, Aggregate, ChartSpec, ChartType, ChartValue, Corpus, Document,
};
use hypotree_testkit::{
    brute_force_column_pair, brute_force_grouped, brute_force_ranking, random_dataset_csv, ChaCha8Rng, Stat,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn label(v: &ChartValue) -> String {
    match v {
        ChartValue::Number(n) => format!("{n}"),
        ChartValue::Text(s) => s.clone(),
    }
}

fn number(v: &ChartValue) -> f64 {
    match v {
        ChartValue::Number(n) => *n,
        ChartValue::Text(_) => panic!("non-numeric y"),
    }
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// Runs one random grouped spec against the oracle.
fn check_dataset(seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let csv = random_dataset_csv(&mut rng, 1000);
    let (summary, data) = ingest(csv.as_bytes(), "r").unwrap();
    let x = ["cat", "num", "val", "grp"][rng.gen_range(0..4)];
    let x_numeric = summary.column(x).unwrap().dtype == Dtype::Numeric;
    let (agg, stat) = [
        (Aggregate::Count, Stat::Count),
        (Aggregate::Sum, Stat::Sum),
        (Aggregate::Mean, Stat::Mean),
        (Aggregate::Median, Stat::Median),
    ][rng.gen_range(0..4)];
    let y_is_numeric = summary.column("num").unwrap().dtype == Dtype::Numeric;
    let y = if agg == Aggregate::Count && rng.gen_bool(0.5) {
        None
    } else if y_is_numeric {
        Some("num")
    } else {
        // All-null column (zero rows): only counting is valid.
        return;
    };
    let group = rng.gen_bool(0.4).then_some("grp");
    let chart = if rng.gen_bool(0.5) { ChartType::Bar } else { ChartType::Line };
    let spec = ChartSpec {
        chart_type: chart,
        x_field: x.into(),
        y_field: y.map(String::from),
        aggregate: agg,
        group_field: group.map(String::from),
    };
    if spec.validate(&summary).is_err() {
        return;
    }
    let payload = compute_payload(&spec, &data, "caption").unwrap();
    let got: BTreeMap<(String, String), f64> = payload
        .series
        .iter()
        .flat_map(|s| s.points.iter().map(move |(px, py)| ((s.label.clone(), label(px)), number(py))))
        .collect();
    let want = brute_force_grouped(&csv, x, y, group, x_numeric, stat);
    assert_eq!(got.keys().collect::<Vec<_>>(), want.keys().collect::<Vec<_>>(), "seed {seed} spec {spec}");
    for (k, w) in &want {
        let g = got[k];
        match stat {
            Stat::Count | Stat::Sum => assert_eq!(g, *w, "seed {seed} key {k:?}"),
            _ => assert!(close(g, *w), "seed {seed} key {k:?}: {g} vs {w}"),
        }
    }
    if agg == Aggregate::Count {
        assert_eq!(got.values().sum::<f64>() as usize, payload.row_basis);
    }
    if payload.row_basis == 0 {
        assert!(payload.series.is_empty());
    }
}

proptest! {
    #[test]
    fn aggregation_matches_brute_force(seed in any::<u64>()) {
        check_dataset(seed);
    }

    #[test]
    fn fallback_pair_matches_exhaustive_search(
        text in "[a-z ]{0,40}",
        cols in proptest::collection::vec("[a-z]{1,5}(_[a-z]{1,5})?", 1..6),
    ) {
        prop_assert_eq!(best_column_pair(&text, &cols), brute_force_column_pair(&text, &cols));
    }

    #[test]
    fn retrieval_ranking_matches_brute_force(
        docs in proptest::collection::vec("[a-e ]{0,30}", 1..6),
        query in "[a-e ]{0,12}",
    ) {
        let titled: Vec<(String, String)> = docs.iter().enumerate().map(|(i, d)| (format!("d{i}"), d.clone())).collect();
        let corpus = Corpus::new(titled.iter().map(|(t, d)| Document::new(t, d, t)).collect());
        let got: Vec<String> = corpus.search(&query, 3).into_iter().map(|s| s.source_title).collect();
        let refs: Vec<(&str, &str)> = titled.iter().map(|(t, d)| (t.as_str(), d.as_str())).collect();
        let mut want = brute_force_ranking(&refs, &query);
        want.truncate(3);
        prop_assert_eq!(got, want);
    }

    #[test]
    fn invalid_specs_are_rejected(x in "[a-z]{1,6}", chart in 0usize..5) {
        let (summary, _) = ingest(b"cat,num\na,1\nb,2\n", "t").unwrap();
        let spec = ChartSpec {
            chart_type: [ChartType::Bar, ChartType::Line, ChartType::Scatter, ChartType::Histogram, ChartType::Box][chart],
            x_field: format!("zz{x}"),
            y_field: Some("num".into()),
            aggregate: Aggregate::Mean,
            group_field: None,
        };
        prop_assert!(spec.validate(&summary).is_err());
    }
}

#[test]
fn ingest_is_deterministic_and_counts_add_up() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let csv = random_dataset_csv(&mut rng, 300);
        let (a, da) = ingest(csv.as_bytes(), "d").unwrap();
        let (b, _) = ingest(csv.as_bytes(), "d").unwrap();
        assert_eq!(a, b);
        for col in &a.columns {
            let counts = da.value_counts(&col.name).unwrap();
            assert_eq!(counts.values().sum::<usize>() + col.null_count, a.row_count);
            assert_eq!(counts.len(), col.unique_count);
        }
    }
}
