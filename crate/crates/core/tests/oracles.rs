//! Brute-force oracles for split search, voting, OOB scoring and
//! representative selection on small seeded problems.

use clubdrf::clubdrf::{club_drf, select_representative, PruneOptions};
use clubdrf::dataset::{
    load_dataset, BootstrapSample, ClassColumn, DataFormat, Dataset, FeatureKind, Value,
};
use clubdrf::forest::{majority_vote, train_forest};
use clubdrf::rng;
use clubdrf::tree::{train_tree_traced, SplitRule, TreeConfig};
use proptest::prelude::*;

fn gini(counts: &[f64]) -> f64 {
    let n: f64 = counts.iter().sum();
    if n == 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>()
}

/// Impurity decrease of the partition `left(feature value)`, from scratch.
fn decrease(d: &Dataset, records: &[usize], feature: usize, left: impl Fn(Value) -> bool) -> f64 {
    let k = d.schema().n_classes();
    let (mut l, mut r) = (vec![0.0; k], vec![0.0; k]);
    for &i in records {
        let rec = d.record(i);
        if left(rec.values[feature]) {
            l[rec.label] += 1.0;
        } else {
            r[rec.label] += 1.0;
        }
    }
    let (nl, nr): (f64, f64) = (l.iter().sum(), r.iter().sum());
    let n = nl + nr;
    let all: Vec<f64> = l.iter().zip(&r).map(|(a, b)| a + b).collect();
    gini(&all) - nl / n * gini(&l) - nr / n * gini(&r)
}

/// Every rule over `features`: each observed value as a `<=` cut, each
/// category as an equality test.
fn all_rules(d: &Dataset, records: &[usize], features: &[usize]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for &f in features {
        match &d.schema().features[f].kind {
            FeatureKind::Numeric => {
                for &i in records {
                    let Value::Numeric(cut) = d.record(i).values[f] else {
                        continue;
                    };
                    let g = decrease(
                        d,
                        records,
                        f,
                        |v| matches!(v, Value::Numeric(x) if x <= cut),
                    );
                    out.push((f, g));
                }
            }
            FeatureKind::Categorical { categories } => {
                for c in 0..categories.len() as u32 {
                    let g = decrease(d, records, f, |v| v == Value::Categorical(c));
                    out.push((f, g));
                }
            }
        }
    }
    out
}

fn rule_decrease(d: &Dataset, records: &[usize], rule: &SplitRule) -> f64 {
    decrease(d, records, rule.feature(), |v| {
        rule.goes_left(v).unwrap_or(false)
    })
}

fn table(rows: &[(Vec<u8>, u8)], n_numeric: usize) -> Dataset {
    let width = rows[0].0.len();
    let mut s: String = (0..width).map(|j| format!("f{j},")).collect();
    s.push_str("y\n");
    for (values, y) in rows {
        for (j, v) in values.iter().enumerate() {
            if j < n_numeric {
                s.push_str(&format!("{v},"));
            } else {
                s.push_str(&format!("c{v},"));
            }
        }
        s.push_str(&format!("k{y}\n"));
    }
    load_dataset(s.as_bytes(), DataFormat::Csv, &ClassColumn::Last).unwrap()
}

fn rows_strategy() -> impl Strategy<Value = (Vec<(Vec<u8>, u8)>, usize)> {
    (1usize..=4, 0usize..=4, 6usize..=30).prop_flat_map(|(width, numeric, n)| {
        let numeric = numeric.min(width);
        (
            prop::collection::vec((prop::collection::vec(0u8..5, width), 0u8..3), n),
            Just(numeric),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_traced_split_is_exhaustively_optimal((rows, numeric) in rows_strategy(), seed in any::<u64>(), s_pick in 0usize..4) {
        let d = table(&rows, numeric);
        let f = d.n_features();
        let s = 1 + s_pick % f;
        let mut r = rng::stream(seed, &[0]);
        let sample = BootstrapSample::draw(d.n(), &mut r);
        let (tree, trace) = train_tree_traced(&d, &sample, &TreeConfig::new(s), &mut r).unwrap();
        prop_assert!(tree.validate(d.schema().n_classes()).is_ok());
        for t in &trace {
            prop_assert!(t.candidates.len() >= s);
            let best = all_rules(&d, &t.records, &t.candidates)
                .into_iter()
                .map(|(_, g)| g)
                .fold(0.0f64, f64::max);
            match &t.rule {
                None => {
                    prop_assert!(best <= 1e-12, "missed a split with decrease {best}");
                    prop_assert_eq!(t.candidates.len(), f);
                }
                Some(rule) => {
                    prop_assert!(t.candidates.contains(&rule.feature()));
                    let g = rule_decrease(&d, &t.records, rule);
                    prop_assert!(g > 0.0);
                    prop_assert!((g - best).abs() <= 1e-9, "chose {g}, optimum {best}");
                }
            }
        }
    }
}

#[test]
fn uninformative_feature_is_ignored() {
    // f0 is noise; f1 separates the classes.
    let rows = vec![
        (vec![1, 0], 0),
        (vec![2, 0], 0),
        (vec![3, 0], 0),
        (vec![1, 4], 1),
        (vec![2, 4], 1),
        (vec![3, 4], 1),
    ];
    let d = table(&rows, 2);
    let records: Vec<usize> = (0..6).collect();
    let rule = clubdrf::tree::best_split(&d, &records, &[0, 1]).unwrap();
    assert_eq!(rule.feature(), 1);
    let best = all_rules(&d, &records, &[0, 1])
        .into_iter()
        .map(|(_, g)| g)
        .fold(0.0, f64::max);
    assert!((rule_decrease(&d, &records, &rule) - best).abs() < 1e-12);
    assert!((best - 0.5).abs() < 1e-12);
}

fn synthetic(n: usize, seed: u64) -> Dataset {
    use rand::Rng;
    let mut r = rng::stream(seed, &[99]);
    let mut s = String::from("a,b,c,y\n");
    for _ in 0..n {
        let a: f64 = r.gen_range(0.0..1.0);
        let b: u8 = r.gen_range(0..4);
        let c: f64 = r.gen_range(0.0..1.0);
        let y = if a + 0.2 * f64::from(b) + 0.3 * r.gen_range(0.0..1.0) > 0.9 {
            "hi"
        } else {
            "lo"
        };
        s.push_str(&format!("{a:.3},g{b},{c:.3},{y}\n"));
    }
    load_dataset(s.as_bytes(), DataFormat::Csv, &ClassColumn::Last).unwrap()
}

/// Most frequent label, lowest class index on ties.
fn brute_mode(labels: &[usize], n_classes: usize) -> usize {
    (0..n_classes)
        .map(|c| (labels.iter().filter(|&&l| l == c).count(), c))
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
        .unwrap()
        .1
}

#[test]
fn majority_vote_is_the_brute_force_mode() {
    for seed in 0..5 {
        let d = synthetic(30, seed);
        let forest = train_forest(&d, 20, 1, seed).unwrap();
        let k = d.schema().n_classes();
        let (table_labels, _) = forest.vote_table(None, &d);
        for (i, rec) in d.records().iter().enumerate() {
            let each: Vec<usize> = forest
                .trees
                .iter()
                .map(|t| t.predict(rec).unwrap())
                .collect();
            let want = brute_mode(&each, k);
            assert_eq!(majority_vote(&forest.trees, rec, k).unwrap(), want);
            assert_eq!(forest.predict(rec).unwrap(), want);
            assert_eq!(table_labels[i], want);
        }
    }
}

#[test]
fn vote_over_500_trees_matches_mode_on_50_records() {
    let d = synthetic(120, 3);
    let forest = train_forest(&d, 500, 1, 3).unwrap();
    for rec in d.records().iter().take(50) {
        let each: Vec<usize> = forest
            .trees
            .iter()
            .map(|t| t.predict(rec).unwrap())
            .collect();
        assert_eq!(forest.predict(rec).unwrap(), brute_mode(&each, 2));
    }
}

#[test]
fn cached_oob_scores_match_a_hand_loop() {
    let d = synthetic(30, 11);
    let forest = train_forest(&d, 20, 1, 11).unwrap();
    for (i, t) in forest.trees.iter().enumerate() {
        if t.oob.is_empty() {
            assert!(forest.scores[i].in_bag_fallback);
            continue;
        }
        let hits = t
            .oob
            .iter()
            .filter(|&&j| t.predict(d.record(j)).unwrap() == d.record(j).label)
            .count();
        let want = hits as f64 / t.oob.len() as f64;
        assert_eq!(forest.scores[i].accuracy, want);
        assert_eq!(forest.oob_accuracy(i, &d).unwrap(), want);
    }
}

#[test]
fn representatives_are_the_exhaustive_oob_argmax() {
    for seed in 0..4 {
        let d = synthetic(30, seed + 20);
        let forest = train_forest(&d, 20, 1, seed).unwrap();
        for k in [2, 5, 8] {
            let p = club_drf(&forest, &d, k, &PruneOptions::new(seed)).unwrap();
            let clusters = (0..k)
                .map(|c| p.clustering.members(c))
                .filter(|m| !m.is_empty());
            for (members, &rep) in clusters.zip(&p.representatives) {
                let accs: Vec<f64> = members
                    .iter()
                    .map(|&m| forest.oob_accuracy(m, &d).unwrap())
                    .collect();
                let top = accs.iter().cloned().fold(f64::MIN, f64::max);
                let want = members[accs.iter().position(|&a| a == top).unwrap()];
                assert_eq!(rep, want);
                assert_eq!(select_representative(&members, &forest).unwrap(), want);
            }
        }
    }
}
