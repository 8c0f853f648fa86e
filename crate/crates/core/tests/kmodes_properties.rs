use clubdrf::kmodes::{
    kmodes_cluster, matching_dissimilarity, CategoricalPoint, DEFAULT_MAX_ITERATIONS,
};
use proptest::prelude::*;

fn points(rows: &[Vec<u32>]) -> Vec<CategoricalPoint> {
    rows.iter()
        .enumerate()
        .map(|(i, v)| CategoricalPoint {
            values: v.clone(),
            payload_id: i,
        })
        .collect()
}

/// Cost of a fixed partition under its best modes: per cluster and position,
/// everything except the most frequent category is a mismatch.
fn partition_cost(rows: &[Vec<u32>], assign: &[usize], k: usize) -> u64 {
    let m = rows[0].len();
    let mut cost = 0;
    for c in 0..k {
        let members: Vec<&Vec<u32>> = rows
            .iter()
            .zip(assign)
            .filter(|(_, &a)| a == c)
            .map(|(r, _)| r)
            .collect();
        for j in 0..m {
            let mut freq = std::collections::HashMap::new();
            for r in &members {
                *freq.entry(r[j]).or_insert(0u64) += 1;
            }
            let top = freq.values().copied().max().unwrap_or(0);
            cost += members.len() as u64 - top;
        }
    }
    cost
}

fn brute_force_two_partition(rows: &[Vec<u32>]) -> u64 {
    let n = rows.len();
    // Point 0 is pinned to cluster 0; both clusters non-empty.
    (0..1u32 << (n - 1))
        .map(|mask| {
            (0..n)
                .map(|i| {
                    if i == 0 {
                        0
                    } else {
                        ((mask >> (i - 1)) & 1) as usize
                    }
                })
                .collect::<Vec<_>>()
        })
        .filter(|a| a.contains(&1))
        .map(|a| partition_cost(rows, &a, 2))
        .min()
        .unwrap()
}

fn fixture() -> Vec<Vec<u32>> {
    vec![
        vec![0, 0, 0, 0],
        vec![0, 0, 0, 1],
        vec![0, 0, 1, 0],
        vec![0, 1, 0, 0],
        vec![1, 1, 1, 1],
        vec![1, 1, 1, 0],
        vec![1, 1, 0, 1],
        vec![1, 0, 1, 1],
    ]
}

#[test]
fn eight_point_fixture_is_near_optimal() {
    let rows = fixture();
    let opt = brute_force_two_partition(&rows);
    assert_eq!(opt, 6);
    let c = kmodes_cluster(&points(&rows), 2, 0, DEFAULT_MAX_ITERATIONS).unwrap();
    assert!(c.converged);
    assert_eq!(c.cost, partition_cost(&rows, &c.assignments, 2));
    assert!(
        c.cost as f64 <= 1.25 * opt as f64,
        "cost {} vs optimum {opt}",
        c.cost
    );
}

#[test]
fn eight_point_fixture_usually_reaches_the_optimum() {
    // Random initial modes can start both clusters in the same group, which
    // leaves a local optimum of cost 10 for some seeds.
    let rows = fixture();
    let opt = brute_force_two_partition(&rows);
    let costs: Vec<u64> = (0..200)
        .map(|seed| {
            kmodes_cluster(&points(&rows), 2, seed, DEFAULT_MAX_ITERATIONS)
                .unwrap()
                .cost
        })
        .collect();
    assert!(costs.iter().all(|&c| c >= opt));
    assert!(costs.iter().filter(|&&c| c == opt).count() >= 160);
}

fn rows_strategy() -> impl Strategy<Value = Vec<Vec<u32>>> {
    (1usize..8, 2usize..40)
        .prop_flat_map(|(m, n)| prop::collection::vec(prop::collection::vec(0u32..3, m), n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn dissimilarity_is_a_metric(x in prop::collection::vec(0u32..4, 6), y in prop::collection::vec(0u32..4, 6), z in prop::collection::vec(0u32..4, 6)) {
        let d = |a: &[u32], b: &[u32]| matching_dissimilarity(a, b).unwrap();
        prop_assert_eq!(d(&x, &x), 0);
        prop_assert_eq!(d(&x, &y), d(&y, &x));
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z));
        prop_assert_eq!(d(&x, &y) == 0, x == y);
        prop_assert_eq!(d(&x, &y), x.iter().zip(&y).filter(|(a, b)| a != b).count());
    }

    #[test]
    fn clustering_invariants(rows in rows_strategy(), k_pick in 0usize..6, seed in any::<u64>()) {
        let k = 1 + k_pick % rows.len();
        let pts = points(&rows);
        let c = kmodes_cluster(&pts, k, seed, DEFAULT_MAX_ITERATIONS).unwrap();
        prop_assert_eq!(c.assignments.len(), rows.len());
        prop_assert!(c.assignments.iter().all(|&a| a < k));
        prop_assert!(c.iterations <= DEFAULT_MAX_ITERATIONS);
        prop_assert!(c.cost_history.windows(2).all(|w| w[1] <= w[0]));
        let recomputed: u64 = rows
            .iter()
            .zip(&c.assignments)
            .map(|(r, &a)| matching_dissimilarity(r, &c.modes[a]).unwrap() as u64)
            .sum();
        prop_assert_eq!(c.cost, recomputed);
        prop_assert!(partition_cost(&rows, &c.assignments, k) <= c.cost);
        prop_assert_eq!(c.non_empty() + c.empty_clusters.len(), k);
        prop_assert_eq!(&c, &kmodes_cluster(&pts, k, seed, DEFAULT_MAX_ITERATIONS).unwrap());
    }
}

#[test]
fn k_equal_to_n_on_distinct_points_costs_nothing() {
    let rows: Vec<Vec<u32>> = (0..6u32).map(|i| vec![i % 2, i / 2, i]).collect();
    let c = kmodes_cluster(&points(&rows), 6, 5, DEFAULT_MAX_ITERATIONS).unwrap();
    assert_eq!(c.cost, 0);
    assert_eq!(c.non_empty(), 6);
}
