//! Unpruned CART-style classification trees with per-node random feature
//! subsets, the base learner of the forest.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{BootstrapSample, Dataset, FeatureKind, Record, Value};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitRule {
    /// Left iff `value <= threshold`.
    NumericThreshold { feature: usize, threshold: f64 },
    /// Left iff `value == category`.
    CategoricalEquals { feature: usize, category: u32 },
}

impl SplitRule {
    pub fn feature(&self) -> usize {
        match *self {
            SplitRule::NumericThreshold { feature, .. }
            | SplitRule::CategoricalEquals { feature, .. } => feature,
        }
    }

    /// `None` when the value cannot be routed by this rule alone (missing or
    /// of the wrong kind).
    pub fn goes_left(&self, v: Value) -> Option<bool> {
        match (*self, v) {
            (SplitRule::NumericThreshold { threshold, .. }, Value::Numeric(x)) => {
                Some(x <= threshold)
            }
            (SplitRule::CategoricalEquals { category, .. }, Value::Categorical(c)) => {
                Some(c == category)
            }
            _ => None,
        }
    }
}

/// Tree nodes are stored in preorder: the left child of an internal node at
/// position `i` is at `i + 1`, the right child at `right`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        label: usize,
        /// In-bag class counts reaching this leaf (with bootstrap multiplicity).
        distribution: Vec<u32>,
    },
    Split {
        rule: SplitRule,
        right: usize,
        left_mass: u32,
        right_mass: u32,
        /// Sorted categories present at this node during training. Values
        /// outside this set go to the heavier child.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        seen: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    /// Sorted out-of-bag record indices of the bootstrap sample that built it.
    pub oob: Vec<usize>,
    pub depth: usize,
    pub leaf_count: usize,
    pub n_features: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeConfig {
    /// Candidate features drawn per node.
    pub s: usize,
    pub max_depth: Option<usize>,
}

impl TreeConfig {
    pub fn new(s: usize) -> Self {
        TreeConfig { s, max_depth: None }
    }

    pub fn check(&self, n_features: usize) -> Result<()> {
        if self.s == 0 || self.s > n_features {
            return Err(Error::Config(format!(
                "subset size {} out of range 1..={n_features}",
                self.s
            )));
        }
        Ok(())
    }
}

/// `floor(sqrt(F))`, at least 1.
pub fn default_subset_size(n_features: usize) -> usize {
    ((n_features as f64).sqrt().floor() as usize).max(1)
}

/// A split search performed while growing a tree: the node's records (with
/// bootstrap multiplicity), the features considered and the outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitTrace {
    pub records: Vec<usize>,
    pub candidates: Vec<usize>,
    pub rule: Option<SplitRule>,
}

/// Weighted Gini quality of a binary partition, kept as an exact fraction
/// `num / den` of `sum_L(c^2)/n_L + sum_R(c^2)/n_R`. Larger is better; it
/// beats the unsplit node iff `num * n > sum(c^2) * den`.
#[derive(Debug, Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(sq_left: u64, n_left: u64, sq_right: u64, n_right: u64) -> Score {
        Score {
            num: u128::from(sq_left) * u128::from(n_right)
                + u128::from(sq_right) * u128::from(n_left),
            den: u128::from(n_left) * u128::from(n_right),
        }
    }

    fn cmp(&self, other: &Score) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }

    fn improves_on(&self, sq_total: u64, n_total: u64) -> bool {
        self.num * u128::from(n_total) > u128::from(sq_total) * self.den
    }
}

fn class_counts(data: &Dataset, records: &[usize]) -> Vec<u64> {
    let mut counts = vec![0u64; data.schema().n_classes()];
    for &i in records {
        counts[data.record(i).label] += 1;
    }
    counts
}

fn sum_sq(counts: &[u64]) -> u64 {
    counts.iter().map(|c| c * c).sum()
}

/// Gini impurity of a class-count vector.
pub fn gini(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

/// Impurity decrease of `rule` on `records` (floating point, for reporting).
pub fn gini_decrease(data: &Dataset, records: &[usize], rule: &SplitRule) -> f64 {
    let k = data.schema().n_classes();
    let (mut l, mut r) = (vec![0u64; k], vec![0u64; k]);
    for &i in records {
        let rec = data.record(i);
        if rule.goes_left(rec.values[rule.feature()]).unwrap_or(false) {
            l[rec.label] += 1;
        } else {
            r[rec.label] += 1;
        }
    }
    let (nl, nr) = (l.iter().sum::<u64>() as f64, r.iter().sum::<u64>() as f64);
    let n = nl + nr;
    let parent: Vec<u64> = l.iter().zip(&r).map(|(a, b)| a + b).collect();
    gini(&parent) - nl / n * gini(&l) - nr / n * gini(&r)
}

/// Best Gini split of `records` over `candidates`, or `None` if no rule gives a
/// strictly positive impurity decrease. Ties go to the lower feature index,
/// then the lower threshold / earlier category.
pub fn best_split(data: &Dataset, records: &[usize], candidates: &[usize]) -> Option<SplitRule> {
    best_split_scored(data, records, candidates).map(|(rule, _)| rule)
}

fn best_split_scored(
    data: &Dataset,
    records: &[usize],
    candidates: &[usize],
) -> Option<(SplitRule, Score)> {
    if records.is_empty() {
        return None;
    }
    let n_classes = data.schema().n_classes();
    let totals = class_counts(data, records);
    let n_total = records.len() as u64;
    let sq_total = sum_sq(&totals);
    if totals.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let mut features = candidates.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut best: Option<(SplitRule, Score)> = None;
    let mut offer = |rule: SplitRule, score: Score| {
        if !score.improves_on(sq_total, n_total) {
            return;
        }
        if best
            .as_ref()
            .is_none_or(|(_, b)| score.cmp(b) == Ordering::Greater)
        {
            best = Some((rule, score));
        }
    };

    for &feature in &features {
        match &data.schema().features[feature].kind {
            FeatureKind::Numeric => {
                let mut pairs: Vec<(f64, usize)> = records
                    .iter()
                    .filter_map(|&i| {
                        let r = data.record(i);
                        match r.values[feature] {
                            Value::Numeric(x) => Some((x, r.label)),
                            _ => None,
                        }
                    })
                    .collect();
                if pairs.len() < records.len() {
                    // Unimputed data; train_tree rejects it up front.
                    continue;
                }
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut left = vec![0u64; n_classes];
                let mut right = totals.clone();
                let (mut sq_l, mut sq_r) = (0u64, sq_total);
                for w in 0..pairs.len() - 1 {
                    let c = pairs[w].1;
                    sq_l += 2 * left[c] + 1;
                    left[c] += 1;
                    sq_r -= 2 * right[c] - 1;
                    right[c] -= 1;
                    let (a, b) = (pairs[w].0, pairs[w + 1].0);
                    if a < b {
                        let n_l = (w + 1) as u64;
                        let mut threshold = a + (b - a) / 2.0;
                        if threshold >= b {
                            threshold = a;
                        }
                        offer(
                            SplitRule::NumericThreshold { feature, threshold },
                            Score::new(sq_l, n_l, sq_r, n_total - n_l),
                        );
                    }
                }
            }
            FeatureKind::Categorical { categories } => {
                let mut table = vec![vec![0u64; n_classes]; categories.len()];
                for &i in records {
                    let r = data.record(i);
                    if let Value::Categorical(c) = r.values[feature] {
                        table[c as usize][r.label] += 1;
                    }
                }
                for (category, left) in table.iter().enumerate() {
                    let n_l: u64 = left.iter().sum();
                    if n_l == 0 || n_l == n_total {
                        continue;
                    }
                    let right: Vec<u64> = totals.iter().zip(left).map(|(t, l)| t - l).collect();
                    offer(
                        SplitRule::CategoricalEquals {
                            feature,
                            category: category as u32,
                        },
                        Score::new(sum_sq(left), n_l, sum_sq(&right), n_total - n_l),
                    );
                }
            }
        }
    }
    best
}

/// Grows one unpruned tree on the in-bag records of `sample`.
pub fn train_tree(
    train: &Dataset,
    sample: &BootstrapSample,
    config: &TreeConfig,
    rng: &mut Rng,
) -> Result<DecisionTree> {
    grow(train, sample, config, rng, None)
}

/// As [`train_tree`], also returning every split search performed.
pub fn train_tree_traced(
    train: &Dataset,
    sample: &BootstrapSample,
    config: &TreeConfig,
    rng: &mut Rng,
) -> Result<(DecisionTree, Vec<SplitTrace>)> {
    let mut trace = Vec::new();
    let tree = grow(train, sample, config, rng, Some(&mut trace))?;
    Ok((tree, trace))
}

fn grow(
    train: &Dataset,
    sample: &BootstrapSample,
    config: &TreeConfig,
    rng: &mut Rng,
    trace: Option<&mut Vec<SplitTrace>>,
) -> Result<DecisionTree> {
    config.check(train.n_features())?;
    if sample.in_bag.is_empty() {
        return Err(Error::Config("empty in-bag sample".into()));
    }
    if let Some(&i) = sample.in_bag.iter().find(|&&i| i >= train.n()) {
        return Err(Error::Input(format!("bootstrap index {i} out of range")));
    }
    if sample.in_bag.iter().any(|&i| {
        train
            .record(i)
            .values
            .iter()
            .any(|v| matches!(v, Value::Missing))
    }) {
        return Err(Error::Input(
            "numeric missing values must be imputed before training".into(),
        ));
    }
    let mut builder = Builder {
        data: train,
        config,
        rng,
        nodes: Vec::new(),
        depth: 0,
        leaves: 0,
        trace,
    };
    builder.build(sample.in_bag.clone(), 0);
    Ok(DecisionTree {
        nodes: builder.nodes,
        oob: sample.oob.clone(),
        depth: builder.depth,
        leaf_count: builder.leaves,
        n_features: train.n_features(),
    })
}

struct Builder<'a> {
    data: &'a Dataset,
    config: &'a TreeConfig,
    rng: &'a mut Rng,
    nodes: Vec<Node>,
    depth: usize,
    leaves: usize,
    trace: Option<&'a mut Vec<SplitTrace>>,
}

impl Builder<'_> {
    fn leaf(&mut self, records: &[usize], depth: usize) {
        let counts = class_counts(self.data, records);
        self.depth = self.depth.max(depth);
        self.leaves += 1;
        self.nodes.push(Node::Leaf {
            label: argmax_first(&counts),
            distribution: counts.iter().map(|&c| c as u32).collect(),
        });
    }

    fn search(&mut self, records: &[usize]) -> Option<SplitRule> {
        let n_features = self.data.n_features();
        let mut order: Vec<usize> = (0..n_features).collect();
        order.shuffle(self.rng);
        // Draw `s` candidates; if none separates the node, keep drawing the
        // remaining features one at a time until one does.
        let mut used = self.config.s;
        let mut found = best_split(self.data, records, &order[..used]);
        while found.is_none() && used < n_features {
            used += 1;
            found = best_split(self.data, records, &order[used - 1..used]);
        }
        if let Some(trace) = self.trace.as_deref_mut() {
            trace.push(SplitTrace {
                records: records.to_vec(),
                candidates: order[..used].to_vec(),
                rule: found,
            });
        }
        found
    }

    fn build(&mut self, records: Vec<usize>, depth: usize) {
        let counts = class_counts(self.data, &records);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || records.len() < 2 || self.config.max_depth.is_some_and(|m| depth >= m) {
            return self.leaf(&records, depth);
        }
        let Some(rule) = self.search(&records) else {
            return self.leaf(&records, depth);
        };
        let feature = rule.feature();
        let (left, right): (Vec<usize>, Vec<usize>) = records.iter().partition(|&&i| {
            rule.goes_left(self.data.record(i).values[feature])
                .unwrap_or(false)
        });
        let mut seen: Vec<u32> = Vec::new();
        if let SplitRule::CategoricalEquals { .. } = rule {
            seen = records
                .iter()
                .filter_map(|&i| match self.data.record(i).values[feature] {
                    Value::Categorical(c) => Some(c),
                    _ => None,
                })
                .collect();
            seen.sort_unstable();
            seen.dedup();
        }
        let me = self.nodes.len();
        self.nodes.push(Node::Split {
            rule,
            right: 0,
            left_mass: left.len() as u32,
            right_mass: right.len() as u32,
            seen,
        });
        drop(records);
        self.build(left, depth + 1);
        let right_at = self.nodes.len();
        if let Node::Split { right: r, .. } = &mut self.nodes[me] {
            *r = right_at;
        }
        self.build(right, depth + 1);
    }
}

/// Index of the largest count; ties go to the lowest index.
pub fn argmax_first<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl DecisionTree {
    /// Class index for a record of the training schema.
    pub fn predict(&self, record: &Record) -> Result<usize> {
        if record.values.len() != self.n_features {
            return Err(Error::Input(format!(
                "record has {} features, tree expects {}",
                record.values.len(),
                self.n_features
            )));
        }
        Ok(self.classify(&record.values))
    }

    /// Unchecked routing; `values` must have `n_features` entries.
    #[inline]
    pub fn classify(&self, values: &[Value]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { label, .. } => return *label,
                Node::Split {
                    rule,
                    right,
                    left_mass,
                    right_mass,
                    seen,
                } => {
                    let v = values[rule.feature()];
                    let left = match (rule.goes_left(v), v) {
                        (Some(true), _) => true,
                        (Some(false), Value::Categorical(c)) if seen.binary_search(&c).is_err() => {
                            left_mass >= right_mass
                        }
                        (Some(false), _) => false,
                        (None, _) => left_mass >= right_mass,
                    };
                    at = if left { at + 1 } else { *right };
                }
            }
        }
    }

    /// Checks the preorder layout and leaf labels of a deserialized tree.
    pub fn validate(&self, n_classes: usize) -> Result<()> {
        if self.n_features == 0 {
            return Err(Error::Format("tree declares zero features".into()));
        }
        let mut leaves = 0;
        let end = self.check_subtree(0, 0, n_classes, &mut leaves)?;
        if end != self.nodes.len() {
            return Err(Error::Format(format!(
                "{} unreachable nodes",
                self.nodes.len() - end
            )));
        }
        if leaves != self.leaf_count {
            return Err(Error::Format("leaf count mismatch".into()));
        }
        if self.oob.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Format("oob indices not strictly increasing".into()));
        }
        Ok(())
    }

    /// Returns one past the last node of the subtree rooted at `at`.
    fn check_subtree(
        &self,
        at: usize,
        depth: usize,
        n_classes: usize,
        leaves: &mut usize,
    ) -> Result<usize> {
        if depth > self.depth {
            return Err(Error::Format("tree deeper than declared".into()));
        }
        match self.nodes.get(at) {
            None => Err(Error::Format(format!("node {at} missing"))),
            Some(Node::Leaf {
                label,
                distribution,
            }) => {
                if distribution.len() != n_classes || *label != argmax_first(distribution) {
                    return Err(Error::Format(format!(
                        "leaf {at} label/distribution mismatch"
                    )));
                }
                *leaves += 1;
                Ok(at + 1)
            }
            Some(Node::Split { rule, right, .. }) => {
                if rule.feature() >= self.n_features {
                    return Err(Error::Format(format!(
                        "node {at} splits on unknown feature"
                    )));
                }
                let left_end = self.check_subtree(at + 1, depth + 1, n_classes, leaves)?;
                if *right != left_end {
                    return Err(Error::Format(format!("node {at} right child misplaced")));
                }
                self.check_subtree(*right, depth + 1, n_classes, leaves)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_dataset, ClassColumn, DataFormat};
    use crate::rng;

    fn csv(s: &str) -> Dataset {
        load_dataset(s.as_bytes(), DataFormat::Csv, &ClassColumn::Last).unwrap()
    }

    fn identity_sample(n: usize) -> BootstrapSample {
        BootstrapSample {
            in_bag: (0..n).collect(),
            oob: vec![],
        }
    }

    fn xor() -> Dataset {
        csv("a,b,y\n0,0,N\n0,1,Y\n1,0,Y\n1,1,N\n")
    }

    #[test]
    fn pure_node_is_single_leaf() {
        let d = csv("x,y\n1,A\n2,A\n3,A\n4,B\n");
        let s = BootstrapSample {
            in_bag: vec![0, 1, 2, 2],
            oob: vec![3],
        };
        let t = train_tree(&d, &s, &TreeConfig::new(1), &mut rng::stream(1, &[])).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.leaf_count, 1);
        assert_eq!(t.depth, 0);
        assert_eq!(t.predict(d.record(3)).unwrap(), 0);
        assert_eq!(t.oob, [3]);
    }

    #[test]
    fn single_separating_feature() {
        let d = csv("f,y\np,A\nq,B\np,A\nq,B\n");
        let t = train_tree(
            &d,
            &identity_sample(4),
            &TreeConfig::new(1),
            &mut rng::stream(2, &[]),
        )
        .unwrap();
        assert_eq!(t.depth, 1);
        assert_eq!(t.leaf_count, 2);
        for r in d.records() {
            assert_eq!(t.predict(r).unwrap(), r.label);
        }
    }

    #[test]
    fn xor_tree_has_four_pure_leaves() {
        // At the root both features tie at zero Gini decrease, so any single
        // split fails; the node falls back to a leaf. With duplicated records
        // the tie is broken and the unique Gini-optimal tree has depth 2.
        let d = xor();
        let s = BootstrapSample {
            in_bag: vec![0, 0, 1, 2, 3],
            oob: vec![],
        };
        let t = train_tree(&d, &s, &TreeConfig::new(2), &mut rng::stream(3, &[])).unwrap();
        assert_eq!(t.depth, 2);
        assert_eq!(t.leaf_count, 4);
        for r in d.records() {
            assert_eq!(t.predict(r).unwrap(), r.label);
        }
    }

    #[test]
    fn numeric_midpoint() {
        let d = csv("x,y\n1,A\n3,B\n");
        assert_eq!(
            best_split(&d, &[0, 1], &[0]),
            Some(SplitRule::NumericThreshold {
                feature: 0,
                threshold: 2.0
            })
        );
        assert_eq!(best_split(&d, &[0, 0], &[0]), None);
    }

    #[test]
    fn ties_prefer_lower_feature_then_threshold() {
        // Both features separate perfectly.
        let d = csv("a,b,y\n1,1,A\n2,2,B\n");
        assert_eq!(
            best_split(&d, &[0, 1], &[1, 0]),
            Some(SplitRule::NumericThreshold {
                feature: 0,
                threshold: 1.5
            })
        );
        let c = csv("c,y\nr,A\ng,B\n");
        assert_eq!(
            best_split(&c, &[0, 1], &[0]),
            Some(SplitRule::CategoricalEquals {
                feature: 0,
                category: 0
            })
        );
    }

    #[test]
    fn unseen_category_goes_to_heavier_child() {
        let d = csv("c,y\nr,A\ng,B\ng,B\nb,A\n");
        // Grow on the first three records only, so 'b' is never seen.
        let s = BootstrapSample {
            in_bag: vec![0, 1, 2],
            oob: vec![3],
        };
        let t = train_tree(&d, &s, &TreeConfig::new(1), &mut rng::stream(4, &[])).unwrap();
        match &t.nodes[0] {
            Node::Split {
                rule,
                left_mass,
                right_mass,
                ..
            } => {
                assert_eq!(
                    *rule,
                    SplitRule::CategoricalEquals {
                        feature: 0,
                        category: 0
                    }
                );
                assert_eq!((*left_mass, *right_mass), (1, 2));
            }
            n => panic!("expected split, got {n:?}"),
        }
        assert_eq!(t.predict(d.record(3)).unwrap(), 1);
    }

    #[test]
    fn missing_value_routes_heavier_and_schema_mismatch_errors() {
        let d = csv("x,y\n1,A\n2,B\n3,B\n");
        let t = train_tree(
            &d,
            &identity_sample(3),
            &TreeConfig::new(1),
            &mut rng::stream(5, &[]),
        )
        .unwrap();
        let r = Record {
            values: vec![Value::Missing],
            label: 0,
        };
        assert_eq!(t.predict(&r).unwrap(), 1);
        let bad = Record {
            values: vec![],
            label: 0,
        };
        assert!(matches!(t.predict(&bad), Err(Error::Input(_))));
    }

    #[test]
    fn subset_size_out_of_range() {
        let d = xor();
        for s in [0, 3] {
            let e = train_tree(
                &d,
                &identity_sample(4),
                &TreeConfig::new(s),
                &mut rng::stream(1, &[]),
            );
            assert!(matches!(e, Err(Error::Config(_))));
        }
    }

    #[test]
    fn rejects_unimputed_data() {
        let d = csv("x,y\n1,A\n?,B\n");
        let e = train_tree(
            &d,
            &identity_sample(2),
            &TreeConfig::new(1),
            &mut rng::stream(1, &[]),
        );
        assert!(matches!(e, Err(Error::Input(_))));
    }

    #[test]
    fn depth_cap() {
        let d = csv("x,y\n1,A\n2,B\n3,A\n4,B\n5,A\n");
        let cfg = TreeConfig {
            s: 1,
            max_depth: Some(1),
        };
        let t = train_tree(&d, &identity_sample(5), &cfg, &mut rng::stream(1, &[])).unwrap();
        assert!(t.depth <= 1);
        t.validate(2).unwrap();
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[5, 0]), 0.0);
        assert!((gini(&[1, 1]) - 0.5).abs() < 1e-15);
        let d = csv("x,y\n1,A\n3,B\n");
        let r = SplitRule::NumericThreshold {
            feature: 0,
            threshold: 2.0,
        };
        assert!((gini_decrease(&d, &[0, 1], &r) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn validate_catches_corruption() {
        let d = csv("x,y\n1,A\n2,B\n3,B\n");
        let mut t = train_tree(
            &d,
            &identity_sample(3),
            &TreeConfig::new(1),
            &mut rng::stream(5, &[]),
        )
        .unwrap();
        t.validate(2).unwrap();
        if let Node::Split { right, .. } = &mut t.nodes[0] {
            *right = 1;
        }
        assert!(t.validate(2).is_err());
    }
}
