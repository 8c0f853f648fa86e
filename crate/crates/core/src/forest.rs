//! Bagged random forest: training, majority voting, per-tree label vectors
//! and out-of-bag scoring.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{BootstrapSample, Dataset, Record, Schema, Value};
use crate::error::{Error, Result};
use crate::rng;
use crate::tree::{self, DecisionTree, TreeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Candidate features per node.
    pub s: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
}

/// Accuracy of one tree on its out-of-bag records. When the tree has no OOB
/// records the in-bag accuracy is used instead and `in_bag_fallback` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeScore {
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub in_bag_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub schema: Schema,
    pub params: ForestParams,
    /// Size of the training set the trees were grown on.
    pub n_train: usize,
    /// Construction order; index `i` identifies tree `i` everywhere.
    pub trees: Vec<DecisionTree>,
    pub scores: Vec<TreeScore>,
}

/// One tree's predictions over a dataset, as class indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    pub tree_index: usize,
    pub labels: Vec<u32>,
}

pub fn train_forest(train: &Dataset, n_trees: usize, s: usize, seed: u64) -> Result<RandomForest> {
    train_forest_with(
        train,
        ForestParams {
            n_trees,
            s,
            seed,
            max_depth: None,
        },
    )
}

/// Trees are grown in parallel; tree `i` draws from its own stream derived
/// from `(seed, i)`, so the result does not depend on the thread count.
pub fn train_forest_with(train: &Dataset, params: ForestParams) -> Result<RandomForest> {
    if params.n_trees == 0 {
        return Err(Error::Config("forest needs at least one tree".into()));
    }
    let config = TreeConfig {
        s: params.s,
        max_depth: params.max_depth,
    };
    config.check(train.n_features())?;
    let built: Vec<(DecisionTree, TreeScore)> = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(params.seed, &[rng::TAG_TREE, i as u64]);
            let sample = BootstrapSample::draw(train.n(), &mut rng);
            let tree = tree::train_tree(train, &sample, &config, &mut rng)?;
            let score = score_tree(i, &tree, &sample, train);
            Ok((tree, score))
        })
        .collect::<Result<_>>()?;
    let (trees, scores) = built.into_iter().unzip();
    Ok(RandomForest {
        schema: train.schema().clone(),
        params,
        n_train: train.n(),
        trees,
        scores,
    })
}

fn score_tree(
    i: usize,
    tree: &DecisionTree,
    sample: &BootstrapSample,
    train: &Dataset,
) -> TreeScore {
    match accuracy_on(tree, train, &tree.oob) {
        Some(accuracy) => TreeScore {
            accuracy,
            in_bag_fallback: false,
        },
        None => {
            log::warn!("tree {i} has no out-of-bag records; scoring it on its in-bag records");
            let accuracy = accuracy_on(tree, train, &sample.distinct_in_bag()).unwrap_or(0.0);
            TreeScore {
                accuracy,
                in_bag_fallback: true,
            }
        }
    }
}

fn accuracy_on(tree: &DecisionTree, data: &Dataset, indices: &[usize]) -> Option<f64> {
    if indices.is_empty() {
        return None;
    }
    let correct = indices
        .iter()
        .filter(|&&j| {
            let r = data.record(j);
            tree.classify(&r.values) == r.label
        })
        .count();
    Some(correct as f64 / indices.len() as f64)
}

/// Reusable vote counter for allocation-free ensemble prediction.
#[derive(Debug, Clone)]
pub struct Votes {
    counts: Vec<u32>,
}

impl Votes {
    pub fn new(n_classes: usize) -> Self {
        Votes {
            counts: vec![0; n_classes],
        }
    }

    /// Majority label of `trees` on `values`; ties go to the earlier class.
    /// `trees` must be non-empty.
    #[inline]
    pub fn cast<'a>(
        &mut self,
        trees: impl IntoIterator<Item = &'a DecisionTree>,
        values: &[Value],
    ) -> usize {
        self.counts.fill(0);
        for t in trees {
            self.counts[t.classify(values)] += 1;
        }
        tree::argmax_first(&self.counts)
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }
}

/// Plurality vote of a set of trees; ties are broken by schema class order.
pub fn majority_vote<'a, I>(trees: I, record: &Record, n_classes: usize) -> Result<usize>
where
    I: IntoIterator<Item = &'a DecisionTree>,
{
    let mut votes = Votes::new(n_classes);
    let mut any = false;
    let label = votes.cast(
        trees.into_iter().inspect(|t| {
            any = true;
            debug_assert_eq!(t.n_features, record.values.len());
        }),
        &record.values,
    );
    if !any {
        return Err(Error::Usage(
            "majority vote over an empty set of trees".into(),
        ));
    }
    Ok(label)
}

impl RandomForest {
    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.schema.n_classes()
    }

    pub fn predict(&self, record: &Record) -> Result<usize> {
        self.check_record(record)?;
        majority_vote(&self.trees, record, self.n_classes())
    }

    /// Vote of the trees at `indices` only.
    pub fn predict_with(&self, indices: &[usize], record: &Record) -> Result<usize> {
        self.check_record(record)?;
        let trees = indices
            .iter()
            .map(|&i| {
                self.trees
                    .get(i)
                    .ok_or_else(|| Error::Usage(format!("no tree {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        majority_vote(trees, record, self.n_classes())
    }

    fn check_record(&self, record: &Record) -> Result<()> {
        if record.values.len() != self.schema.n_features() {
            return Err(Error::Input(format!(
                "record has {} features, forest expects {}",
                record.values.len(),
                self.schema.n_features()
            )));
        }
        Ok(())
    }

    /// Predictions and per-class vote fractions of the trees at `indices`
    /// (all trees when `None`) over every record of `data`.
    pub fn vote_table(
        &self,
        indices: Option<&[usize]>,
        data: &Dataset,
    ) -> (Vec<usize>, Vec<Vec<f64>>) {
        let all: Vec<usize>;
        let idx = match indices {
            Some(i) => i,
            None => {
                all = (0..self.trees.len()).collect();
                &all
            }
        };
        let mut votes = Votes::new(self.n_classes());
        let total = idx.len() as f64;
        data.records()
            .iter()
            .map(|r| {
                let label = votes.cast(idx.iter().map(|&i| &self.trees[i]), &r.values);
                let frac = votes
                    .counts()
                    .iter()
                    .map(|&c| f64::from(c) / total)
                    .collect();
                (label, frac)
            })
            .unzip()
    }

    pub fn label_vector(&self, tree_index: usize, data: &Dataset) -> Result<LabelVector> {
        let tree = self.trees.get(tree_index).ok_or_else(|| {
            Error::Usage(format!(
                "no tree {tree_index} in a forest of {}",
                self.len()
            ))
        })?;
        Ok(LabelVector {
            tree_index,
            labels: data
                .records()
                .iter()
                .map(|r| tree.classify(&r.values) as u32)
                .collect(),
        })
    }

    /// All label vectors, in tree order.
    pub fn label_vectors(&self, data: &Dataset) -> Vec<LabelVector> {
        (0..self.len())
            .into_par_iter()
            .map(|i| self.label_vector(i, data).expect("index in range"))
            .collect()
    }

    /// Fraction of the tree's OOB records (indices into `train`) it classifies
    /// correctly.
    pub fn oob_accuracy(&self, tree_index: usize, train: &Dataset) -> Result<f64> {
        let tree = self
            .trees
            .get(tree_index)
            .ok_or_else(|| Error::Usage(format!("no tree {tree_index}")))?;
        if tree.oob.iter().any(|&j| j >= train.n()) {
            return Err(Error::Usage(
                "training set smaller than the forest's OOB indices".into(),
            ));
        }
        accuracy_on(tree, train, &tree.oob).ok_or(Error::EmptyOob(tree_index))
    }

    /// The trees at `indices`, in that order, as a standalone ensemble.
    pub fn select(&self, indices: &[usize]) -> RandomForest {
        RandomForest {
            schema: self.schema.clone(),
            params: self.params,
            n_train: self.n_train,
            trees: indices.iter().map(|&i| self.trees[i].clone()).collect(),
            scores: indices.iter().map(|&i| self.scores[i]).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::Format("forest has no trees".into()));
        }
        if self.trees.len() != self.scores.len() {
            return Err(Error::Format("tree and score counts differ".into()));
        }
        self.schema.validate()?;
        for (i, t) in self.trees.iter().enumerate() {
            if t.n_features != self.schema.n_features() {
                return Err(Error::Format(format!("tree {i} feature count mismatch")));
            }
            t.validate(self.schema.n_classes())
                .map_err(|e| Error::Format(format!("tree {i}: {e}")))?;
        }
        Ok(())
    }
}
