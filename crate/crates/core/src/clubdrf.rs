//! Clustering-based forest pruning: cluster trees by the labels they assign
//! to the training set and keep one representative per cluster.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::{RandomForest, TreeScore};
use crate::kmodes::{self, CategoricalPoint, Clustering};
use crate::rng;

/// Cluster counts swept by the experiments.
pub const DEFAULT_K_LIST: [usize; 8] = [5, 10, 15, 20, 25, 30, 35, 40];

/// How a representative is chosen within a cluster.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Highest out-of-bag accuracy; ties go to the lower tree index.
    #[default]
    OobBest,
    /// A seeded uniform draw among the members.
    Random,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::OobBest => "oob_best",
            Policy::Random => "random",
        })
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oob_best" | "oob-best" => Ok(Policy::OobBest),
            "random" => Ok(Policy::Random),
            _ => Err(Error::Config(format!(
                "unknown policy '{s}' (expected oob_best or random)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneOptions {
    pub policy: Policy,
    /// Seeds the clustering and the random policy.
    pub seed: u64,
    pub max_iterations: usize,
    /// Cluster on label vectors over this fraction of the training set
    /// (seeded draw) instead of all of it.
    pub subsample: Option<f64>,
}

impl PruneOptions {
    pub fn new(seed: u64) -> Self {
        PruneOptions {
            policy: Policy::OobBest,
            seed,
            max_iterations: kmodes::DEFAULT_MAX_ITERATIONS,
            subsample: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrunedEnsemble {
    /// Parent tree indices, one per non-empty cluster, in cluster order.
    pub representatives: Vec<usize>,
    pub k_requested: usize,
    pub k_effective: usize,
    pub parent_size: usize,
    /// Exact pruning level in percent.
    pub pruning_level: Ratio<u64>,
    pub policy: Policy,
    pub clustering: Clustering,
}

impl PrunedEnsemble {
    /// Pruning level rounded to a whole percent, for reports.
    pub fn pruning_percent(&self) -> u64 {
        self.pruning_level.round().to_integer()
    }

    pub fn speedup_estimate(&self) -> f64 {
        self.parent_size as f64 / self.k_effective as f64
    }
}

/// `100 * (1 - pruned / parent)`, exactly.
pub fn pruning_level(parent_size: usize, pruned_size: usize) -> Result<Ratio<u64>> {
    check_sizes(parent_size, pruned_size)?;
    Ok(Ratio::new(
        100 * (parent_size - pruned_size) as u64,
        parent_size as u64,
    ))
}

/// Classification speedup under the model that per-instance cost is
/// proportional to the number of trees traversed.
pub fn speedup_estimate(parent_size: usize, pruned_size: usize) -> Result<f64> {
    check_sizes(parent_size, pruned_size)?;
    Ok(parent_size as f64 / pruned_size as f64)
}

fn check_sizes(parent: usize, pruned: usize) -> Result<()> {
    if pruned == 0 || pruned > parent {
        return Err(Error::Usage(format!(
            "pruned size {pruned} must lie in 1..={parent}"
        )));
    }
    Ok(())
}

/// Member with the highest cached OOB score; ties go to the lower index.
pub fn select_representative(members: &[usize], forest: &RandomForest) -> Result<usize> {
    best_by_score(members, &forest.scores)
}

fn best_by_score(members: &[usize], scores: &[TreeScore]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for &m in members {
        let s = scores
            .get(m)
            .ok_or_else(|| Error::Usage(format!("no tree {m}")))?;
        match best {
            Some(b) if scores[b].accuracy > s.accuracy => {}
            Some(b) if scores[b].accuracy == s.accuracy && b < m => {}
            _ => best = Some(m),
        }
    }
    best.ok_or_else(|| Error::Usage("empty cluster has no representative".into()))
}

/// Prunes `forest` to at most `k` trees. `train` must be the data the
/// forest was grown on.
pub fn club_drf(
    forest: &RandomForest,
    train: &Dataset,
    k: usize,
    opts: &PruneOptions,
) -> Result<PrunedEnsemble> {
    if k == 0 || k > forest.len() {
        return Err(Error::Config(format!(
            "k = {k} must lie in 1..={}",
            forest.len()
        )));
    }
    if train.n() != forest.n_train {
        return Err(Error::Usage(format!(
            "forest was grown on {} records, got a training set of {}",
            forest.n_train,
            train.n()
        )));
    }
    let reference = match opts.subsample {
        None => train.clone(),
        Some(f) if f > 0.0 && f <= 1.0 => {
            let mut idx: Vec<usize> = (0..train.n()).collect();
            idx.shuffle(&mut rng::stream(opts.seed, &[rng::TAG_SPLIT, 1]));
            idx.truncate(((f * train.n() as f64).round() as usize).max(1));
            idx.sort_unstable();
            train.subset(&idx)
        }
        Some(f) => {
            return Err(Error::Config(format!(
                "subsample fraction {f} not in (0, 1]"
            )))
        }
    };
    let points: Vec<CategoricalPoint> = forest
        .label_vectors(&reference)
        .into_iter()
        .map(|lv| CategoricalPoint {
            values: lv.labels,
            payload_id: lv.tree_index,
        })
        .collect();
    let clustering = kmodes::kmodes_cluster(&points, k, opts.seed, opts.max_iterations)?;

    let mut policy_rng = rng::stream(opts.seed, &[rng::TAG_POLICY]);
    let mut representatives = Vec::new();
    for c in 0..k {
        let members: Vec<usize> = clustering
            .members(c)
            .into_iter()
            .map(|p| points[p].payload_id)
            .collect();
        if members.is_empty() {
            continue;
        }
        let rep = match opts.policy {
            Policy::OobBest => best_by_score(&members, &forest.scores)?,
            Policy::Random => *members.choose(&mut policy_rng).expect("non-empty"),
        };
        representatives.push(rep);
    }
    let k_effective = representatives.len();
    Ok(PrunedEnsemble {
        pruning_level: pruning_level(forest.len(), k_effective)?,
        representatives,
        k_requested: k,
        k_effective,
        parent_size: forest.len(),
        policy: opts.policy,
        clustering,
    })
}
