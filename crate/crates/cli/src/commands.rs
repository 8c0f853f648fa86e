//! Model-file commands: train, prune, latency benchmark and diversity table.

use std::hint::black_box;
use std::path::Path;
use std::time::Instant;

use clubdrf::analysis::{self, PairwiseSummary};
use clubdrf::clubdrf::{self as prune, club_drf, Policy, PruneOptions};
use clubdrf::container::{ModelFile, TrainingSplit};
use clubdrf::dataset::{self, ClassColumn, Dataset};
use clubdrf::forest::{train_forest, RandomForest, Votes};
use clubdrf::rng;
use clubdrf::tree::default_subset_size;
use clubdrf::{Error, Result};
use rand::seq::index;

use crate::experiment::split_and_impute;

const TAG_SUBSET: u64 = 0x5B5E7;

/// Random subsets drawn per diversity comparison.
pub const DIVERSITY_DRAWS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub trees: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub subset_size: usize,
    pub mean_oob_accuracy: f64,
}

pub fn train(
    dataset: &Path,
    class: &ClassColumn,
    n_trees: usize,
    subset_size: Option<usize>,
    train_fraction: f64,
    seed: u64,
) -> Result<(ModelFile, TrainSummary)> {
    if n_trees == 0 {
        return Err(Error::Config("forest needs at least one tree".into()));
    }
    let d = dataset::load_path(dataset, class)?;
    let (train, test) = split_and_impute(&d, train_fraction, seed)?;
    let s = subset_size.unwrap_or_else(|| default_subset_size(train.n_features()));
    let forest = train_forest(&train, n_trees, s, seed)?;
    let summary = TrainSummary {
        trees: forest.len(),
        n_train: train.n(),
        n_test: test.n(),
        subset_size: s,
        mean_oob_accuracy: forest.scores.iter().map(|s| s.accuracy).sum::<f64>()
            / forest.len() as f64,
    };
    Ok((
        ModelFile::forest(
            forest,
            Some(TrainingSplit {
                train_fraction,
                split_seed: seed,
            }),
        ),
        summary,
    ))
}

/// Re-derives the imputed train and test splits a model was trained with.
pub fn model_splits(
    model: &ModelFile,
    dataset: &Path,
    class: &ClassColumn,
) -> Result<(Dataset, Dataset)> {
    let split = model.training.ok_or_else(|| {
        Error::Config("model carries no training split; it was not written by `train`".into())
    })?;
    let d = dataset::load_path(dataset, class)?;
    let (train, test) = split_and_impute(&d, split.train_fraction, split.split_seed)?;
    if *train.schema() != model.forest.schema || train.n() != model.forest.n_train {
        return Err(Error::Config(format!(
            "{} is not the dataset this model was trained on",
            dataset.display()
        )));
    }
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneSummary {
    pub k: usize,
    pub k_effective: usize,
    pub parent_size: usize,
    pub pruning_percent: f64,
    pub estimated_speedup: f64,
}

impl std::fmt::Display for PruneSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "k={} k_effective={} trees={}->{} pruning={:.2}% estimated_speedup={:.2}x",
            self.k,
            self.k_effective,
            self.parent_size,
            self.k_effective,
            self.pruning_percent,
            self.estimated_speedup
        )
    }
}

pub fn prune(
    model: &ModelFile,
    dataset: &Path,
    class: &ClassColumn,
    k: usize,
    policy: Policy,
    seed: u64,
) -> Result<(ModelFile, PruneSummary)> {
    if model.pruned_from.is_some() {
        return Err(Error::Config("model is already pruned".into()));
    }
    let (train, _) = model_splits(model, dataset, class)?;
    let opts = PruneOptions {
        policy,
        ..PruneOptions::new(seed)
    };
    let p = club_drf(&model.forest, &train, k, &opts)?;
    let level = p.pruning_level;
    let summary = PruneSummary {
        k,
        k_effective: p.k_effective,
        parent_size: p.parent_size,
        pruning_percent: *level.numer() as f64 / *level.denom() as f64,
        estimated_speedup: p.speedup_estimate(),
    };
    Ok((ModelFile::pruned(model, &p, seed), summary))
}

/// Checks that `pruned` was derived from `full` (or is `full` itself).
fn check_pair(full: &ModelFile, pruned: &ModelFile) -> Result<()> {
    if full.forest.schema != pruned.forest.schema {
        return Err(Error::Config("models have different schemas".into()));
    }
    if let Some(p) = &pruned.pruned_from {
        if p.parent_seed != full.forest.params.seed || p.parent_size != full.forest.len() {
            return Err(Error::Config(
                "pruned model was not derived from this forest".into(),
            ));
        }
    } else if pruned.forest != full.forest {
        return Err(Error::Config(
            "second model is neither pruned from the first nor identical to it".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub instances: usize,
    pub iterations: usize,
    pub full_trees: usize,
    pub pruned_trees: usize,
    pub full_ns_per_instance: f64,
    pub pruned_ns_per_instance: f64,
    pub measured_speedup: f64,
    pub estimated_speedup: f64,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        format!(
            "ensemble,trees,instances,iterations,ns_per_instance\n\
             full,{},{},{},{:.1}\n\
             pruned,{},{},{},{:.1}\n\
             measured_speedup,{:.2}\n\
             estimated_speedup,{:.2}\n",
            self.full_trees,
            self.instances,
            self.iterations,
            self.full_ns_per_instance,
            self.pruned_trees,
            self.instances,
            self.iterations,
            self.pruned_ns_per_instance,
            self.measured_speedup,
            self.estimated_speedup,
        )
    }
}

/// Mean wall-clock time to classify one instance, single-threaded, over
/// `iterations` passes through `data` after one warm-up pass.
pub fn ns_per_instance(forest: &RandomForest, data: &Dataset, iterations: usize) -> f64 {
    let mut votes = Votes::new(forest.n_classes());
    let mut pass = || {
        for r in data.records() {
            black_box(votes.cast(&forest.trees, black_box(&r.values)));
        }
    };
    pass();
    let start = Instant::now();
    for _ in 0..iterations {
        pass();
    }
    start.elapsed().as_nanos() as f64 / (iterations * data.n()) as f64
}

pub fn bench_forests(
    full: &RandomForest,
    pruned: &RandomForest,
    data: &Dataset,
    iterations: usize,
) -> Result<BenchReport> {
    if iterations == 0 {
        return Err(Error::Usage("iterations must be at least 1".into()));
    }
    if data.n() == 0 {
        return Err(Error::Usage("no instances to classify".into()));
    }
    let estimated_speedup = prune::speedup_estimate(full.len(), pruned.len())?;
    let full_ns = ns_per_instance(full, data, iterations);
    let pruned_ns = ns_per_instance(pruned, data, iterations);
    Ok(BenchReport {
        instances: data.n(),
        iterations,
        full_trees: full.len(),
        pruned_trees: pruned.len(),
        full_ns_per_instance: full_ns,
        pruned_ns_per_instance: pruned_ns,
        measured_speedup: full_ns / pruned_ns,
        estimated_speedup,
    })
}

pub fn bench(
    full: &ModelFile,
    pruned: &ModelFile,
    dataset: &Path,
    class: &ClassColumn,
    iterations: usize,
) -> Result<BenchReport> {
    if iterations == 0 {
        return Err(Error::Usage("iterations must be at least 1".into()));
    }
    check_pair(full, pruned)?;
    let (_, test) = model_splits(full, dataset, class)?;
    bench_forests(&full.forest, &pruned.forest, &test, iterations)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiversityRow {
    pub ensemble: &'static str,
    pub draw: Option<usize>,
    pub trees: usize,
    /// `None` for ensembles with fewer than two members.
    pub summary: Option<PairwiseSummary>,
}

/// Sorted indices of a seeded `size`-subset of `0..n`.
pub fn random_subset(n: usize, size: usize, seed: u64, draw: usize) -> Vec<usize> {
    let mut r = rng::stream(seed, &[TAG_SUBSET, draw as u64]);
    let mut v = index::sample(&mut r, n, size).into_vec();
    v.sort_unstable();
    v
}

/// Mean pairwise measures of a set of trees, given every tree's label vector.
pub fn subset_diversity(
    vectors: &[Vec<u32>],
    members: &[usize],
    truth: &[u32],
) -> Result<Option<PairwiseSummary>> {
    let preds: Vec<&[u32]> = members.iter().map(|&i| vectors[i].as_slice()).collect();
    analysis::mean_pairwise(&preds, truth)
}

/// Pruned ensemble, `draws` equal-size random subsets and the full forest,
/// all measured on `data`.
pub fn diversity_rows(
    full: &RandomForest,
    pruned: &RandomForest,
    data: &Dataset,
    seed: u64,
    draws: usize,
) -> Result<Vec<DiversityRow>> {
    let truth: Vec<u32> = data.labels().iter().map(|&l| l as u32).collect();
    let full_vectors: Vec<Vec<u32>> = full
        .label_vectors(data)
        .into_iter()
        .map(|v| v.labels)
        .collect();
    let pruned_vectors: Vec<Vec<u32>> = pruned
        .label_vectors(data)
        .into_iter()
        .map(|v| v.labels)
        .collect();
    let size = pruned.len();
    let mut rows = vec![DiversityRow {
        ensemble: "pruned",
        draw: None,
        trees: size,
        summary: subset_diversity(&pruned_vectors, &(0..size).collect::<Vec<_>>(), &truth)?,
    }];
    for draw in 0..draws {
        let members = random_subset(full.len(), size, seed, draw);
        rows.push(DiversityRow {
            ensemble: "random",
            draw: Some(draw),
            trees: size,
            summary: subset_diversity(&full_vectors, &members, &truth)?,
        });
    }
    rows.push(DiversityRow {
        ensemble: "full",
        draw: None,
        trees: full.len(),
        summary: subset_diversity(&full_vectors, &(0..full.len()).collect::<Vec<_>>(), &truth)?,
    });
    Ok(rows)
}

pub fn diversity(
    full: &ModelFile,
    pruned: &ModelFile,
    dataset: &Path,
    class: &ClassColumn,
    seed: u64,
) -> Result<Vec<DiversityRow>> {
    check_pair(full, pruned)?;
    let (_, test) = model_splits(full, dataset, class)?;
    diversity_rows(&full.forest, &pruned.forest, &test, seed, DIVERSITY_DRAWS)
}

pub fn diversity_csv(rows: &[DiversityRow]) -> String {
    let mut out = String::from("ensemble,draw,trees,pairs,diversity,disagreement,double_fault\n");
    for r in rows {
        let draw = r.draw.map_or_else(String::new, |d| d.to_string());
        match &r.summary {
            Some(s) => out.push_str(&format!(
                "{},{draw},{},{},{:.6},{:.6},{:.6}\n",
                r.ensemble, r.trees, s.pairs, s.diversity, s.disagreement, s.double_fault
            )),
            None => out.push_str(&format!(
                "{},{draw},{},0,n/a,n/a,n/a\n",
                r.ensemble, r.trees
            )),
        }
    }
    out
}
