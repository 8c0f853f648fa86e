//! The repeated-holdout experiment: for every dataset and run, a fresh split
//! and forest, evaluation of the full forest and of each pruned size, then
//! aggregation into CSV tables and a JSON summary.

use std::path::{Path, PathBuf};

use clubdrf::analysis::{self, BiasVariance, PairwiseSummary};
use clubdrf::clubdrf::{club_drf, Policy, PruneOptions, DEFAULT_K_LIST};
use clubdrf::dataset::{self, ClassColumn, Dataset, MedianImputer};
use clubdrf::forest::{train_forest, RandomForest};
use clubdrf::rng;
use clubdrf::tree::default_subset_size;
use clubdrf::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::commands::subset_diversity;

const TAG_BIAS_VARIANCE: u64 = 0xB1A5;

pub const SEED_DERIVATION: &str = "run_seed = mix(master_seed, fnv1a64(dataset_name), run)";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub datasets: Vec<PathBuf>,
    #[serde(skip)]
    pub class_column: ClassColumn,
    pub train_fraction: f64,
    pub n_trees: usize,
    /// `None` means `floor(sqrt(F))` per dataset.
    pub subset_size: Option<usize>,
    pub k_list: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    pub policy: Policy,
    /// Bootstrap repetitions for the bias/variance table; 0 skips it.
    pub bias_variance_reps: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            datasets: Vec::new(),
            class_column: ClassColumn::Last,
            train_fraction: 0.66,
            n_trees: 500,
            subset_size: None,
            k_list: DEFAULT_K_LIST.to_vec(),
            runs: 10,
            seed: 1,
            policy: Policy::OobBest,
            bias_variance_reps: 10,
        }
    }
}

impl ExperimentConfig {
    pub fn check(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Config("no datasets given".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.n_trees == 0 {
            return Err(Error::Config("forest needs at least one tree".into()));
        }
        if self.k_list.is_empty() {
            return Err(Error::Config("k list is empty".into()));
        }
        if let Some(&k) = self.k_list.iter().find(|&&k| k == 0 || k > self.n_trees) {
            return Err(Error::Config(format!(
                "k = {k} must lie in 1..={}",
                self.n_trees
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction {} not in (0, 1)",
                self.train_fraction
            )));
        }
        if self.bias_variance_reps == 1 {
            return Err(Error::Config(
                "bias/variance needs 0 or at least 2 repetitions".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub f_measure: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrunedRun {
    pub k: usize,
    pub k_effective: usize,
    /// Exact pruning level in percent, as `numerator/denominator`.
    pub pruning_level: String,
    pub pruning_percent: f64,
    pub metrics: Metrics,
    pub diversity: Option<PairwiseSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub run: usize,
    pub run_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub rf: Metrics,
    pub rf_diversity: Option<PairwiseSummary>,
    pub pruned: Vec<PrunedRun>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Spread {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        // Rounding in the sum can leave the mean an ulp outside [min, max].
        Spread {
            mean,
            min: min.min(mean),
            max: max.max(mean),
            std,
        }
    }
}

/// Aggregate over runs for one method (the full forest or one `k`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: &'static str,
    pub k: usize,
    pub accuracy: Spread,
    pub f_measure: f64,
    pub auc: f64,
    pub mean_k_effective: f64,
    pub mean_pruning_percent: f64,
    pub estimated_speedup: f64,
    pub diversity: Option<PairwiseSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasVarianceRow {
    pub method: &'static str,
    pub k: usize,
    pub result: BiasVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetReport {
    pub name: String,
    pub instances: usize,
    pub features: usize,
    pub classes: usize,
    pub subset_size: usize,
    pub runs: Vec<RunResult>,
    pub summary: Vec<MethodSummary>,
    pub bias_variance: Vec<BiasVarianceRow>,
}

impl DatasetReport {
    pub fn rf(&self) -> &MethodSummary {
        &self.summary[0]
    }

    pub fn club(&self, k: usize) -> Option<&MethodSummary> {
        self.summary[1..].iter().find(|m| m.k == k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub dataset: String,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WinCount {
    pub k: usize,
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub seed_derivation: &'static str,
    pub config: ExperimentConfig,
    pub datasets: Vec<DatasetReport>,
    pub wins: Vec<WinCount>,
    pub failures: Vec<Failure>,
}

pub fn dataset_name(path: &Path) -> String {
    path.file_stem().map_or_else(
        || path.display().to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

pub fn run_seed(master: u64, dataset: &str, run: usize) -> u64 {
    rng::mix(master, &[rng::name_id(dataset), run as u64])
}

/// Splits `d` with `seed` and imputes both sides with training medians.
pub fn split_and_impute(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (mut train, mut test) = dataset::holdout_split(d, train_fraction, seed)?;
    let imputer = MedianImputer::fit(&train);
    imputer.apply(&mut train);
    imputer.apply(&mut test);
    Ok((train, test))
}

fn evaluate(forest: &RandomForest, indices: Option<&[usize]>, test: &Dataset) -> Result<Metrics> {
    let (labels, fractions) = forest.vote_table(indices, test);
    let r = analysis::evaluate_scored(&labels, &test.labels(), &fractions, test.schema())?;
    Ok(Metrics {
        accuracy: r.accuracy,
        f_measure: r.f_measure,
        auc: r.auc,
    })
}

fn run_once(
    d: &Dataset,
    name: &str,
    cfg: &ExperimentConfig,
    s: usize,
    run: usize,
) -> Result<RunResult> {
    let seed = run_seed(cfg.seed, name, run);
    let (train, test) = split_and_impute(d, cfg.train_fraction, seed)?;
    let forest = train_forest(&train, cfg.n_trees, s, seed)?;
    let truth: Vec<u32> = test.labels().iter().map(|&l| l as u32).collect();
    let vectors: Vec<Vec<u32>> = forest
        .label_vectors(&test)
        .into_iter()
        .map(|v| v.labels)
        .collect();
    let all: Vec<usize> = (0..forest.len()).collect();
    let opts = PruneOptions {
        policy: cfg.policy,
        ..PruneOptions::new(seed)
    };
    let pruned = cfg
        .k_list
        .iter()
        .map(|&k| {
            let p = club_drf(&forest, &train, k, &opts)?;
            let level = p.pruning_level;
            Ok(PrunedRun {
                k,
                k_effective: p.k_effective,
                pruning_level: format!("{}/{}", level.numer(), level.denom()),
                pruning_percent: *level.numer() as f64 / *level.denom() as f64,
                metrics: evaluate(&forest, Some(&p.representatives), &test)?,
                diversity: subset_diversity(&vectors, &p.representatives, &truth)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunResult {
        run,
        run_seed: seed,
        n_train: train.n(),
        n_test: test.n(),
        rf: evaluate(&forest, None, &test)?,
        rf_diversity: subset_diversity(&vectors, &all, &truth)?,
        pruned,
    })
}

fn mean_diversity(items: &[Option<PairwiseSummary>]) -> Option<PairwiseSummary> {
    let present: Vec<&PairwiseSummary> = items.iter().flatten().collect();
    if present.is_empty() {
        return None;
    }
    let n = present.len() as f64;
    Some(PairwiseSummary {
        pairs: present.iter().map(|p| p.pairs).sum::<usize>() / present.len(),
        diversity: present.iter().map(|p| p.diversity).sum::<f64>() / n,
        disagreement: present.iter().map(|p| p.disagreement).sum::<f64>() / n,
        double_fault: present.iter().map(|p| p.double_fault).sum::<f64>() / n,
    })
}

fn summarize(cfg: &ExperimentConfig, runs: &[RunResult]) -> Vec<MethodSummary> {
    let n = runs.len() as f64;
    let mean = |f: &dyn Fn(&RunResult) -> f64| runs.iter().map(f).sum::<f64>() / n;
    let mut out = vec![MethodSummary {
        method: "rf",
        k: cfg.n_trees,
        accuracy: Spread::of(&runs.iter().map(|r| r.rf.accuracy).collect::<Vec<_>>()),
        f_measure: mean(&|r| r.rf.f_measure),
        auc: mean(&|r| r.rf.auc),
        mean_k_effective: cfg.n_trees as f64,
        mean_pruning_percent: 0.0,
        estimated_speedup: 1.0,
        diversity: mean_diversity(&runs.iter().map(|r| r.rf_diversity).collect::<Vec<_>>()),
    }];
    for (slot, &k) in cfg.k_list.iter().enumerate() {
        let mean_k_eff = mean(&|r| r.pruned[slot].k_effective as f64);
        out.push(MethodSummary {
            method: "club_drf",
            k,
            accuracy: Spread::of(
                &runs
                    .iter()
                    .map(|r| r.pruned[slot].metrics.accuracy)
                    .collect::<Vec<_>>(),
            ),
            f_measure: mean(&|r| r.pruned[slot].metrics.f_measure),
            auc: mean(&|r| r.pruned[slot].metrics.auc),
            mean_k_effective: mean_k_eff,
            mean_pruning_percent: mean(&|r| r.pruned[slot].pruning_percent),
            estimated_speedup: cfg.n_trees as f64 / mean_k_eff,
            diversity: mean_diversity(
                &runs
                    .iter()
                    .map(|r| r.pruned[slot].diversity)
                    .collect::<Vec<_>>(),
            ),
        });
    }
    out
}

fn bias_variance_rows(
    d: &Dataset,
    name: &str,
    cfg: &ExperimentConfig,
    s: usize,
) -> Result<Vec<BiasVarianceRow>> {
    if cfg.bias_variance_reps == 0 {
        return Ok(Vec::new());
    }
    let seed = rng::mix(cfg.seed, &[rng::name_id(name), TAG_BIAS_VARIANCE]);
    let results = analysis::bias_variance_multi(
        d,
        cfg.bias_variance_reps,
        seed,
        1 + cfg.k_list.len(),
        |train, test, s_rep| {
            let (mut train, mut test) = (train.clone(), test.clone());
            let imputer = MedianImputer::fit(&train);
            imputer.apply(&mut train);
            imputer.apply(&mut test);
            let forest = train_forest(&train, cfg.n_trees, s, s_rep)?;
            let opts = PruneOptions {
                policy: cfg.policy,
                ..PruneOptions::new(s_rep)
            };
            let mut preds = vec![forest.vote_table(None, &test).0];
            for &k in &cfg.k_list {
                let p = club_drf(&forest, &train, k, &opts)?;
                preds.push(forest.vote_table(Some(&p.representatives), &test).0);
            }
            Ok(preds)
        },
    )?;
    let mut rows = Vec::with_capacity(results.len());
    for (i, result) in results.into_iter().enumerate() {
        let (method, k) = if i == 0 {
            ("rf", cfg.n_trees)
        } else {
            ("club_drf", cfg.k_list[i - 1])
        };
        rows.push(BiasVarianceRow { method, k, result });
    }
    Ok(rows)
}

fn run_dataset(path: &Path, cfg: &ExperimentConfig) -> Result<DatasetReport> {
    let name = dataset_name(path);
    let d = dataset::load_path(path, &cfg.class_column)?;
    let s = cfg
        .subset_size
        .unwrap_or_else(|| default_subset_size(d.n_features()));
    if s == 0 || s > d.n_features() {
        return Err(Error::Config(format!(
            "subset size {s} must lie in 1..={}",
            d.n_features()
        )));
    }
    let runs = (0..cfg.runs)
        .into_par_iter()
        .map(|run| run_once(&d, &name, cfg, s, run))
        .collect::<Result<Vec<_>>>()?;
    Ok(DatasetReport {
        summary: summarize(cfg, &runs),
        bias_variance: bias_variance_rows(&d, &name, cfg, s)?,
        name,
        instances: d.n(),
        features: d.n_features(),
        classes: d.schema().n_classes(),
        subset_size: s,
        runs,
    })
}

/// Runs the whole protocol. Dataset-level failures are recorded in the
/// report; only an invalid configuration is returned as an error.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.check()?;
    let mut datasets = Vec::new();
    let mut failures = Vec::new();
    for path in &cfg.datasets {
        match run_dataset(path, cfg) {
            Ok(r) => datasets.push(r),
            Err(e) => {
                log::error!("{}: {e}", path.display());
                failures.push(Failure {
                    dataset: dataset_name(path),
                    error: e.to_string(),
                });
            }
        }
    }
    let wins = cfg
        .k_list
        .iter()
        .map(|&k| {
            let mut w = WinCount {
                k,
                wins: 0,
                ties: 0,
                losses: 0,
            };
            for d in &datasets {
                let (club, rf) = (
                    d.club(k).expect("k in list").accuracy.mean,
                    d.rf().accuracy.mean,
                );
                match club.partial_cmp(&rf) {
                    Some(std::cmp::Ordering::Greater) => w.wins += 1,
                    Some(std::cmp::Ordering::Less) => w.losses += 1,
                    _ => w.ties += 1,
                }
            }
            w
        })
        .collect();
    Ok(ExperimentReport {
        seed_derivation: SEED_DERIVATION,
        config: cfg.clone(),
        datasets,
        wins,
        failures,
    })
}

fn f(v: f64) -> String {
    format!("{v:.6}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), f)
}

fn csv_table(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub const RESULTS_HEADER: [&str; 14] = [
    "dataset",
    "method",
    "k",
    "runs",
    "mean_accuracy",
    "min_accuracy",
    "max_accuracy",
    "std_accuracy",
    "f_measure",
    "auc",
    "mean_k_effective",
    "mean_pruning_level",
    "estimated_speedup",
    "mean_diversity",
];
pub const RUNS_HEADER: [&str; 11] = [
    "dataset",
    "run",
    "run_seed",
    "method",
    "k",
    "k_effective",
    "pruning_level",
    "accuracy",
    "f_measure",
    "auc",
    "diversity",
];
pub const WINS_HEADER: [&str; 6] = [
    "dataset",
    "k",
    "club_drf_mean_accuracy",
    "rf_mean_accuracy",
    "difference",
    "outcome",
];
pub const DIVERSITY_HEADER: [&str; 8] = [
    "dataset",
    "method",
    "k",
    "mean_pairs",
    "diversity",
    "disagreement",
    "double_fault",
    "runs_with_pairs",
];
pub const BIAS_VARIANCE_HEADER: [&str; 6] =
    ["dataset", "method", "k", "repetitions", "bias", "variance"];
pub const FAILURES_HEADER: [&str; 2] = ["dataset", "error"];

impl ExperimentReport {
    /// Every output file as `(file name, contents)`.
    pub fn render(&self) -> Result<Vec<(&'static str, String)>> {
        let mut results = Vec::new();
        let mut runs = Vec::new();
        let mut wins = Vec::new();
        let mut diversity = Vec::new();
        let mut bv = Vec::new();
        for d in &self.datasets {
            for m in &d.summary {
                results.push(vec![
                    d.name.clone(),
                    m.method.to_string(),
                    m.k.to_string(),
                    d.runs.len().to_string(),
                    f(m.accuracy.mean),
                    f(m.accuracy.min),
                    f(m.accuracy.max),
                    f(m.accuracy.std),
                    f(m.f_measure),
                    f(m.auc),
                    format!("{:.2}", m.mean_k_effective),
                    format!("{:.4}", m.mean_pruning_percent),
                    format!("{:.4}", m.estimated_speedup),
                    opt(m.diversity.map(|s| s.diversity)),
                ]);
                let with_pairs = d
                    .runs
                    .iter()
                    .filter(|r| match m.method {
                        "rf" => r.rf_diversity.is_some(),
                        _ => r.pruned.iter().any(|p| p.k == m.k && p.diversity.is_some()),
                    })
                    .count();
                diversity.push(vec![
                    d.name.clone(),
                    m.method.to_string(),
                    m.k.to_string(),
                    m.diversity
                        .map_or_else(|| "n/a".into(), |s| s.pairs.to_string()),
                    opt(m.diversity.map(|s| s.diversity)),
                    opt(m.diversity.map(|s| s.disagreement)),
                    opt(m.diversity.map(|s| s.double_fault)),
                    with_pairs.to_string(),
                ]);
            }
            let rf = d.rf().accuracy.mean;
            for m in &d.summary[1..] {
                let diff = m.accuracy.mean - rf;
                let outcome = match m.accuracy.mean.partial_cmp(&rf) {
                    Some(std::cmp::Ordering::Greater) => "win",
                    Some(std::cmp::Ordering::Less) => "loss",
                    _ => "tie",
                };
                wins.push(vec![
                    d.name.clone(),
                    m.k.to_string(),
                    f(m.accuracy.mean),
                    f(rf),
                    f(diff),
                    outcome.into(),
                ]);
            }
            for r in &d.runs {
                runs.push(vec![
                    d.name.clone(),
                    r.run.to_string(),
                    r.run_seed.to_string(),
                    "rf".into(),
                    self.config.n_trees.to_string(),
                    self.config.n_trees.to_string(),
                    "0".into(),
                    f(r.rf.accuracy),
                    f(r.rf.f_measure),
                    f(r.rf.auc),
                    opt(r.rf_diversity.map(|s| s.diversity)),
                ]);
                for p in &r.pruned {
                    runs.push(vec![
                        d.name.clone(),
                        r.run.to_string(),
                        r.run_seed.to_string(),
                        "club_drf".into(),
                        p.k.to_string(),
                        p.k_effective.to_string(),
                        p.pruning_level.clone(),
                        f(p.metrics.accuracy),
                        f(p.metrics.f_measure),
                        f(p.metrics.auc),
                        opt(p.diversity.map(|s| s.diversity)),
                    ]);
                }
            }
            for row in &d.bias_variance {
                bv.push(vec![
                    d.name.clone(),
                    row.method.to_string(),
                    row.k.to_string(),
                    row.result.repetitions.to_string(),
                    f(row.result.bias),
                    f(row.result.variance),
                ]);
            }
        }
        let failures = self
            .failures
            .iter()
            .map(|x| vec![x.dataset.clone(), x.error.clone()])
            .collect();
        let mut json = serde_json::to_string_pretty(self).map_err(Error::Json)?;
        json.push('\n');
        Ok(vec![
            ("results.csv", csv_table(&RESULTS_HEADER, results)?),
            ("runs.csv", csv_table(&RUNS_HEADER, runs)?),
            ("wins.csv", csv_table(&WINS_HEADER, wins)?),
            ("diversity.csv", csv_table(&DIVERSITY_HEADER, diversity)?),
            ("bias_variance.csv", csv_table(&BIAS_VARIANCE_HEADER, bv)?),
            ("failures.csv", csv_table(&FAILURES_HEADER, failures)?),
            ("report.json", json),
        ])
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, contents) in self.render()? {
            std::fs::write(dir.join(name), contents)?;
        }
        Ok(())
    }
}
