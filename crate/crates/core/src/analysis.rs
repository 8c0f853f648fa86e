//! Pairwise diversity measures, evaluation metrics and a 0/1-loss
//! bias/variance decomposition.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clubdrf::{self, Policy, PruneOptions};
use crate::dataset::{self, BootstrapSample, Dataset, MedianImputer, Schema};
use crate::error::{Error, Result};
use crate::forest;
use crate::rng;
use crate::tree::{argmax_first, default_subset_size};

/// Fraction of positions at which two prediction vectors differ.
pub fn diversity<T: PartialEq>(c1: &[T], c2: &[T]) -> Result<f64> {
    if c1.len() != c2.len() {
        return Err(Error::Usage(format!(
            "length mismatch: {} vs {}",
            c1.len(),
            c2.len()
        )));
    }
    if c1.is_empty() {
        return Err(Error::Usage("diversity of empty vectors".into()));
    }
    let diff = c1.iter().zip(c2).filter(|(a, b)| a != b).count();
    Ok(diff as f64 / c1.len() as f64)
}

/// Joint correctness counts of two classifiers: `n10` counts instances the
/// first gets right and the second gets wrong, and so on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseCounts {
    pub n11: u64,
    pub n10: u64,
    pub n01: u64,
    pub n00: u64,
}

impl PairwiseCounts {
    pub fn total(&self) -> u64 {
        self.n11 + self.n10 + self.n01 + self.n00
    }
}

pub fn pairwise_counts<T: PartialEq>(c1: &[T], c2: &[T], truth: &[T]) -> Result<PairwiseCounts> {
    if c1.len() != c2.len() || c1.len() != truth.len() {
        return Err(Error::Usage(format!(
            "length mismatch: {}, {}, {}",
            c1.len(),
            c2.len(),
            truth.len()
        )));
    }
    let mut c = PairwiseCounts::default();
    for ((a, b), t) in c1.iter().zip(c2).zip(truth) {
        match (a == t, b == t) {
            (true, true) => c.n11 += 1,
            (true, false) => c.n10 += 1,
            (false, true) => c.n01 += 1,
            (false, false) => c.n00 += 1,
        }
    }
    Ok(c)
}

pub fn disagreement(counts: &PairwiseCounts) -> Result<f64> {
    ratio(counts.n10 + counts.n01, counts.total())
}

pub fn double_fault(counts: &PairwiseCounts) -> Result<f64> {
    ratio(counts.n00, counts.total())
}

fn ratio(num: u64, total: u64) -> Result<f64> {
    if total == 0 {
        return Err(Error::Usage("pairwise counts are empty".into()));
    }
    Ok(num as f64 / total as f64)
}

/// Means over all unordered pairs of an ensemble's members.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseSummary {
    pub pairs: usize,
    pub diversity: f64,
    pub disagreement: f64,
    pub double_fault: f64,
}

/// `None` when the ensemble has fewer than two members.
pub fn mean_pairwise(predictions: &[&[u32]], truth: &[u32]) -> Result<Option<PairwiseSummary>> {
    let n = predictions.len();
    if n < 2 {
        return Ok(None);
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let per_pair = pairs
        .par_iter()
        .map(|&(i, j)| {
            let c = pairwise_counts(predictions[i], predictions[j], truth)?;
            Ok((
                diversity(predictions[i], predictions[j])?,
                disagreement(&c)?,
                double_fault(&c)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let m = per_pair.len() as f64;
    let (d, a, f) = per_pair.iter().fold((0.0, 0.0, 0.0), |acc, x| {
        (acc.0 + x.0, acc.1 + x.1, acc.2 + x.2)
    });
    Ok(Some(PairwiseSummary {
        pairs: per_pair.len(),
        diversity: d / m,
        disagreement: a / m,
        double_fault: f / m,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AucSource {
    /// Per-class vote fractions.
    VoteFraction,
    /// Hard labels only: a two-point ROC per class.
    HardLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Absent when the class has no positives or no negatives.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Support-weighted mean of per-class F1.
    pub f_measure: f64,
    /// Support-weighted mean of one-vs-rest AUC over classes where it is
    /// defined; 0.5 if it is defined for none.
    pub auc: f64,
    pub auc_source: AucSource,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<u64>>,
}

/// Metrics from hard labels only.
pub fn evaluate(predictions: &[usize], truth: &[usize], schema: &Schema) -> Result<EvalReport> {
    evaluate_inner(predictions, truth, None, schema)
}

/// Metrics with AUC computed from per-class scores (vote fractions).
pub fn evaluate_scored(
    predictions: &[usize],
    truth: &[usize],
    scores: &[Vec<f64>],
    schema: &Schema,
) -> Result<EvalReport> {
    if scores.len() != truth.len() || scores.iter().any(|s| s.len() != schema.n_classes()) {
        return Err(Error::Usage(
            "score table does not match predictions".into(),
        ));
    }
    evaluate_inner(predictions, truth, Some(scores), schema)
}

fn evaluate_inner(
    predictions: &[usize],
    truth: &[usize],
    scores: Option<&[Vec<f64>]>,
    schema: &Schema,
) -> Result<EvalReport> {
    if predictions.len() != truth.len() {
        return Err(Error::Usage(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Usage("nothing to evaluate".into()));
    }
    let k = schema.n_classes();
    if predictions.iter().chain(truth).any(|&l| l >= k) {
        return Err(Error::Usage("label outside the schema's classes".into()));
    }
    let n = truth.len();
    let mut confusion = vec![vec![0u64; k]; k];
    for (&p, &t) in predictions.iter().zip(truth) {
        confusion[t][p] += 1;
    }
    let correct: u64 = (0..k).map(|c| confusion[c][c]).sum();

    let mut per_class = Vec::with_capacity(k);
    for c in 0..k {
        let tp = confusion[c][c];
        let support: u64 = confusion[c].iter().sum();
        let predicted: u64 = (0..k).map(|t| confusion[t][c]).sum();
        let precision = if predicted == 0 {
            0.0
        } else {
            tp as f64 / predicted as f64
        };
        let recall = if support == 0 {
            0.0
        } else {
            tp as f64 / support as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let class_scores: Vec<f64> = match scores {
            Some(s) => s.iter().map(|row| row[c]).collect(),
            None => predictions
                .iter()
                .map(|&p| if p == c { 1.0 } else { 0.0 })
                .collect(),
        };
        let positives: Vec<bool> = truth.iter().map(|&t| t == c).collect();
        per_class.push(ClassMetrics {
            label: schema.class_labels[c].clone(),
            support,
            precision,
            recall,
            f1,
            auc: binary_auc(&class_scores, &positives),
        });
    }
    let f_measure = per_class
        .iter()
        .map(|m| m.f1 * m.support as f64)
        .sum::<f64>()
        / n as f64;
    let (auc_sum, auc_weight) = per_class
        .iter()
        .filter_map(|m| m.auc.map(|a| (a * m.support as f64, m.support as f64)))
        .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    Ok(EvalReport {
        accuracy: correct as f64 / n as f64,
        f_measure,
        auc: if auc_weight > 0.0 {
            auc_sum / auc_weight
        } else {
            0.5
        },
        auc_source: if scores.is_some() {
            AucSource::VoteFraction
        } else {
            AucSource::HardLabel
        },
        per_class,
        confusion,
    })
}

/// Area under the ROC curve via the rank-sum statistic, counting tied
/// scores as half. `None` without both positives and negatives.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their average.
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&o| positive[o]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasVariance {
    pub bias: f64,
    pub variance: f64,
    pub repetitions: usize,
}

/// 0/1-loss decomposition of a repetitions × instances prediction table.
/// The main prediction of an instance is its modal label (ties go to the
/// lower class index); bias is the fraction of instances whose main
/// prediction is wrong, variance the mean fraction of repetitions that
/// disagree with the main prediction.
pub fn bias_variance_from_table(
    table: &[Vec<usize>],
    truth: &[usize],
    n_classes: usize,
) -> Result<BiasVariance> {
    if table.len() < 2 {
        return Err(Error::Config(format!(
            "need at least 2 repetitions, got {}",
            table.len()
        )));
    }
    if truth.is_empty() || table.iter().any(|row| row.len() != truth.len()) {
        return Err(Error::Usage(
            "prediction table does not match the truth vector".into(),
        ));
    }
    let reps = table.len();
    let mut counts = vec![0u32; n_classes];
    let (mut bias, mut variance) = (0.0, 0.0);
    for (i, &t) in truth.iter().enumerate() {
        counts.fill(0);
        for row in table {
            let l = row[i];
            if l >= n_classes {
                return Err(Error::Usage(format!(
                    "label {l} outside {n_classes} classes"
                )));
            }
            counts[l] += 1;
        }
        let main = argmax_first(&counts);
        if main != t {
            bias += 1.0;
        }
        variance += (reps - counts[main] as usize) as f64 / reps as f64;
    }
    let n = truth.len() as f64;
    Ok(BiasVariance {
        bias: bias / n,
        variance: variance / n,
        repetitions: reps,
    })
}

/// A learner that can be retrained on resampled data.
pub trait Learner: Sync {
    fn fit_predict(&self, train: &Dataset, test: &Dataset, seed: u64) -> Result<Vec<usize>>;
}

/// A full random forest.
#[derive(Debug, Clone, Copy)]
pub struct ForestLearner {
    pub n_trees: usize,
    /// Defaults to `floor(sqrt(F))`.
    pub s: Option<usize>,
}

/// A forest pruned to `k` clusters.
#[derive(Debug, Clone, Copy)]
pub struct ClubDrfLearner {
    pub n_trees: usize,
    pub s: Option<usize>,
    pub k: usize,
    pub policy: Policy,
}

fn fit_forest(
    train: &Dataset,
    test: &Dataset,
    n_trees: usize,
    s: Option<usize>,
    seed: u64,
) -> Result<(Dataset, Dataset, forest::RandomForest)> {
    let (mut train, mut test) = (train.clone(), test.clone());
    let imputer = MedianImputer::fit(&train);
    imputer.apply(&mut train);
    imputer.apply(&mut test);
    let s = s.unwrap_or_else(|| default_subset_size(train.n_features()));
    let f = forest::train_forest(&train, n_trees, s, seed)?;
    Ok((train, test, f))
}

impl Learner for ForestLearner {
    fn fit_predict(&self, train: &Dataset, test: &Dataset, seed: u64) -> Result<Vec<usize>> {
        let (_, test, f) = fit_forest(train, test, self.n_trees, self.s, seed)?;
        Ok(f.vote_table(None, &test).0)
    }
}

impl Learner for ClubDrfLearner {
    fn fit_predict(&self, train: &Dataset, test: &Dataset, seed: u64) -> Result<Vec<usize>> {
        let (train, test, f) = fit_forest(train, test, self.n_trees, self.s, seed)?;
        let opts = PruneOptions {
            policy: self.policy,
            ..PruneOptions::new(seed)
        };
        let p = clubdrf::club_drf(&f, &train, self.k, &opts)?;
        Ok(f.vote_table(Some(&p.representatives), &test).0)
    }
}

/// Holds out a fixed test split (34% of `d`), then for each repetition
/// trains `learner` on a fresh bootstrap resample of the remaining pool and
/// decomposes the test-set predictions.
pub fn bias_variance(
    learner: &dyn Learner,
    d: &Dataset,
    repetitions: usize,
    seed: u64,
) -> Result<BiasVariance> {
    let mut out = bias_variance_multi(d, repetitions, seed, 1, |train, test, s| {
        Ok(vec![learner.fit_predict(train, test, s)?])
    })?;
    Ok(out.remove(0))
}

/// As [`bias_variance`] for `outputs` learners sharing each resample: `fit`
/// returns one prediction vector per learner.
pub fn bias_variance_multi<F>(
    d: &Dataset,
    repetitions: usize,
    seed: u64,
    outputs: usize,
    fit: F,
) -> Result<Vec<BiasVariance>>
where
    F: Fn(&Dataset, &Dataset, u64) -> Result<Vec<Vec<usize>>> + Sync,
{
    if repetitions < 2 {
        return Err(Error::Config(format!(
            "need at least 2 repetitions, got {repetitions}"
        )));
    }
    let (pool, test) = dataset::holdout_split(d, 0.66, seed)?;
    let per_rep = (0..repetitions)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, &[rng::TAG_SPLIT, 2, r as u64]);
            let sample = BootstrapSample::draw(pool.n(), &mut rng);
            let resample = pool.subset(&sample.in_bag);
            let preds = fit(&resample, &test, rng::mix(seed, &[r as u64]))?;
            if preds.len() != outputs {
                return Err(Error::Usage(format!(
                    "expected {outputs} prediction vectors, got {}",
                    preds.len()
                )));
            }
            Ok(preds)
        })
        .collect::<Result<Vec<_>>>()?;
    let truth = test.labels();
    (0..outputs)
        .map(|o| {
            let table: Vec<Vec<usize>> = per_rep.iter().map(|p| p[o].clone()).collect();
            bias_variance_from_table(&table, &truth, d.schema().n_classes())
        })
        .collect()
}
