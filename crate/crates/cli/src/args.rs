use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use clubdrf::clubdrf::{Policy, DEFAULT_K_LIST};
use clubdrf::dataset::ClassColumn;
use clubdrf::{Error, Result};

use crate::experiment::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(
    name = "clubdrf",
    version,
    about = "Clustering-based random forest pruning"
)]
pub struct Cli {
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a forest on the training split of a dataset.
    Train(TrainArgs),
    /// Prune a trained forest to at most k trees.
    Prune(PruneArgs),
    /// Run the repeated-holdout experiment over one or more datasets.
    Experiment(ExperimentArgs),
    /// Time per-instance classification of a forest and a pruned forest.
    Bench(PairArgs<BenchExtra>),
    /// Pairwise diversity of a pruned forest, random subsets and the forest.
    Diversity(PairArgs<DiversityExtra>),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV or ARFF file.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Class column: a name, a 0-based index, or `last`.
    #[arg(long, default_value = "last")]
    pub class_column: String,
}

impl DataArgs {
    pub fn class(&self) -> ClassColumn {
        ClassColumn::parse(&self.class_column)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 500)]
    pub trees: usize,
    /// Candidate features per node (default floor(sqrt(F))).
    #[arg(long)]
    pub subset_size: Option<usize>,
    #[arg(long, default_value_t = 0.66)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    /// Model written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// The dataset the model was trained on.
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = Policy::OobBest)]
    pub policy: Policy,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Pruned model file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Dataset files; repeat the flag or separate with commas.
    #[arg(long, required = true, value_delimiter = ',')]
    pub dataset: Vec<PathBuf>,
    #[arg(long, default_value = "last")]
    pub class_column: String,
    #[arg(long, default_value_t = 500)]
    pub trees: usize,
    #[arg(long)]
    pub subset_size: Option<usize>,
    /// Comma-separated cluster counts.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_K_LIST)]
    pub k_list: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    /// Master seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = Policy::OobBest)]
    pub policy: Policy,
    #[arg(long, default_value_t = 0.66)]
    pub train_fraction: f64,
    /// Bootstrap repetitions for the bias/variance table (0 skips it).
    #[arg(long, default_value_t = 10)]
    pub bias_variance_reps: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

impl ExperimentArgs {
    pub fn config(&self) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig {
            datasets: self.dataset.clone(),
            class_column: ClassColumn::parse(&self.class_column),
            train_fraction: self.train_fraction,
            n_trees: self.trees,
            subset_size: self.subset_size,
            k_list: self.k_list.clone(),
            runs: self.runs,
            seed: self.seed,
            policy: self.policy,
            bias_variance_reps: self.bias_variance_reps,
        };
        cfg.check()?;
        if cfg.subset_size == Some(0) {
            return Err(Error::Config("subset size must be at least 1".into()));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct PairArgs<E: Args> {
    /// Full forest written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Pruned forest written by `prune` (or the full forest again).
    #[arg(long)]
    pub pruned: PathBuf,
    /// The dataset the forest was trained on; its test split is used.
    #[command(flatten)]
    pub data: DataArgs,
    /// CSV file to write instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub extra: E,
}

#[derive(Debug, Args)]
pub struct BenchExtra {
    /// Timed passes over the test split.
    #[arg(long, default_value_t = 20)]
    pub iterations: usize,
}

#[derive(Debug, Args)]
pub struct DiversityExtra {
    /// Seed for the random subsets.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

impl std::ops::Deref for PairArgs<BenchExtra> {
    type Target = BenchExtra;
    fn deref(&self) -> &BenchExtra {
        &self.extra
    }
}

impl std::ops::Deref for PairArgs<DiversityExtra> {
    type Target = DiversityExtra;
    fn deref(&self) -> &DiversityExtra {
        &self.extra
    }
}
