//! Clustering-based extreme pruning of random forests.
//!
//! A large bagged forest is grown, every tree's predictions over the
//! training set are clustered with K-modes, and the tree with the best
//! out-of-bag accuracy in each cluster is kept. The pruned ensemble votes
//! exactly like the parent forest, with a fraction of the trees.
//!
//! ```no_run
//! use clubdrf::{clubdrf::{club_drf, PruneOptions}, dataset, forest};
//!
//! let data = dataset::load_path("data/diabetes.csv".as_ref(), &Default::default())?;
//! let (train, test) = dataset::holdout_split(&data, 0.66, 1)?;
//! let rf = forest::train_forest(&train, 500, 2, 1)?;
//! let pruned = club_drf(&rf, &train, 10, &PruneOptions::new(1))?;
//! let small = rf.select(&pruned.representatives);
//! println!("{} trees, {}% pruned", small.len(), pruned.pruning_percent());
//! # let _ = test;
//! # Ok::<(), clubdrf::Error>(())
//! ```

pub mod analysis;
pub mod clubdrf;
pub mod container;
pub mod dataset;
mod error;
pub mod forest;
pub mod kmodes;
pub mod rng;
pub mod tree;

pub use error::{Error, Result};
