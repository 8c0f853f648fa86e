//! On-disk model container: a versioned JSON document holding the schema,
//! training parameters and every tree (nodes in preorder plus OOB indices).
//! Pruned ensembles use the same container with a `pruned_from` block.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clubdrf::{Policy, PrunedEnsemble};
use crate::error::{Error, Result};
use crate::forest::RandomForest;

pub const FORMAT_TAG: &str = "clubdrf-forest/1";

/// How the training set was carved out of the source dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSplit {
    pub train_fraction: f64,
    pub split_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedFrom {
    pub parent_seed: u64,
    pub parent_size: usize,
    pub k: usize,
    pub k_effective: usize,
    pub policy: Policy,
    pub prune_seed: u64,
    /// Parent indices of the trees kept, in container order.
    pub representatives: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingSplit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pruned_from: Option<PrunedFrom>,
    pub forest: RandomForest,
}

impl ModelFile {
    pub fn forest(forest: RandomForest, training: Option<TrainingSplit>) -> Self {
        ModelFile {
            format: FORMAT_TAG.to_string(),
            training,
            pruned_from: None,
            forest,
        }
    }

    /// Container for the representatives of `pruned`, drawn from `parent`.
    pub fn pruned(parent: &ModelFile, pruned: &PrunedEnsemble, prune_seed: u64) -> Self {
        ModelFile {
            format: FORMAT_TAG.to_string(),
            training: parent.training,
            pruned_from: Some(PrunedFrom {
                parent_seed: parent.forest.params.seed,
                parent_size: parent.forest.len(),
                k: pruned.k_requested,
                k_effective: pruned.k_effective,
                policy: pruned.policy,
                prune_seed,
                representatives: pruned.representatives.clone(),
            }),
            forest: parent.forest.select(&pruned.representatives),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec(self)?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        #[derive(Deserialize)]
        struct Probe {
            format: Option<String>,
        }
        let probe: Probe = serde_json::from_slice(bytes)
            .map_err(|e| Error::Format(format!("not a model container: {e}")))?;
        match probe.format.as_deref() {
            Some(FORMAT_TAG) => {}
            Some(other) => return Err(Error::Format(format!("unsupported format tag '{other}'"))),
            None => return Err(Error::Format("missing format tag".into())),
        }
        let file: ModelFile =
            serde_json::from_slice(bytes).map_err(|e| Error::Format(e.to_string()))?;
        file.forest.validate()?;
        if let Some(p) = &file.pruned_from {
            if p.representatives.len() != file.forest.len() || p.k_effective != file.forest.len() {
                return Err(Error::Format(
                    "pruned_from does not match the stored trees".into(),
                ));
            }
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)
            .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}
