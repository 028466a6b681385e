//! Ensembles: members trained on independently re-drawn train/validation
//! splits of the same non-test records; predictions are averaged in ln γ∞.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::{ModelArtifact, ModelKind};
use crate::dataset::{resplit_train_val, DataRecord, Dataset, GraphCache, SplitMode, SplitSpec, Splits};
use crate::error::{ArtifactError, DataError, Error};
use crate::gnn::{GnnConfig, GnnModel};
use crate::mcm::{McmConfig, McmModel, Vocabulary};
use crate::model::{predict_records, AnyModel};
use crate::tensor::exact_sum;
use crate::trainer::{train, TrainConfig, TrainHistory};

/// Which architecture to train, with its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "config", rename_all = "lowercase")]
pub enum ModelChoice {
    Gnn(GnnConfig),
    Mcm(McmConfig),
}

impl Default for ModelChoice {
    fn default() -> Self {
        ModelChoice::Gnn(GnnConfig::default())
    }
}

/// Builds and trains one model on the given split. The MCM vocabulary comes
/// from the training and validation records.
pub fn train_model(
    data: &Dataset,
    train_idx: &[usize],
    val_idx: &[usize],
    choice: &ModelChoice,
    config: &TrainConfig,
) -> Result<(ModelArtifact, TrainHistory), Error> {
    let mut model = match choice {
        ModelChoice::Gnn(c) => AnyModel::Gnn(GnnModel::new(c.clone(), config.seed)?),
        ModelChoice::Mcm(c) => {
            let known = train_idx.iter().chain(val_idx).map(|&i| &data.records[i]);
            AnyModel::Mcm(McmModel::new(c.clone(), Vocabulary::build(known)?, config.seed)?)
        }
    };
    let history = train(&mut model, data, train_idx, val_idx, config)?;
    let artifact = ModelArtifact::new(model, config.seed, Some(config.clone()))?;
    Ok((artifact, history))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub size: usize,
    pub base_seed: u64,
    pub model: ModelChoice,
    pub train: TrainConfig,
    pub split: SplitSpec,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            size: 40,
            base_seed: 0,
            model: ModelChoice::default(),
            train: TrainConfig::default(),
            split: SplitSpec::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub members: Vec<ModelArtifact>,
    pub seeds: Vec<u64>,
    pub split_mode: SplitMode,
    /// Records excluded from every member's training.
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePrediction {
    pub mean: f64,
    /// Population standard deviation across members.
    pub std: f64,
    pub members: Vec<f64>,
}

impl EnsemblePrediction {
    pub fn from_members(members: Vec<f64>) -> Self {
        let n = members.len() as f64;
        let mean = exact_sum(members.iter().copied()) / n;
        let var = exact_sum(members.iter().map(|v| (v - mean) * (v - mean))) / n;
        EnsemblePrediction {
            mean,
            std: var.sqrt(),
            members,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberEntry {
    pub file: String,
    pub seed: u64,
}

/// `ensemble.json`: member files relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub kind: ModelKind,
    pub split_mode: SplitMode,
    pub members: Vec<MemberEntry>,
    pub test: Vec<usize>,
}

/// Trains `config.size` members, member `i` with seed `base_seed + i` on its
/// own train/validation re-split of `base`'s non-test records. Up to
/// `parallel` members train concurrently.
pub fn train_ensemble(
    data: &Dataset,
    base: &Splits,
    config: &EnsembleConfig,
    parallel: usize,
) -> Result<(Ensemble, Vec<TrainHistory>), Error> {
    if config.size == 0 {
        return Err(Error::Data(DataError::Invalid("ensemble size must be at least 1".into())));
    }
    let run = |i: usize| -> Result<(ModelArtifact, TrainHistory), Error> {
        let seed = config.base_seed + i as u64;
        let wrap = |e: Error| Error::Member {
            member: i,
            source: Box::new(e),
        };
        let splits = resplit_train_val(&data.records, base, &config.split, seed).map_err(|e| wrap(e.into()))?;
        let train_cfg = TrainConfig {
            seed,
            ..config.train.clone()
        };
        log::info!("member {i}: {} train / {} val records", splits.train.len(), splits.val.len());
        train_model(data, &splits.train, &splits.val, &config.model, &train_cfg).map_err(wrap)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| Error::Eval(format!("cannot start worker threads: {e}")))?;
    let results: Vec<_> = pool.install(|| (0..config.size).into_par_iter().map(run).collect());
    let mut members = Vec::with_capacity(config.size);
    let mut histories = Vec::with_capacity(config.size);
    for r in results {
        let (a, h) = r?;
        members.push(a);
        histories.push(h);
    }
    Ok((
        Ensemble {
            members,
            seeds: (0..config.size as u64).map(|i| config.base_seed + i).collect(),
            split_mode: base.mode,
            test: base.test.clone(),
        },
        histories,
    ))
}

impl Ensemble {
    /// Wraps a single model as a one-member ensemble.
    pub fn single(artifact: ModelArtifact) -> Self {
        let seed = artifact.manifest.seed;
        Ensemble {
            members: vec![artifact],
            seeds: vec![seed],
            split_mode: SplitMode::Prediction,
            test: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Mean and spread of member predictions per record. A failing member
    /// fails the whole call and is named in the error.
    pub fn predict(&self, graphs: &GraphCache, records: &[&DataRecord]) -> Result<Vec<EnsemblePrediction>, Error> {
        let per_member = self
            .members
            .iter()
            .enumerate()
            .map(|(i, m)| {
                predict_records(&m.model, graphs, records).map_err(|e| Error::Member {
                    member: i,
                    source: Box::new(e.into()),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok((0..records.len())
            .map(|r| EnsemblePrediction::from_members(per_member.iter().map(|p| p[r]).collect()))
            .collect())
    }

    /// Writes `member_NNN.bin` files and `ensemble.json` into `dir`; returns
    /// the manifest path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf, Error> {
        let io = |path: &Path, source| {
            Error::Artifact(ArtifactError::Io {
                path: path.to_path_buf(),
                source,
            })
        };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let mut entries = Vec::with_capacity(self.members.len());
        for (i, (m, seed)) in self.members.iter().zip(&self.seeds).enumerate() {
            let file = format!("member_{i:03}.bin");
            m.save(&dir.join(&file))?;
            entries.push(MemberEntry { file, seed: *seed });
        }
        let manifest = EnsembleManifest {
            kind: self.members.first().map_or(ModelKind::Gnn, ModelArtifact::kind),
            split_mode: self.split_mode,
            members: entries,
            test: self.test.clone(),
        };
        let path = dir.join("ensemble.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(DataError::from)?;
        std::fs::write(&path, text + "\n").map_err(|e| io(&path, e))?;
        Ok(path)
    }

    pub fn load(manifest_path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(manifest_path).map_err(|source| {
            Error::Artifact(ArtifactError::Io {
                path: manifest_path.to_path_buf(),
                source,
            })
        })?;
        let manifest: EnsembleManifest = serde_json::from_str(&text).map_err(DataError::from)?;
        let dir = manifest_path.parent().unwrap_or(Path::new("."));
        let members = manifest
            .members
            .iter()
            .enumerate()
            .map(|(i, e)| {
                ModelArtifact::load(&dir.join(&e.file)).map_err(|err| Error::Member {
                    member: i,
                    source: Box::new(err.into()),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Ensemble {
            members,
            seeds: manifest.members.iter().map(|e| e.seed).collect(),
            split_mode: manifest.split_mode,
            test: manifest.test,
        })
    }
}
