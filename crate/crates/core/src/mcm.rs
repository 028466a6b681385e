//! Matrix-completion baseline: six categorical ids (IL, solute, cation,
//! anion, cation family, solute family) are embedded by their own MLP
//! stacks, concatenated, fused, joined with the normalized temperature and
//! regressed to ln γ∞.
//!
//! The model only knows entities it saw during training; any other key is
//! reported as out of matrix rather than guessed.

use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{DataRecord, TemperatureScale};
use crate::error::{ModelError, ShapeError};
use crate::model::{Regressor, Sample};
use crate::tensor::{Matrix, Mlp, ParamStore, Tape, Var};

/// Names of the six categorical inputs in concatenation order.
pub const INPUT_KINDS: [&str; 6] = ["il", "solute", "cation", "anion", "cation_family", "solute_family"];

/// Sorted string → dense index maps for the six categorical inputs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub il: BTreeMap<String, usize>,
    pub solute: BTreeMap<String, usize>,
    pub cation: BTreeMap<String, usize>,
    pub anion: BTreeMap<String, usize>,
    pub cation_family: BTreeMap<String, usize>,
    pub solute_family: BTreeMap<String, usize>,
}

fn indexed<'a>(keys: impl Iterator<Item = &'a str>) -> BTreeMap<String, usize> {
    let mut map: BTreeMap<String, usize> = keys.map(|k| (k.to_string(), 0)).collect();
    for (i, v) in map.values_mut().enumerate() {
        *v = i;
    }
    map
}

impl Vocabulary {
    /// Builds the maps from training and validation records; indices follow
    /// sorted key order, so the result does not depend on record order.
    pub fn build<'a>(records: impl IntoIterator<Item = &'a DataRecord>) -> Result<Self, ModelError> {
        let records: Vec<&DataRecord> = records.into_iter().collect();
        for r in &records {
            for (name, value) in [
                ("cation_smiles", &r.cation_smiles),
                ("anion_smiles", &r.anion_smiles),
                ("solute_smiles", &r.solute_smiles),
                ("cation_family", &r.cation_family),
                ("solute_family", &r.solute_family),
            ] {
                if value.is_empty() {
                    return Err(ModelError::Config(format!("record is missing {name}")));
                }
            }
        }
        let ils: Vec<String> = records.iter().map(|r| r.il_key()).collect();
        Ok(Vocabulary {
            il: indexed(ils.iter().map(String::as_str)),
            solute: indexed(records.iter().map(|r| r.solute_smiles.as_str())),
            cation: indexed(records.iter().map(|r| r.cation_smiles.as_str())),
            anion: indexed(records.iter().map(|r| r.anion_smiles.as_str())),
            cation_family: indexed(records.iter().map(|r| r.cation_family.as_str())),
            solute_family: indexed(records.iter().map(|r| r.solute_family.as_str())),
        })
    }

    pub fn maps(&self) -> [&BTreeMap<String, usize>; 6] {
        [
            &self.il,
            &self.solute,
            &self.cation,
            &self.anion,
            &self.cation_family,
            &self.solute_family,
        ]
    }

    pub fn sizes(&self) -> [usize; 6] {
        self.maps().map(BTreeMap::len)
    }

    /// The six indices of a record, in concatenation order.
    pub fn lookup(&self, record: &DataRecord) -> Result<[usize; 6], ModelError> {
        let il = record.il_key();
        let keys = [
            il.as_str(),
            record.solute_smiles.as_str(),
            record.cation_smiles.as_str(),
            record.anion_smiles.as_str(),
            record.cation_family.as_str(),
            record.solute_family.as_str(),
        ];
        let maps = self.maps();
        let mut out = [0; 6];
        for k in 0..6 {
            out[k] = *maps[k].get(keys[k]).ok_or_else(|| ModelError::OutOfMatrix {
                kind: INPUT_KINDS[k],
                key: keys[k].to_string(),
            })?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmConfig {
    /// Widths of each per-input embedding stack.
    pub embedding_widths: Vec<usize>,
    pub fusion_widths: Vec<usize>,
    /// Hidden widths of the head; it always ends in one linear output.
    pub head_hidden: Vec<usize>,
    pub slope: f64,
    pub dropout: f64,
}

impl Default for McmConfig {
    fn default() -> Self {
        McmConfig {
            embedding_widths: vec![64, 32],
            fusion_widths: vec![256, 128],
            head_hidden: vec![128],
            slope: 0.01,
            dropout: 0.0,
        }
    }
}

impl McmConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.embedding_widths.is_empty() || self.fusion_widths.is_empty() {
            return Err(ModelError::Config(
                "embedding and fusion stacks need at least one layer".into(),
            ));
        }
        if self.embedding_widths.iter().chain(&self.fusion_widths).chain(&self.head_hidden).any(|&w| w == 0) {
            return Err(ModelError::Config("layer widths must be positive".into()));
        }
        if !(self.slope > 0.0 && self.slope < 1.0) || !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config("slope must lie in (0, 1) and dropout in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct McmModel {
    pub config: McmConfig,
    pub vocabulary: Vocabulary,
    pub store: ParamStore,
    /// One stack per input; the first layer's weight has one row per key.
    pub embeddings: Vec<Mlp>,
    pub fusion: Mlp,
    pub head: Mlp,
    pub scale: Option<TemperatureScale>,
}

impl McmModel {
    pub fn new(config: McmConfig, vocabulary: Vocabulary, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        if vocabulary.sizes().contains(&0) {
            return Err(ModelError::Config("every vocabulary needs at least one entry".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(config, vocabulary, &mut rng)
    }

    fn build<R: Rng>(config: McmConfig, vocabulary: Vocabulary, rng: &mut R) -> Result<Self, ModelError> {
        let mut store = ParamStore::new();
        let (slope, drop) = (config.slope, config.dropout);
        let embeddings: Vec<Mlp> = INPUT_KINDS
            .iter()
            .zip(vocabulary.sizes())
            .map(|(kind, size)| {
                Mlp::new(&mut store, &format!("mcm.{kind}"), size, &config.embedding_widths, slope, drop, true, rng)
            })
            .collect();
        let joined = embeddings.iter().map(Mlp::out_dim).sum();
        let fusion = Mlp::new(&mut store, "mcm.fusion", joined, &config.fusion_widths, slope, drop, true, rng);
        let mut head_widths = config.head_hidden.clone();
        head_widths.push(1);
        let head = Mlp::new(&mut store, "mcm.head", fusion.out_dim() + 1, &head_widths, slope, drop, false, rng);
        Ok(McmModel {
            config,
            vocabulary,
            store,
            embeddings,
            fusion,
            head,
            scale: None,
        })
    }

    pub fn num_parameters(&self) -> usize {
        self.store.num_scalars()
    }

    /// One embedding stack on a batch of ids. The first layer multiplies a
    /// one-hot row by W, which is the same as selecting row `id` of W.
    fn embed(
        &self,
        tape: &mut Tape,
        stack: &Mlp,
        ids: Vec<usize>,
        training: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Var, ShapeError> {
        let n = ids.len();
        let first = &stack.layers[0];
        let w = tape.param(&self.store, first.weight);
        let b = tape.param(&self.store, first.bias.expect("embedding layers carry a bias"));
        let rows = tape.gather_rows(w, ids)?;
        let bias = tape.gather_rows(b, vec![0; n])?;
        let mut x = tape.add(rows, bias)?;
        x = tape.leaky_relu(x, stack.slope);
        x = tape.dropout(x, stack.dropout, training, rng);
        for layer in &stack.layers[1..] {
            x = layer.forward(tape, &self.store, x)?;
            x = tape.leaky_relu(x, stack.slope);
            x = tape.dropout(x, stack.dropout, training, rng);
        }
        Ok(x)
    }

    fn forward_ids(
        &self,
        tape: &mut Tape,
        ids: &[[usize; 6]],
        t_norm: &[f64],
        training: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Var, ShapeError> {
        let mut parts = Vec::with_capacity(6);
        for (k, stack) in self.embeddings.iter().enumerate() {
            parts.push(self.embed(tape, stack, ids.iter().map(|r| r[k]).collect(), training, rng)?);
        }
        let joined = tape.concat_cols(&parts)?;
        let fused = self.fusion.forward(tape, &self.store, joined, training, rng)?;
        let t = tape.input(Matrix::from_vec(t_norm.len(), 1, t_norm.to_vec()));
        let x = tape.concat_cols(&[fused, t])?;
        self.head.forward(tape, &self.store, x, training, rng)
    }

    /// Single-record inference.
    pub fn forward(&self, record: &DataRecord, t_norm: f64) -> Result<f64, ModelError> {
        let ids = self.vocabulary.lookup(record)?;
        let mut tape = Tape::new();
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let out = self.forward_ids(&mut tape, &[ids], &[t_norm], false, &mut rng)?;
        Ok(tape.value(out).item())
    }
}

impl Regressor for McmModel {
    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn forward_batch(
        &self,
        tape: &mut Tape,
        batch: &[Sample<'_>],
        training: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Var, ModelError> {
        let ids = batch
            .iter()
            .map(|s| self.vocabulary.lookup(s.record))
            .collect::<Result<Vec<_>, _>>()?;
        let t: Vec<f64> = batch.iter().map(|s| s.t_norm).collect();
        Ok(self.forward_ids(tape, &ids, &t, training, rng)?)
    }

    fn temperature_scale(&self) -> Option<TemperatureScale> {
        self.scale
    }

    fn set_temperature_scale(&mut self, scale: TemperatureScale) {
        self.scale = Some(scale);
    }

    fn set_dropout(&mut self, rate: f64) {
        self.config.dropout = rate;
        for mlp in self.embeddings.iter_mut().chain([&mut self.fusion, &mut self.head]) {
            mlp.dropout = rate;
        }
    }
}
