//! What the trainer, ensemble and CLI need from a model, plus the enum that
//! lets them hold either kind.

use rand::RngCore;

use crate::dataset::{DataRecord, GraphCache, TemperatureScale};
use crate::error::ModelError;
use crate::featurize::AttributedGraph;
use crate::gnn::GnnModel;
use crate::mcm::McmModel;
use crate::tensor::{ParamStore, Tape, Var};

/// One (IL, solute, T) input. Graphs are only read by the GNN; the record's
/// string keys only by the MCM.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub record: &'a DataRecord,
    pub cation: &'a AttributedGraph,
    pub anion: &'a AttributedGraph,
    pub solute: &'a AttributedGraph,
    pub t_norm: f64,
}

pub trait Regressor: Send + Sync {
    fn params(&self) -> &ParamStore;

    fn params_mut(&mut self) -> &mut ParamStore;

    /// Records the prediction for every sample as an `n × 1` value.
    fn forward_batch(
        &self,
        tape: &mut Tape,
        batch: &[Sample<'_>],
        training: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Var, ModelError>;

    fn temperature_scale(&self) -> Option<TemperatureScale>;

    fn set_temperature_scale(&mut self, scale: TemperatureScale);

    fn set_dropout(&mut self, rate: f64);

    /// Inference-mode predictions.
    fn predict(&self, batch: &[Sample<'_>]) -> Result<Vec<f64>, ModelError> {
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let mut tape = Tape::new();
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let out = self.forward_batch(&mut tape, batch, false, &mut rng)?;
        Ok(tape.value(out).as_slice().to_vec())
    }
}

/// Records per inference tape; bounds memory on large evaluation sets.
const PREDICT_CHUNK: usize = 512;

/// Inference on records whose SMILES are all in `graphs`, normalizing
/// temperatures with the model's frozen scale.
pub fn predict_records<M: Regressor + ?Sized>(
    model: &M,
    graphs: &GraphCache,
    records: &[&DataRecord],
) -> Result<Vec<f64>, ModelError> {
    let scale = model
        .temperature_scale()
        .ok_or_else(|| ModelError::Config("model has no temperature scale; train it first".into()))?;
    let mut out = Vec::with_capacity(records.len());
    for chunk in records.chunks(PREDICT_CHUNK) {
        let samples: Vec<Sample<'_>> = chunk.iter().map(|r| graphs.sample(r, &scale)).collect();
        out.extend(model.predict(&samples)?);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub enum AnyModel {
    Gnn(GnnModel),
    Mcm(McmModel),
}

impl AnyModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            AnyModel::Gnn(_) => "gnn",
            AnyModel::Mcm(_) => "mcm",
        }
    }

    fn inner(&self) -> &dyn Regressor {
        match self {
            AnyModel::Gnn(m) => m,
            AnyModel::Mcm(m) => m,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Regressor {
        match self {
            AnyModel::Gnn(m) => m,
            AnyModel::Mcm(m) => m,
        }
    }
}

impl Regressor for AnyModel {
    fn params(&self) -> &ParamStore {
        self.inner().params()
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        self.inner_mut().params_mut()
    }

    fn forward_batch(
        &self,
        tape: &mut Tape,
        batch: &[Sample<'_>],
        training: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Var, ModelError> {
        self.inner().forward_batch(tape, batch, training, rng)
    }

    fn temperature_scale(&self) -> Option<TemperatureScale> {
        self.inner().temperature_scale()
    }

    fn set_temperature_scale(&mut self, scale: TemperatureScale) {
        self.inner_mut().set_temperature_scale(scale)
    }

    fn set_dropout(&mut self, rate: f64) {
        self.inner_mut().set_dropout(rate)
    }
}
