//! Learning infinite-dilution activity coefficients (ln γ∞) of solutes in
//! ionic liquids from molecular graphs.
//!
//! The crate covers the whole path from SMILES to a trained predictor:
//!
//! - [`smiles`] and [`featurize`] turn SMILES into attributed graphs
//!   (22 node features, 6 edge features).
//! - [`tensor`] is a small reverse-mode autodiff engine with Adam.
//! - [`gnn`] is the dual-channel GINE+GRU network; [`mcm`] the
//!   matrix-completion baseline over categorical ids.
//! - [`dataset`], [`trainer`], [`ensemble`] and [`evaluate`] handle data
//!   splits, training schedules, model averaging and metrics.
//! - [`artifact`] reads and writes trained models.

pub mod artifact;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod evaluate;
pub mod featurize;
pub mod gnn;
pub mod mcm;
pub mod model;
pub mod smiles;
pub mod tensor;
pub mod trainer;

pub use artifact::{ModelArtifact, ModelKind};
pub use dataset::{DataRecord, Dataset, SplitMode, SplitSpec, Splits, TemperatureScale};
pub use ensemble::{Ensemble, EnsembleConfig, EnsemblePrediction, ModelChoice};
pub use error::{Error, Result};
pub use evaluate::MetricReport;
pub use featurize::{AttributedGraph, FEATURIZER_VERSION};
pub use gnn::{GnnConfig, GnnModel};
pub use mcm::{McmConfig, McmModel, Vocabulary};
pub use model::{AnyModel, Regressor, Sample};
pub use smiles::MolecularStructure;
pub use tensor::{Matrix, ParamStore, Tape};
pub use trainer::{TrainConfig, TrainHistory};
