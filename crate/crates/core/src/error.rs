use std::path::PathBuf;

use thiserror::Error;

/// A SMILES diagnostic: the input, where in it things went wrong, and why.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at byte {offset} of '{input}'")]
pub struct SmilesError {
    pub input: String,
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("atom {atom} ({element}) has {count} hydrogens; at most 3 can be encoded")]
    TooManyHydrogens {
        atom: usize,
        element: String,
        count: u8,
    },
    #[error("atom {atom} has formal charge {charge}; only -1, 0 and +1 can be encoded")]
    UnsupportedCharge { atom: usize, charge: i8 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShapeError {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    Mismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op}: index {index} out of range for {bound}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss((usize, usize)),
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: {message}")]
    Row {
        path: String,
        line: usize,
        message: String,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("split contract violated: {0}")]
    Split(String),
    #[error("temperature normalization needs T_max > T_min (got {t_min} and {t_max})")]
    DegenerateTemperatureRange { t_min: f64, t_max: f64 },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Smiles(#[from] SmilesError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("{kind} '{key}' is not in the training matrix; not predictable by MCM, use GNN")]
    OutOfMatrix { kind: &'static str, key: String },
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a model artifact (bad magic)")]
    BadMagic,
    #[error("unsupported artifact format version {0}")]
    UnsupportedVersion(u32),
    #[error("artifact is truncated or corrupt: {0}")]
    Corrupt(String),
    #[error("checksum mismatch: artifact is corrupt")]
    Checksum,
    #[error("manifest error: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("parameter '{name}': {message}")]
    Parameter { name: String, message: String },
    #[error("featurizer version mismatch: artifact has '{found}', this build has '{expected}'")]
    FeaturizerVersion { found: String, expected: String },
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyTrain,
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Top-level error for the workflow entry points.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Smiles(#[from] SmilesError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("ensemble member {member}: {source}")]
    Member {
        member: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{0}")]
    Eval(String),
}

impl Error {
    /// True for problems with user-supplied inputs (files, SMILES, flags)
    /// rather than failures inside the computation.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Smiles(_) | Error::Feature(_) | Error::Data(_) | Error::Artifact(_) => true,
            Error::Model(e) => !matches!(e, ModelError::Shape(_)),
            Error::Train(e) => matches!(
                e,
                TrainError::EmptyTrain | TrainError::EmptyValidation | TrainError::Data(_)
            ),
            Error::Member { source, .. } => source.is_input_error(),
            Error::Eval(_) => true,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
