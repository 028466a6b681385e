//! Trained-model files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic            8 bytes  "ILGAMMA\0"
//! format version   u32
//! manifest length  u64
//! manifest         UTF-8 JSON
//! parameter count  u32
//! per parameter:   u32 name length, name bytes, u32 rows, u32 cols,
//!                  rows·cols f64 values (row-major)
//! checksum         32 bytes, SHA-256 of everything before it
//! ```
//!
//! Loading rebuilds the architecture from the manifest and requires every
//! stored parameter to match the expected name and shape, in order.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::TemperatureScale;
use crate::error::ArtifactError;
use crate::featurize::FEATURIZER_VERSION;
use crate::gnn::{GnnConfig, GnnModel};
use crate::mcm::{McmConfig, McmModel, Vocabulary};
use crate::model::{AnyModel, Regressor};
use crate::tensor::Matrix;
use crate::trainer::TrainConfig;

pub const MAGIC: &[u8; 8] = b"ILGAMMA\0";
pub const FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gnn,
    Mcm,
}

/// Architecture description sufficient to rebuild an untrained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Gnn { config: GnnConfig },
    Mcm { config: McmConfig, vocabulary: Vocabulary },
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Gnn { .. } => ModelKind::Gnn,
            ModelSpec::Mcm { .. } => ModelKind::Mcm,
        }
    }

    pub fn of(model: &AnyModel) -> Self {
        match model {
            AnyModel::Gnn(m) => ModelSpec::Gnn {
                config: m.config.clone(),
            },
            AnyModel::Mcm(m) => ModelSpec::Mcm {
                config: m.config.clone(),
                vocabulary: m.vocabulary.clone(),
            },
        }
    }

    /// Fresh model with weights initialized from `seed`.
    pub fn build(&self, seed: u64) -> Result<AnyModel, crate::error::ModelError> {
        Ok(match self {
            ModelSpec::Gnn { config } => AnyModel::Gnn(GnnModel::new(config.clone(), seed)?),
            ModelSpec::Mcm { config, vocabulary } => {
                AnyModel::Mcm(McmModel::new(config.clone(), vocabulary.clone(), seed)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub featurizer_version: String,
    pub model: ModelSpec,
    pub temperature: TemperatureScale,
    pub seed: u64,
    pub parameter_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_config: Option<TrainConfig>,
}

#[derive(Debug, Clone)]
pub struct ModelArtifact {
    pub manifest: Manifest,
    pub model: AnyModel,
}

fn corrupt(m: impl Into<String>) -> ArtifactError {
    ArtifactError::Corrupt(m.into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ArtifactError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| corrupt(format!("unexpected end of data at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, ArtifactError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, ArtifactError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

impl ModelArtifact {
    /// Wraps a trained model; fails if it has no temperature scale.
    pub fn new(model: AnyModel, seed: u64, train_config: Option<TrainConfig>) -> Result<Self, ArtifactError> {
        let temperature = model
            .temperature_scale()
            .ok_or_else(|| ArtifactError::Parameter {
                name: "temperature".into(),
                message: "model has no temperature scale".into(),
            })?;
        let manifest = Manifest {
            featurizer_version: FEATURIZER_VERSION.to_string(),
            model: ModelSpec::of(&model),
            temperature,
            seed,
            parameter_count: model.params().num_scalars(),
            train_config,
        };
        Ok(ModelArtifact { manifest, model })
    }

    pub fn kind(&self) -> ModelKind {
        self.manifest.model.kind()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let manifest = serde_json::to_vec(&self.manifest).expect("manifest serializes");
        let store = self.model.params();
        let mut out = Vec::with_capacity(64 + manifest.len() + 8 * store.num_scalars());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
        out.extend_from_slice(&manifest);
        out.extend_from_slice(&(store.len() as u32).to_le_bytes());
        for (name, value) in store.iter() {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(value.rows() as u32).to_le_bytes());
            out.extend_from_slice(&(value.cols() as u32).to_le_bytes());
            for v in value.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ArtifactError> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(ArtifactError::BadMagic);
        }
        if bytes.len() < MAGIC.len() + 12 + CHECKSUM_LEN {
            return Err(ArtifactError::Checksum);
        }
        let (body, stored) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        if Sha256::digest(body).as_slice() != stored {
            return Err(ArtifactError::Checksum);
        }
        let mut r = Reader {
            bytes: body,
            pos: MAGIC.len(),
        };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(ArtifactError::UnsupportedVersion(version));
        }
        let len = usize::try_from(r.u64()?).map_err(|_| corrupt("manifest length overflows"))?;
        let manifest: Manifest = serde_json::from_slice(r.take(len)?)?;
        if manifest.featurizer_version != FEATURIZER_VERSION {
            return Err(ArtifactError::FeaturizerVersion {
                found: manifest.featurizer_version,
                expected: FEATURIZER_VERSION.to_string(),
            });
        }
        let mut model = manifest.model.build(manifest.seed).map_err(|e| ArtifactError::Parameter {
            name: "model".into(),
            message: e.to_string(),
        })?;
        let count = r.u32()? as usize;
        let store = model.params_mut();
        if count != store.len() {
            return Err(ArtifactError::Parameter {
                name: "*".into(),
                message: format!("artifact holds {count} parameters, architecture expects {}", store.len()),
            });
        }
        for id in store.ids().collect::<Vec<_>>() {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?).map_err(|_| corrupt("parameter name is not UTF-8"))?;
            let expected = store.name(id).to_string();
            if name != expected {
                return Err(ArtifactError::Parameter {
                    name: name.to_string(),
                    message: format!("expected parameter '{expected}' at this position"),
                });
            }
            let (rows, cols) = (r.u32()? as usize, r.u32()? as usize);
            if (rows, cols) != store.value(id).shape() {
                return Err(ArtifactError::Parameter {
                    name: expected,
                    message: format!("shape {rows}x{cols}, expected {:?}", store.value(id).shape()),
                });
            }
            let raw = r.take(rows * cols * 8)?;
            let values = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            *store.value_mut(id) = Matrix::from_vec(rows, cols, values);
        }
        if r.pos != body.len() {
            return Err(corrupt("trailing bytes after the last parameter"));
        }
        model.set_temperature_scale(manifest.temperature);
        Ok(ModelArtifact { manifest, model })
    }

    pub fn save(&self, path: &Path) -> Result<(), ArtifactError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| ArtifactError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ArtifactError> {
        let bytes = std::fs::read(path).map_err(|source| ArtifactError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_gnn() -> AnyModel {
        let cfg = GnnConfig {
            hidden_dim: 8,
            gine_hidden: vec![8],
            channel_mlp_widths: vec![16, 8],
            interaction_widths: vec![8],
            head_widths: vec![9, 4, 1],
            ..GnnConfig::default()
        };
        let mut m = GnnModel::new(cfg, 3).unwrap();
        m.set_temperature_scale(TemperatureScale::new(290.0, 370.0).unwrap());
        // move away from the seed-determined initialization
        let id = m.store.ids().next().unwrap();
        m.store.value_mut(id).set(0, 0, 42.5);
        AnyModel::Gnn(m)
    }

    #[test]
    fn round_trip_preserves_every_parameter() {
        let art = ModelArtifact::new(small_gnn(), 3, Some(TrainConfig::default())).unwrap();
        let bytes = art.to_bytes();
        let back = ModelArtifact::from_bytes(&bytes).unwrap();
        assert_eq!(back.manifest, art.manifest);
        assert_eq!(back.model.params(), art.model.params());
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn damage_is_detected() {
        let bytes = ModelArtifact::new(small_gnn(), 3, None).unwrap().to_bytes();
        assert!(matches!(
            ModelArtifact::from_bytes(&bytes[..bytes.len() - 100]),
            Err(ArtifactError::Checksum)
        ));
        let mut flipped = bytes.clone();
        flipped[40] ^= 1;
        assert!(matches!(ModelArtifact::from_bytes(&flipped), Err(ArtifactError::Checksum)));
        assert!(matches!(ModelArtifact::from_bytes(b"not a model"), Err(ArtifactError::BadMagic)));
    }

    #[test]
    fn mismatched_architecture_is_rejected() {
        let art = ModelArtifact::new(small_gnn(), 3, None).unwrap();
        let mut manifest = art.manifest.clone();
        if let ModelSpec::Gnn { config } = &mut manifest.model {
            config.hidden_dim = 16;
            config.gine_hidden = vec![16];
        }
        let forged = ModelArtifact {
            manifest,
            model: art.model.clone(),
        };
        let err = ModelArtifact::from_bytes(&forged.to_bytes()).unwrap_err();
        assert!(matches!(err, ArtifactError::Parameter { .. }), "{err}");
    }
}
