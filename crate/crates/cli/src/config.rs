//! Run configuration: built-in defaults, overlaid by a config file, overlaid
//! by command-line flags. Every leaf remembers which layer set it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ilgamma_core::dataset::SplitSpec;
use ilgamma_core::{GnnConfig, McmConfig, ModelChoice, ModelKind, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSettings {
    pub size: usize,
    /// Members trained concurrently.
    pub parallel: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    pub gnn: GnnConfig,
    pub mcm: McmConfig,
    pub train: TrainConfig,
    pub split: SplitSpec,
    pub ensemble: EnsembleSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelKind::Gnn,
            gnn: GnnConfig::default(),
            mcm: McmConfig::default(),
            train: TrainConfig::default(),
            split: SplitSpec::default(),
            ensemble: EnsembleSettings { size: 40, parallel: 1 },
        }
    }
}

impl RunConfig {
    pub fn model_choice(&self) -> ModelChoice {
        match self.model {
            ModelKind::Gnn => ModelChoice::Gnn(self.gnn.clone()),
            ModelKind::Mcm => ModelChoice::Mcm(self.mcm.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Default,
    File,
    Flag,
}

/// A fully merged configuration, written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub config: RunConfig,
    /// Dotted leaf path → the layer that set it.
    pub provenance: BTreeMap<String, Source>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_file: Option<PathBuf>,
}

fn input(message: String) -> CliError {
    CliError::Input(message)
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

/// Objects are interior nodes; everything else (arrays included) is a leaf.
fn leaves(value: &Value, prefix: &str, out: &mut Vec<String>) {
    match value {
        Value::Object(map) => map.iter().for_each(|(k, v)| leaves(v, &join(prefix, k), out)),
        _ => out.push(prefix.to_string()),
    }
}

fn overlay(
    base: &mut Map<String, Value>,
    layer: &Map<String, Value>,
    prefix: &str,
    provenance: &mut BTreeMap<String, Source>,
    source: Source,
) -> Result<(), CliError> {
    for (key, value) in layer {
        let path = join(prefix, key);
        let slot = base
            .get_mut(key)
            .ok_or_else(|| input(format!("unknown configuration key '{path}'")))?;
        match (slot, value) {
            (Value::Object(inner), Value::Object(sub)) => overlay(inner, sub, &path, provenance, source)?,
            (Value::Object(_), _) => return Err(input(format!("configuration key '{path}' must be a table"))),
            (_, Value::Object(_)) => return Err(input(format!("configuration key '{path}' must not be a table"))),
            (slot, value) => {
                *slot = value.clone();
                provenance.insert(path, source);
            }
        }
    }
    Ok(())
}

/// Reads a TOML or JSON (by extension) configuration document. A document
/// with a top-level `run_config` table, as printed by `inspect-model
/// --json`, contributes that table.
pub fn read_document(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let value: Value = if is_json {
        serde_json::from_str(&text).map_err(|e| input(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| input(format!("{}: {e}", path.display())))?
    };
    let Value::Object(mut map) = value else {
        return Err(input(format!("{}: configuration must be a table", path.display())));
    };
    match map.remove("run_config") {
        Some(Value::Object(inner)) => Ok(inner),
        Some(_) => Err(input(format!("{}: 'run_config' must be a table", path.display()))),
        None => Ok(map),
    }
}

/// Merges defaults, the optional file and the flags (dotted path, value).
pub fn resolve(file: Option<&Path>, flags: &[(&str, Value)]) -> Result<ResolvedConfig, CliError> {
    let Value::Object(mut tree) = serde_json::to_value(RunConfig::default()).expect("defaults serialize") else {
        unreachable!("RunConfig serializes to an object")
    };
    let mut paths = Vec::new();
    leaves(&Value::Object(tree.clone()), "", &mut paths);
    let mut provenance: BTreeMap<String, Source> = paths.into_iter().map(|p| (p, Source::Default)).collect();

    if let Some(path) = file {
        overlay(&mut tree, &read_document(path)?, "", &mut provenance, Source::File)?;
    }
    for (path, value) in flags {
        let mut layer = Map::new();
        let mut keys: Vec<&str> = path.split('.').collect();
        let last = keys.pop().expect("non-empty flag path");
        let mut node = &mut layer;
        for k in keys {
            node = node
                .entry(k)
                .or_insert_with(|| Value::Object(Map::new()))
                .as_object_mut()
                .expect("flag paths are tables");
        }
        node.insert(last.to_string(), value.clone());
        overlay(&mut tree, &layer, "", &mut provenance, Source::Flag)?;
    }

    let config: RunConfig =
        serde_json::from_value(Value::Object(tree)).map_err(|e| input(format!("invalid configuration: {e}")))?;
    config.split.validate().map_err(|e| input(e.to_string()))?;
    config.train.validate().map_err(|e| input(e.to_string()))?;
    if config.ensemble.size == 0 || config.ensemble.parallel == 0 {
        return Err(input("ensemble.size and ensemble.parallel must be at least 1".into()));
    }
    Ok(ResolvedConfig {
        config,
        provenance,
        config_file: file.map(Path::to_path_buf),
    })
}

impl ResolvedConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// Writes the configuration to `path`.
    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_json()).map_err(|e| input(format!("cannot write {}: {e}", path.display())))
    }
}
