//! Service configuration: one TOML file plus `key.path=value` overrides.

use std::path::{Path, PathBuf};

use rallyanchor_core::hints::HintParams;
use rallyanchor_core::metrics::DEFAULT_TOLERANCE;
use rallyanchor_core::store::Vocabulary;
use rallyanchor_core::synth::SynthConfig;
use rallyanchor_core::PipelineConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("override `{0}` is not of the form key.path=value")]
    BadOverride(String),
    #[error("override `{0}` crosses a non-table value")]
    NotATable(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// One directory per match below this.
    pub data_dir: PathBuf,
    pub listen: String,
    /// Recorded on annotations made through the API when the request names nobody.
    pub author: String,
    /// Frames within which a detected event counts as a match in `eval`.
    pub tolerance: u32,
    pub pipeline: PipelineConfig,
    pub hints: HintParams,
    pub synth: SynthConfig,
    /// Replaces the built-in vocabulary when present.
    pub vocabulary: Vocabulary,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            listen: "127.0.0.1:8080".into(),
            author: "annotator".into(),
            tolerance: DEFAULT_TOLERANCE,
            pipeline: PipelineConfig::default(),
            hints: HintParams::default(),
            synth: SynthConfig::default(),
            vocabulary: Vocabulary::default(),
        }
    }
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a plain string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set(table: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::BadOverride(assignment.to_string()))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::BadOverride(assignment.to_string()));
    }
    let (last, path) = parts.split_last().unwrap();
    let mut cur = table;
    for p in path {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| ConfigError::NotATable(assignment.to_string()))?;
    }
    cur.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

impl Config {
    /// Reads `path` (or starts from defaults) and applies each override in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.to_path_buf(), source })?;
                text.parse::<toml::Table>()?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            set(&mut table, o)?;
        }
        Ok(table.try_into()?)
    }
}
