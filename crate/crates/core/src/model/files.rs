//! Key-value (TOML) documents for experiment configs and environments.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::types::{Environment, ExperimentConfig, ProcessorKind, ProcessorRef};
use super::validate::{validate_environment, Violation};
use crate::static_energy::TdpTable;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("processor `{0}` has no tdp_watts and is not in the TDP table")]
    MissingTdp(String),
    #[error("invalid environment: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FileError> {
    let text = std::fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| FileError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, FileError> {
    read_toml(path)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, FileError> {
    toml::from_str(text).map_err(|e| FileError::Parse {
        path: "<config>".into(),
        message: e.to_string(),
    })
}

#[derive(Debug, Deserialize)]
struct ProcessorEntry {
    kind: ProcessorKind,
    name: String,
    tdp_watts: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct EnvironmentDoc {
    processors: Vec<ProcessorEntry>,
    #[serde(default)]
    host_label: String,
    co2_efficiency_kg_per_kwh: f64,
}

fn resolve_env(doc: EnvironmentDoc, tdp: &TdpTable) -> Result<Environment, FileError> {
    let mut processors = Vec::with_capacity(doc.processors.len());
    for p in doc.processors {
        let watts = match p.tdp_watts {
            Some(w) => w,
            None => tdp.get(&p.name).ok_or_else(|| FileError::MissingTdp(p.name.clone()))?,
        };
        processors.push(ProcessorRef::new(p.kind, p.name, watts));
    }
    let env = Environment {
        processors,
        host_label: doc.host_label,
        co2_efficiency_kg_per_kwh: doc.co2_efficiency_kg_per_kwh,
    };
    validate_environment(&env).map_err(FileError::Invalid)?;
    Ok(env)
}

/// Loads an environment; processors without `tdp_watts` are looked up in `tdp`.
pub fn load_environment(path: &Path, tdp: &TdpTable) -> Result<Environment, FileError> {
    resolve_env(read_toml(path)?, tdp)
}

pub fn parse_environment(text: &str, tdp: &TdpTable) -> Result<Environment, FileError> {
    let doc = toml::from_str(text).map_err(|e| FileError::Parse {
        path: "<environment>".into(),
        message: e.to_string(),
    })?;
    resolve_env(doc, tdp)
}
