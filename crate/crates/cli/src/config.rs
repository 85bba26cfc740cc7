use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::exit::Failure;

pub const SEED_ENV: &str = "FCP_LAB_SEED";

/// Experiment file: global settings plus the command's parameter object.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig<P> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    pub params: P,
}

/// Settings after merging flags, file and environment. This is what gets
/// embedded in every output and hashed.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved<P> {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    pub params: P,
}

impl<P> Resolved<P> {
    pub fn replicas(&self) -> usize {
        self.replicas.unwrap_or(1)
    }
}

impl<P: Serialize> Resolved<P> {
    pub fn canonical_json(&self) -> String {
        // Field order is fixed by the struct definitions, so this is stable.
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

pub fn parse<P: DeserializeOwned>(text: &str, origin: &str) -> Result<ExperimentConfig<P>, Failure> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Failure::usage(format!("{origin}: at `{path}`: {}", e.inner()))
    })
}

pub fn load<P: DeserializeOwned>(path: Option<&Path>) -> Result<ExperimentConfig<P>, Failure> {
    let Some(path) = path else {
        return Err(Failure::usage("--config is required for this command"));
    };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    parse(&text, &path.display().to_string())
}

/// Flag, then config file, then `FCP_LAB_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64, Failure> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Failure::usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

pub fn resolve<P>(
    cfg: ExperimentConfig<P>,
    seed: Option<u64>,
    replicas: Option<usize>,
    default_replicas: usize,
) -> Result<Resolved<P>, Failure> {
    let replicas = replicas.or(cfg.replicas).unwrap_or(default_replicas);
    if replicas == 0 {
        return Err(Failure::usage("replicas must be positive"));
    }
    Ok(Resolved { seed: resolve_seed(seed, cfg.seed)?, replicas: Some(replicas), params: cfg.params })
}
