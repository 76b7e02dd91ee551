use std::path::Path;

use anyhow::{Context, Result};
use medsel::data::TransformReport;
use medsel::{Hyper, ModelVariant};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// Everything needed to re-run a command bit-identically. No timestamps, so
/// repeated runs produce identical files.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub command: &'static str,
    pub version: &'static str,
    pub git_describe: &'static str,
    /// SHA-256 of the resolved configuration as JSON.
    pub config_hash: String,
    pub config: &'a RunConfig,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_variant: Option<ModelVariant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_pinned: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyperparameters: Option<&'a Hyper>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contrast: Option<ContrastRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transforms: Option<&'a TransformReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
}

#[derive(Debug, Serialize)]
pub struct ContrastRecord {
    pub a_prime: f64,
    pub a: f64,
    pub multiplier: f64,
}

pub fn config_hash(cfg: &RunConfig) -> Result<String> {
    let json = serde_json::to_vec(cfg)?;
    Ok(format!("{:x}", Sha256::digest(&json)))
}

impl<'a> Manifest<'a> {
    pub fn new(command: &'static str, config: &'a RunConfig, seeds: Vec<u64>) -> Result<Self> {
        Ok(Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            git_describe: option_env!("MEDSEL_GIT_DESCRIBE").unwrap_or("unknown"),
            config_hash: config_hash(config)?,
            config,
            seeds,
            model_variant: None,
            lambda_pinned: None,
            eta: None,
            hyperparameters: None,
            contrast: None,
            transforms: None,
            converged: None,
        })
    }

    pub fn with_model(mut self, variant: ModelVariant, hp: &'a Hyper) -> Self {
        self.model_variant = Some(variant);
        self.lambda_pinned = Some(variant.pins_lambda());
        self.eta = Some(hp.eta);
        self.hyperparameters = Some(hp);
        self
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("manifest.json"), self)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
