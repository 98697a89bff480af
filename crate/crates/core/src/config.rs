//! Run configuration: one TOML file that fixes every input of a pipeline run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::SyntheticSpec;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, TrainConfig};
use crate::ssm::SimilarityConfig;

const SHIPPED: &str = include_str!("../data/run.toml");

/// Merged view of corpus, dictionary, model, training and similarity
/// settings. The training seed is the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    /// Knowledge dictionary; the shipped one when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dictionary: Option<PathBuf>,
    /// Training manifest; the synthetic corpus is generated when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_manifest: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_manifest: Option<PathBuf>,
    /// Extracted triplets (JSON lines) overriding gold triplets.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub triplets: Option<PathBuf>,
    pub synthetic: SyntheticSpec,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub similarity: SimilarityConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("runs/default"),
            dictionary: None,
            train_manifest: None,
            eval_manifest: None,
            triplets: None,
            synthetic: SyntheticSpec::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            similarity: SimilarityConfig::default(),
        }
    }
}

impl RunConfig {
    /// The configuration file shipped with the crate.
    pub fn shipped() -> Self {
        Self::from_toml(SHIPPED).expect("shipped run config parses")
    }

    pub fn shipped_text() -> &'static str {
        SHIPPED
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Serde(format!("run config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn seed(&self) -> u64 {
        self.train.seed
    }

    pub fn uses_synthetic(&self) -> bool {
        self.train_manifest.is_none()
    }
}

/// Every broken invariant as one line naming the offending field; empty when
/// the configuration is usable.
pub fn validate_config(config: &RunConfig) -> Vec<String> {
    let mut v = Vec::new();
    if config.output_dir.as_os_str().is_empty() {
        v.push("RunConfig.output_dir must not be empty".to_string());
    }
    v.extend(config.model.violations());
    v.extend(config.train.violations());
    v.extend(config.similarity.violations());
    if config.uses_synthetic() {
        if let Err(e) = config.synthetic.validate() {
            v.push(e.to_string());
        }
        let size = config.synthetic.image_size;
        if size != config.model.image_height || size != config.model.image_width {
            v.push(format!(
                "SyntheticSpec.image_size {size} does not match ModelConfig image {}x{}",
                config.model.image_height, config.model.image_width
            ));
        }
    } else if config.eval_manifest.is_none() {
        v.push("RunConfig.eval_manifest is required with train_manifest".to_string());
    }
    v
}
