//! Named experiment files: a model config plus its training recipe.

use std::path::Path;

use aqa_model::micro::micro_train_config;
use aqa_model::{presets, ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub name: String,
    pub model: ModelConfig,
    pub training: TrainConfig,
}

impl Experiment {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let exp: Experiment = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Usage(format!("{}: not an experiment file: {e}", path.display())))?;
        exp.model.validate()?;
        exp.training.validate()?;
        Ok(exp)
    }

    pub fn file_name(&self) -> String {
        format!("{}.json", self.name)
    }
}

/// Every shipped experiment, in report order.
pub fn experiments() -> Vec<Experiment> {
    presets()
        .into_iter()
        .map(|(name, model)| {
            let training = if name == "micro" {
                TrainConfig { target_accuracy: None, ..micro_train_config() }
            } else {
                TrainConfig::default()
            };
            Experiment { name, model, training }
        })
        .collect()
}

pub fn experiment(name: &str) -> Option<Experiment> {
    experiments().into_iter().find(|e| e.name == name)
}
