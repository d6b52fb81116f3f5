//! Self-contained model files: configuration, schema, fitted
//! preprocessing, time grid, censoring curve, parameters and clusters.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::data::{RawTable, Schema, SurvivalDataset, Transforms};
use crate::error::{Error, Result};
use crate::trainer::TrainedModel;

pub const FORMAT: &str = "survstrat-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ExperimentConfig,
    pub schema: Schema,
    pub transforms: Transforms,
    /// Split the model was trained on (1-based) and the seed of its split set.
    pub split: usize,
    pub split_seed: u64,
    pub with_replacement: bool,
    pub model: TrainedModel,
}

impl Checkpoint {
    pub fn new(config: ExperimentConfig, schema: Schema, transforms: Transforms, model: TrainedModel) -> Self {
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            split: config.split,
            split_seed: config.data.split_seed,
            with_replacement: config.data.with_replacement,
            config,
            schema,
            transforms,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.format != FORMAT {
            return Err(Error::Data(format!("not a checkpoint file (format `{}`)", header.format)));
        }
        if header.version != VERSION {
            return Err(Error::Data(format!(
                "checkpoint version {} is not supported (expected {VERSION})",
                header.version
            )));
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&text)
    }

    /// Applies the stored preprocessing, checking the feature width
    /// against the network.
    pub fn prepare(&self, table: &RawTable, rows: &[usize]) -> Result<SurvivalDataset> {
        let data = self.transforms.apply(table, rows)?;
        let expected = self.model.network.config().input_dim;
        if data.num_features() != expected {
            return Err(Error::Data(format!(
                "data yields {} features but the model expects {expected}",
                data.num_features()
            )));
        }
        Ok(data)
    }
}
