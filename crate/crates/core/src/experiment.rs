//! One train/evaluate run on a numbered split, and the metrics report
//! it produces.

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::data::{self, PreparedSplit, RawTable, SplitSet, Transforms};
use crate::error::Result;
use crate::trainer::{self, Metrics, TrainedModel};

/// Metrics summary written by `train` and `evaluate`. The top-level
/// `c_index`/`ibs` refer to the reported subset (test by default).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub dataset: String,
    pub split: usize,
    pub subset: String,
    pub c_index: f64,
    pub ibs: f64,
    pub seed: u64,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<Metrics>,
}

impl Report {
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

pub fn dataset_label(cfg: &ExperimentConfig) -> String {
    cfg.data
        .dataset
        .clone()
        .or_else(|| cfg.data.path.as_ref().map(|p| p.display().to_string()))
        .unwrap_or_default()
}

/// A trained split: the model, its preprocessing and both metric sets.
pub struct SplitRun {
    pub model: TrainedModel,
    pub transforms: Transforms,
    pub validation: Metrics,
    pub test: Metrics,
}

/// Preprocesses split `split` (1-based), trains with early stopping on
/// its validation rows and scores validation and test rows.
pub fn run_split(cfg: &ExperimentConfig, table: &RawTable, splits: &SplitSet, split: usize) -> Result<SplitRun> {
    let PreparedSplit {
        transforms,
        train,
        val,
        test,
    } = data::prepare_split(table, splits.get(split)?)?;
    let model = trainer::fit(cfg, &train, Some(&val))?;
    Ok(SplitRun {
        validation: model.evaluate(&val)?,
        test: model.evaluate(&test)?,
        model,
        transforms,
    })
}

impl SplitRun {
    pub fn report(&self, cfg: &ExperimentConfig, split: usize) -> Report {
        Report {
            dataset: dataset_label(cfg),
            split,
            subset: "test".into(),
            c_index: self.test.c_index,
            ibs: self.test.ibs,
            seed: cfg.seed,
            config_hash: cfg.hash(),
            validation: Some(self.validation),
        }
    }
}
