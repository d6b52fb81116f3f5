//! Dataset ingestion, preprocessing and the train/validation/test split
//! protocol.

pub mod presets;
mod preprocess;
mod schema;
mod splits;
mod table;

pub use preprocess::{ColumnTransform, SurvivalDataset, Transforms};
pub use schema::{ColumnKind, ColumnSpec, Schema};
pub use splits::{make_splits, split_sizes, Split, SplitSet};
pub use table::{load_csv, read_csv, RawColumn, RawTable};

use crate::config::DataConfig;
use crate::error::{Error, Result};

/// Number of resampled train/validation/test partitions.
pub const NUM_SPLITS: usize = 5;

/// Schema named by a config: an explicit schema file wins over the preset.
pub fn resolve_schema(cfg: &DataConfig) -> Result<Schema> {
    if let Some(path) = &cfg.schema {
        return Schema::load(path);
    }
    let name = cfg
        .dataset
        .as_deref()
        .ok_or_else(|| Error::Config("data: name a preset or a schema file".into()))?;
    presets::preset(name)
        .map(|p| p.schema)
        .ok_or_else(|| Error::Config(format!("unknown dataset preset `{name}`")))
}

/// Loads the table a config points at: `data.path` if given, otherwise
/// the preset's embedded copy.
pub fn load_table(cfg: &DataConfig) -> Result<RawTable> {
    let schema = resolve_schema(cfg)?;
    if let Some(path) = &cfg.path {
        return load_csv(path, &schema);
    }
    let name = cfg.dataset.as_deref().unwrap_or_default();
    match presets::preset(name).and_then(|p| p.csv) {
        Some(text) => read_csv(text.as_bytes(), &schema),
        None => Err(Error::Data(format!(
            "preset `{name}` has no bundled data; set data.path to a local copy"
        ))),
    }
}

/// The split set for a config: read from `data.split_file` when it
/// exists, otherwise generated from `data.split_seed`.
pub fn resolve_splits(cfg: &DataConfig, n: usize) -> Result<SplitSet> {
    if let Some(path) = &cfg.split_file {
        if path.exists() {
            let set = SplitSet::read(path)?;
            set.check(n)?;
            return Ok(set);
        }
    }
    make_splits(n, cfg.split_seed, cfg.with_replacement)
}

/// One split after preprocessing fitted on its training rows.
#[derive(Clone, Debug)]
pub struct PreparedSplit {
    pub transforms: Transforms,
    pub train: SurvivalDataset,
    pub val: SurvivalDataset,
    pub test: SurvivalDataset,
}

pub fn prepare_split(table: &RawTable, split: &Split) -> Result<PreparedSplit> {
    let transforms = Transforms::fit(table, &split.train)?;
    Ok(PreparedSplit {
        train: transforms.apply(table, &split.train)?,
        val: transforms.apply(table, &split.val)?,
        test: transforms.apply(table, &split.test)?,
        transforms,
    })
}
