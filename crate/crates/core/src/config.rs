//! Experiment configuration, loaded from TOML.
//!
//! Every section has defaults, so a minimal file only names the dataset:
//!
//! ```toml
//! [data]
//! dataset = "gbsg"
//! ```
//!
//! See `configs/` in the repository for a fully annotated file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Weights of every training objective plus the contrastive temperature
/// and the ranking-loss scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub rec: f64,
    pub kld: f64,
    pub clus: f64,
    pub spl: f64,
    pub cl: f64,
    pub surv: f64,
    pub ivcg: f64,
    pub iviw: f64,
    pub ivcw: f64,
    /// Weight of the ranking term inside the survival loss.
    pub beta: f64,
    /// InfoNCE temperature.
    pub tau: f64,
    /// Scale of the pairwise ranking exponent.
    pub sigma_rank: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            rec: 1.0,
            kld: 0.01,
            clus: 0.1,
            spl: 1.0,
            cl: 0.1,
            surv: 1.0,
            ivcg: 1.0,
            iviw: 0.0,
            ivcw: 0.0,
            beta: 0.5,
            tau: 0.5,
            sigma_rank: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadsMode {
    Shared,
    PerCluster,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusteringAlgorithm {
    Kmeans,
    Gmm,
    Agglomerative,
    /// Parsed so that configs naming it get a clear rejection, never run.
    Spectral,
}

impl std::fmt::Display for ClusteringAlgorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ClusteringAlgorithm::Kmeans => "kmeans",
            ClusteringAlgorithm::Gmm => "gmm",
            ClusteringAlgorithm::Agglomerative => "agglomerative",
            ClusteringAlgorithm::Spectral => "spectral",
        };
        f.write_str(s)
    }
}

/// Where self-paced statistics (mean/std of instance losses) come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplScope {
    Batch,
    Dataset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variational: bool,
    pub siamese: bool,
    pub heads: HeadsMode,
    pub clustering: ClusteringAlgorithm,
    pub k: usize,
    pub latent_dim: usize,
    pub time_bins: usize,
    /// Student's-t degrees of freedom for soft assignments.
    pub nu: f64,
    /// View (1 or 2) whose hard assignments route patients to heads.
    pub routing_view: usize,
    pub encoder_hidden: Vec<usize>,
    pub head_hidden: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variational: true,
            siamese: false,
            heads: HeadsMode::Shared,
            clustering: ClusteringAlgorithm::Kmeans,
            k: 2,
            latent_dim: 16,
            time_bins: 20,
            nu: 1.0,
            routing_view: 1,
            encoder_hidden: vec![64, 32],
            head_hidden: vec![64],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    /// Decoupled L2 shrinkage applied by the optimizer; 0 disables it.
    pub weight_decay: f64,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub epochs: usize,
    /// Early-stopping patience on validation C-index; 0 disables it.
    pub patience: usize,
    pub spl_scope: SplScope,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            weight_decay: 0.0,
            batch_size: 256,
            pretrain_epochs: 100,
            epochs: 200,
            patience: 25,
            spl_scope: SplScope::Batch,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Built-in dataset preset (`gbsg`, `metabric`, `whas`, `tcga_brca`).
    pub dataset: Option<String>,
    /// Schema file; required when no preset is named.
    pub schema: Option<PathBuf>,
    /// CSV path; overrides the preset's bundled copy.
    pub path: Option<PathBuf>,
    /// Persisted split file; when absent splits are generated from `split_seed`.
    pub split_file: Option<PathBuf>,
    pub split_seed: u64,
    /// Resample training rows with replacement instead of partitioning.
    pub with_replacement: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    /// 1-based split id in `1..=5`.
    pub split: usize,
    pub output_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub loss: LossWeights,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            seed: 0,
            split: 1,
            output_dir: None,
            data: DataConfig::default(),
            model: ModelConfig::default(),
            loss: LossWeights::default(),
            train: TrainConfig::default(),
        }
    }
}

fn check_weight(errors: &mut Vec<String>, name: &str, v: f64) {
    if !v.is_finite() || v < 0.0 {
        errors.push(format!("loss.{name} must be a finite non-negative number (got {v})"));
    }
}

impl LossWeights {
    /// Collects every constraint violation for the given encoder mode.
    pub fn violations(&self, siamese: bool) -> Vec<String> {
        let mut errors = Vec::new();
        for (name, v) in [
            ("rec", self.rec),
            ("kld", self.kld),
            ("clus", self.clus),
            ("spl", self.spl),
            ("cl", self.cl),
            ("surv", self.surv),
            ("ivcg", self.ivcg),
            ("iviw", self.iviw),
            ("ivcw", self.ivcw),
            ("beta", self.beta),
        ] {
            check_weight(&mut errors, name, v);
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            errors.push(format!("loss.tau must be > 0 (got {})", self.tau));
        }
        if !(self.sigma_rank > 0.0 && self.sigma_rank.is_finite()) {
            errors.push(format!("loss.sigma_rank must be > 0 (got {})", self.sigma_rank));
        }
        if !siamese {
            if self.iviw != 0.0 {
                errors.push(format!(
                    "loss.iviw = {} requires siamese encoders; set model.siamese = true or loss.iviw = 0",
                    self.iviw
                ));
            }
            if self.ivcw != 0.0 {
                errors.push(format!(
                    "loss.ivcw = {} requires siamese encoders; set model.siamese = true or loss.ivcw = 0",
                    self.ivcw
                ));
            }
        }
        errors
    }

    pub fn validate(&self, siamese: bool) -> Result<()> {
        let errors = self.violations(siamese);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errors))
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Loads a config file. Relative data paths are resolved against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(inner) = p {
                if inner.is_relative() {
                    *inner = base.join(&*inner);
                }
            }
        };
        resolve(&mut cfg.data.schema);
        resolve(&mut cfg.data.path);
        resolve(&mut cfg.data.split_file);
        resolve(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Every violated constraint, in a stable order.
    pub fn violations(&self) -> Vec<String> {
        let m = &self.model;
        let mut errors = Vec::new();
        if m.clustering == ClusteringAlgorithm::Spectral {
            errors.push(
                "model.clustering = \"spectral\" is not supported; use kmeans, gmm or agglomerative"
                    .into(),
            );
        }
        if m.k < 1 {
            errors.push("model.k must be >= 1".into());
        }
        if m.latent_dim < 1 {
            errors.push("model.latent_dim must be >= 1".into());
        }
        if m.time_bins < 1 {
            errors.push("model.time_bins must be >= 1".into());
        }
        if !(m.nu > 0.0 && m.nu.is_finite()) {
            errors.push(format!("model.nu must be > 0 (got {})", m.nu));
        }
        match m.routing_view {
            1 => {}
            2 if m.siamese => {}
            2 => errors.push("model.routing_view = 2 requires siamese encoders".into()),
            v => errors.push(format!("model.routing_view must be 1 or 2 (got {v})")),
        }
        if m.encoder_hidden.is_empty() || m.encoder_hidden.contains(&0) {
            errors.push("model.encoder_hidden needs at least one layer, all widths > 0".into());
        }
        if m.head_hidden.is_empty() || m.head_hidden.contains(&0) {
            errors.push("model.head_hidden needs at least one layer, all widths > 0".into());
        }
        errors.extend(self.loss.violations(m.siamese));
        let t = &self.train;
        if !(t.lr > 0.0 && t.lr.is_finite()) {
            errors.push(format!("train.lr must be > 0 (got {})", t.lr));
        }
        if !(t.weight_decay >= 0.0 && t.weight_decay.is_finite()) {
            errors.push(format!("train.weight_decay must be >= 0 (got {})", t.weight_decay));
        }
        if t.batch_size < 1 {
            errors.push("train.batch_size must be >= 1".into());
        }
        if !(1..=crate::data::NUM_SPLITS).contains(&self.split) {
            errors.push(format!(
                "split must be in 1..={} (got {})",
                crate::data::NUM_SPLITS,
                self.split
            ));
        }
        if self.data.dataset.is_none() && (self.data.schema.is_none() || self.data.path.is_none()) {
            errors.push("data: name a preset (data.dataset) or give both data.schema and data.path".into());
        }
        if let Some(name) = &self.data.dataset {
            if crate::data::presets::preset(name).is_none() {
                errors.push(format!("data.dataset: unknown preset `{name}`"));
            }
        }
        errors
    }

    pub fn validate(&self) -> Result<()> {
        let errors = self.violations();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errors))
        }
    }

    /// Short stable digest of the full configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }
}
