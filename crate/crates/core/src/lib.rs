//! Deep survival analysis with latent clustering: variational and Siamese
//! autoencoders, contrastive cluster refinement, self-paced training,
//! discrete-time survival heads and the usual evaluation statistics.

pub mod checkpoint;
pub mod cli;
pub mod clustering;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod hpo;
pub mod losses;
pub mod metrics;
pub mod networks;
pub mod stratify;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
