//! Federated transfer learning between unimodal and multimodal participant
//! groups.
//!
//! Participants holding paired image and audio views train a contrastive
//! dual-tower model; participants holding a single modality train supervised
//! classifiers. Each round the server averages models within each group and
//! then averages the encoder and projector sub-networks shared between the
//! unimodal classifiers and the contrastive model, so the unimodal groups
//! benefit from cross-modal alignment learned without labels.

pub mod config;
pub mod data;
pub mod error;
pub mod federation;
pub mod losses;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod params;
pub mod report;
pub mod rng;
pub mod tensor;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use params::ParameterMap;
pub use tensor::Tensor;
