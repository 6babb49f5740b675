//! Federated protocol: participant-local training, within-group FedAvg, the
//! cross-modal double aggregation, and the global-epoch loop.

mod aggregate;
mod engine;
mod experiment;
mod local;

pub use aggregate::{agg, agg_avg, agg_m2u, agg_u2m};
pub use engine::{run_global_epoch, AggregationMode, FederationState, GroupSetup};
pub use engine::{evaluate, EvalSets, Evaluation};
pub use experiment::{run_experiment, run_seed, train_seed, PreparedData};
pub use local::{
    local_train, local_train_contrastive, local_train_supervised, LocalData, LocalUpdate,
    TrainSettings,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Participant groups, one per data modality held.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Image,
    Audio,
    Multimodal,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Image, Group::Audio, Group::Multimodal];

    pub fn name(self) -> &'static str {
        match self {
            Group::Image => "image",
            Group::Audio => "audio",
            Group::Multimodal => "multimodal",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    CentralizedBaseline,
    FlBaseline,
    FrameworkBalanced,
    FrameworkUnbalancedPaired,
    FrameworkUnbalancedRandom,
}

impl RegimeKind {
    pub fn name(self) -> &'static str {
        match self {
            RegimeKind::CentralizedBaseline => "centralized_baseline",
            RegimeKind::FlBaseline => "fl_baseline",
            RegimeKind::FrameworkBalanced => "framework_balanced",
            RegimeKind::FrameworkUnbalancedPaired => "framework_unbalanced_paired",
            RegimeKind::FrameworkUnbalancedRandom => "framework_unbalanced_random",
        }
    }

    /// Whether the multimodal group trains the contrastive model (and the
    /// server transfers between groups) rather than the late-fusion baseline.
    pub fn is_framework(self) -> bool {
        matches!(
            self,
            RegimeKind::FrameworkBalanced
                | RegimeKind::FrameworkUnbalancedPaired
                | RegimeKind::FrameworkUnbalancedRandom
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantState {
    pub id: usize,
    pub group: Group,
    pub sample_indices: Vec<usize>,
    pub local_epochs: usize,
    pub local_batch: usize,
}

impl ParticipantState {
    pub fn new(id: usize, group: Group, sample_indices: Vec<usize>, local_epochs: usize, local_batch: usize) -> Result<Self> {
        if sample_indices.is_empty() {
            return Err(Error::config(format!("{} participant {id} has no samples", group.name())));
        }
        if local_batch == 0 {
            return Err(Error::config("local batch size must be positive"));
        }
        Ok(ParticipantState {
            id,
            group,
            sample_indices,
            local_epochs,
            local_batch,
        })
    }
}
