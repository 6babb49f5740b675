//! End-to-end regimes: data preparation, model construction, participant
//! partitioning, the round loop and final test evaluation.

use std::collections::BTreeMap;

use super::engine::{evaluate, run_global_epoch, AggregationMode, EvalSets, FederationState, GroupSetup};
use super::local::{LocalData, TrainSettings};
use super::{Group, ParticipantState, RegimeKind};
use crate::config::{DataConfig, ExperimentConfig};
use crate::data::{
    generate_synthetic, load_csv_features, partition_balanced, partition_unbalanced_paired,
    partition_unbalanced_random, split, MultimodalDataset, Partition,
};
use crate::error::{Error, Result};
use crate::metrics::confusion;
use crate::models::{self, ModelConfig, ModelKind};
use crate::report::{ExperimentReport, SeedReport};
use crate::rng;

const STREAM_MODEL: u64 = 1;
const STREAM_PARTITION: u64 = 2;
const STREAM_TRAIN: u64 = 3;

/// Train/validation/test sets shared by every seed of an experiment.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: MultimodalDataset,
    pub val: MultimodalDataset,
    pub test: MultimodalDataset,
}

impl PreparedData {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let full = match &cfg.data {
            DataConfig::Synthetic(spec) => generate_synthetic(spec)?,
            DataConfig::Csv(c) => load_csv_features(&c.sources()?, c.class_count, c.class_names.as_deref())?,
        };
        full.check_all_classes_present()?;
        let parts = split(&full, &cfg.split)?;
        let (train, val, test) = parts.datasets(&full);
        for (name, d) in [("training split", &train), ("validation split", &val), ("test split", &test)] {
            if d.is_empty() {
                return Err(Error::EmptyDataset(name.into()));
            }
        }
        Ok(PreparedData { train, val, test })
    }

    pub fn model_config(&self, cfg: &ExperimentConfig) -> ModelConfig {
        ModelConfig {
            image_dim: self.train.image_dim(),
            audio_dim: self.train.audio_dim(),
            class_count: self.train.class_count(),
            scale: cfg.model.scale,
            leaky_slope: cfg.model.leaky_slope,
        }
    }
}

fn group_models(regime: RegimeKind) -> [(Group, ModelKind); 3] {
    let multimodal = if regime.is_framework() {
        ModelKind::Contrastive
    } else {
        ModelKind::LateFusion
    };
    [
        (Group::Image, ModelKind::ImageClassifier),
        (Group::Audio, ModelKind::AudioClassifier),
        (Group::Multimodal, multimodal),
    ]
}

fn partitions(cfg: &ExperimentConfig, train_size: usize, seed: u64) -> Result<[Partition; 3]> {
    let n = cfg.federation.participants;
    let min_count = cfg.federation.min_count_for(train_size);
    Ok(match cfg.regime {
        RegimeKind::CentralizedBaseline => [0, 1, 2].map(|g| Partition {
            group: g,
            participants: vec![(0..train_size).collect()],
        }),
        RegimeKind::FlBaseline | RegimeKind::FrameworkBalanced => [
            partition_balanced(train_size, n, 0, seed)?,
            partition_balanced(train_size, n, 1, seed)?,
            partition_balanced(train_size, n, 2, seed)?,
        ],
        RegimeKind::FrameworkUnbalancedPaired => {
            partition_unbalanced_paired([train_size; 3], n, min_count, seed)?
        }
        RegimeKind::FrameworkUnbalancedRandom => partition_unbalanced_random(train_size, n, min_count, seed)?,
    })
}

fn aggregation_mode(regime: RegimeKind) -> AggregationMode {
    match regime {
        RegimeKind::CentralizedBaseline => AggregationMode::None,
        RegimeKind::FlBaseline => AggregationMode::PerGroup,
        _ => AggregationMode::CrossModal,
    }
}

/// Builds the three group setups for one seed.
pub(crate) fn setups(cfg: &ExperimentConfig, data: &PreparedData, seed: u64) -> Result<Vec<GroupSetup>> {
    let model_cfg = data.model_config(cfg);
    let model_seed = rng::derive_seed(seed, &[STREAM_MODEL]);
    let parts = partitions(cfg, data.train.len(), rng::derive_seed(seed, &[STREAM_PARTITION]))?;
    let (local_epochs, local_batch) = match cfg.regime {
        RegimeKind::CentralizedBaseline => (1, cfg.training.batch_size),
        _ => (cfg.federation.local_epochs, cfg.federation.local_batch),
    };
    group_models(cfg.regime)
        .into_iter()
        .zip(parts)
        .map(|((group, kind), partition)| {
            let bundle = models::build(kind, &model_cfg, model_seed)?;
            let mut participants = Vec::new();
            let mut local = Vec::new();
            for (id, indices) in partition.participants.into_iter().enumerate() {
                local.push(LocalData::for_model(&data.train, &indices, kind)?);
                participants.push(ParticipantState::new(id, group, indices, local_epochs, local_batch)?);
            }
            Ok(GroupSetup {
                group,
                bundle,
                participants,
                data: local,
            })
        })
        .collect()
}

/// Runs every round of one seed and evaluates the final models on the test set.
pub fn run_seed(cfg: &ExperimentConfig, data: &PreparedData, seed: u64) -> Result<SeedReport> {
    let (state, setups) = train_seed(cfg, data, seed)?;
    let mut report = SeedReport {
        seed,
        curves: SeedReport::curves_from_history(&state.history),
        test_accuracy: BTreeMap::new(),
        test_loss: BTreeMap::new(),
        confusion: BTreeMap::new(),
        aggregation_calls: state.aggregation_calls,
    };
    for setup in &setups {
        let name = setup.group.name().to_string();
        let params = &state.global[&setup.group];
        let e = evaluate(
            &setup.bundle,
            params,
            &data.test,
            cfg.federation.local_batch,
            cfg.training.temperature,
        )?;
        report.test_loss.insert(name.clone(), e.loss);
        if let (Some(acc), Some(preds)) = (e.accuracy, e.predictions) {
            report.test_accuracy.insert(name.clone(), acc);
            report
                .confusion
                .insert(name, confusion(&preds, data.test.labels(), data.test.class_count())?);
        }
    }
    Ok(report)
}

/// Trains one seed and returns the final federation state with its setups.
pub fn train_seed(cfg: &ExperimentConfig, data: &PreparedData, seed: u64) -> Result<(FederationState, Vec<GroupSetup>)> {
    let setups = setups(cfg, data, seed)?;
    let settings = TrainSettings {
        learning_rate: cfg.training.learning_rate,
        temperature: cfg.training.temperature,
        seed: rng::derive_seed(seed, &[STREAM_TRAIN]),
    };
    let mut state = FederationState::new(&setups, settings, cfg.federation.parallel);
    let eval = EvalSets {
        train: &data.train,
        val: &data.val,
        batch: cfg.federation.local_batch,
        temperature: cfg.training.temperature,
    };
    let mode = aggregation_mode(cfg.regime);
    for _ in 0..cfg.training.global_epochs {
        state = run_global_epoch(state, &setups, mode, eval)?;
        log::info!(
            "{} seed {seed}: round {}/{}",
            cfg.regime.name(),
            state.epoch,
            cfg.training.global_epochs
        );
    }
    Ok((state, setups))
}

/// Validates the configuration, prepares data once, and runs every seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let data = PreparedData::from_config(cfg)?;
    data.model_config(cfg).validate()?;
    let seeds = cfg
        .seeds
        .iter()
        .map(|&s| run_seed(cfg, &data, s))
        .collect::<Result<Vec<_>>>()?;
    ExperimentReport::from_seeds(cfg.clone(), seeds)
}
