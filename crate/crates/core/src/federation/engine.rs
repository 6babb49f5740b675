//! One synchronized round: every participant trains from the current global
//! model of its group, then the server aggregates.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::aggregate::{agg, agg_avg};
use super::local::{local_train, LocalData, LocalUpdate, TrainSettings};
use super::{Group, ParticipantState};
use crate::data::MultimodalDataset;
use crate::error::{Error, Result};
use crate::losses::{ntxent_loss, softmax_cross_entropy, ContrastiveBatch, OneHotBatch};
use crate::models::{Inputs, ModelBundle};
use crate::params::ParameterMap;
use crate::report::EpochRecord;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationMode {
    /// A single participant per group whose update becomes the global model.
    None,
    /// Plain FedAvg inside each group.
    PerGroup,
    /// FedAvg inside each group followed by cross-modal transfer.
    CrossModal,
}

/// Topology, participants and their local data for one group.
#[derive(Debug, Clone)]
pub struct GroupSetup {
    pub group: Group,
    pub bundle: ModelBundle,
    pub participants: Vec<ParticipantState>,
    pub data: Vec<LocalData>,
}

#[derive(Debug, Clone)]
pub struct FederationState {
    pub global: BTreeMap<Group, ParameterMap>,
    pub epoch: usize,
    pub settings: TrainSettings,
    pub history: Vec<EpochRecord>,
    pub aggregation_calls: usize,
    pub parallel: bool,
}

impl FederationState {
    pub fn new(setups: &[GroupSetup], settings: TrainSettings, parallel: bool) -> Self {
        FederationState {
            global: setups.iter().map(|s| (s.group, s.bundle.params.clone())).collect(),
            epoch: 0,
            settings,
            history: Vec::new(),
            aggregation_calls: 0,
            parallel,
        }
    }
}

/// Data the server-side metrics are computed on after each round.
#[derive(Debug, Clone, Copy)]
pub struct EvalSets<'a> {
    pub train: &'a MultimodalDataset,
    pub val: &'a MultimodalDataset,
    pub batch: usize,
    pub temperature: f64,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loss: f64,
    /// Supervised models only.
    pub accuracy: Option<f64>,
    pub predictions: Option<Vec<usize>>,
}

/// Loss (and accuracy, for classifiers) of `params` on a whole dataset.
/// Contrastive loss is averaged over consecutive batches of `batch` pairs.
pub fn evaluate(
    bundle: &ModelBundle,
    params: &ParameterMap,
    data: &MultimodalDataset,
    batch: usize,
    temperature: f64,
) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("evaluation set".into()));
    }
    if bundle.is_supervised() {
        let logits = bundle.logits(
            params,
            Inputs {
                image: bundle.needs_image().then(|| data.images()),
                audio: bundle.needs_audio().then(|| data.audios()),
            },
        )?;
        let targets = OneHotBatch::from_labels(data.labels(), bundle.class_count)?;
        let (loss, _) = softmax_cross_entropy(&logits, &targets)?;
        let predictions = logits.argmax_rows();
        let accuracy = crate::metrics::accuracy(&predictions, data.labels())?;
        Ok(Evaluation {
            loss,
            accuracy: Some(accuracy),
            predictions: Some(predictions),
        })
    } else {
        let (zi, za) = bundle.embed(params, data.images(), data.audios())?;
        let mut total = 0.0;
        let mut count = 0usize;
        let rows: Vec<usize> = (0..data.len()).collect();
        for chunk in rows.chunks(batch.max(2)) {
            if chunk.len() < 2 {
                continue;
            }
            let (bi, ba): (Tensor, Tensor) = (zi.select_rows(chunk), za.select_rows(chunk));
            total += ntxent_loss(&ContrastiveBatch {
                z_img: &bi,
                z_aud: &ba,
                temperature,
            })?
            .loss;
            count += 1;
        }
        Ok(Evaluation {
            loss: if count == 0 { 0.0 } else { total / count as f64 },
            accuracy: None,
            predictions: None,
        })
    }
}

/// Local training for every participant (possibly concurrently), then the
/// server aggregation for `mode`, then metrics on the new global models.
pub fn run_global_epoch(
    state: FederationState,
    setups: &[GroupSetup],
    mode: AggregationMode,
    eval: EvalSets<'_>,
) -> Result<FederationState> {
    let jobs: Vec<(usize, usize)> = setups
        .iter()
        .enumerate()
        .flat_map(|(g, s)| (0..s.participants.len()).map(move |p| (g, p)))
        .collect();
    let round = state.epoch;
    let train_one = |&(g, p): &(usize, usize)| -> Result<LocalUpdate> {
        let setup = &setups[g];
        let global = state
            .global
            .get(&setup.group)
            .ok_or_else(|| Error::Internal(format!("no global model for {}", setup.group.name())))?;
        local_train(
            &setup.bundle,
            global,
            &setup.participants[p],
            &setup.data[p],
            &state.settings,
            round,
        )
    };
    let updates: Vec<LocalUpdate> = if state.parallel {
        jobs.par_iter().map(train_one).collect::<Result<_>>()?
    } else {
        jobs.iter().map(train_one).collect::<Result<_>>()?
    };

    let mut per_group: BTreeMap<Group, Vec<LocalUpdate>> = BTreeMap::new();
    for (&(g, _), update) in jobs.iter().zip(updates) {
        per_group.entry(setups[g].group).or_default().push(update);
    }

    let mut next = state;
    let mut record = EpochRecord::new(next.epoch + 1);
    for (group, updates) in &per_group {
        let losses: Vec<f64> = updates.iter().filter_map(|u| u.mean_loss).collect();
        if !losses.is_empty() {
            record.insert(
                format!("{}.local_loss", group.name()),
                losses.iter().sum::<f64>() / losses.len() as f64,
            );
        }
    }
    let mut weights: BTreeMap<Group, Vec<ParameterMap>> = per_group
        .into_iter()
        .map(|(g, us)| (g, us.into_iter().map(|u| u.params).collect()))
        .collect();

    match mode {
        AggregationMode::None => {
            for (group, mut list) in weights {
                if list.len() != 1 {
                    return Err(Error::Internal(format!(
                        "unaggregated {} group has {} participants",
                        group.name(),
                        list.len()
                    )));
                }
                next.global.insert(group, list.pop().expect("one update"));
            }
        }
        AggregationMode::PerGroup => {
            for (group, list) in weights {
                next.global.insert(group, agg(&list)?);
                next.aggregation_calls += 1;
            }
        }
        AggregationMode::CrossModal => {
            let mut take = |g: Group| {
                weights
                    .remove(&g)
                    .ok_or_else(|| Error::Internal(format!("cross-modal round lacks the {} group", g.name())))
            };
            let (wi, wa, wm) = (take(Group::Image)?, take(Group::Audio)?, take(Group::Multimodal)?);
            let (fi, fa, fm) = agg_avg(&wi, &wa, &wm)?;
            next.global.insert(Group::Image, fi);
            next.global.insert(Group::Audio, fa);
            next.global.insert(Group::Multimodal, fm);
            next.aggregation_calls += 1;
        }
    }

    for setup in setups {
        let params = &next.global[&setup.group];
        let name = setup.group.name();
        for (split, data) in [("train", eval.train), ("val", eval.val)] {
            let e = evaluate(&setup.bundle, params, data, eval.batch, eval.temperature)?;
            record.insert(format!("{name}.{split}_loss"), e.loss);
            if let Some(acc) = e.accuracy {
                record.insert(format!("{name}.{split}_accuracy"), acc);
            }
        }
    }
    log::debug!("round {} done: {:?}", next.epoch + 1, record.values);
    next.history.push(record);
    next.epoch += 1;
    Ok(next)
}
