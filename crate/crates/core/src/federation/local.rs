//! Participant-side training. This is the only code that touches raw
//! participant data.

use rand::seq::SliceRandom;

use super::ParticipantState;
use crate::data::MultimodalDataset;
use crate::error::{Error, Result};
use crate::models::{Inputs, ModelBundle, ModelKind};
use crate::nn::sgd_step;
use crate::params::ParameterMap;
use crate::rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub temperature: f64,
    pub seed: u64,
}

/// The views one participant holds. Only the modalities its model consumes
/// are copied in; contrastive participants receive no labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalData {
    pub images: Option<Tensor>,
    pub audios: Option<Tensor>,
    pub labels: Option<Vec<usize>>,
    len: usize,
}

impl LocalData {
    pub fn for_model(source: &MultimodalDataset, indices: &[usize], kind: ModelKind) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::config("participant has no samples"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= source.len()) {
            return Err(Error::config(format!("sample index {bad} out of bounds")));
        }
        let wants_image = kind != ModelKind::AudioClassifier;
        let wants_audio = kind != ModelKind::ImageClassifier;
        Ok(LocalData {
            images: wants_image.then(|| source.images().select_rows(indices)),
            audios: wants_audio.then(|| source.audios().select_rows(indices)),
            labels: (kind != ModelKind::Contrastive)
                .then(|| indices.iter().map(|&i| source.labels()[i]).collect()),
            len: indices.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalUpdate {
    pub params: ParameterMap,
    /// Mean mini-batch loss over every local step, or `None` with no steps.
    pub mean_loss: Option<f64>,
}

/// Shuffle stream for one participant epoch. `absolute_epoch` counts local
/// epochs from the start of training, so a lone participant running `E`
/// local epochs per round walks the same sequence as centralized training.
fn epoch_order(n: usize, settings: &TrainSettings, p: &ParticipantState, absolute_epoch: usize) -> Vec<usize> {
    let mut rng = rng::stream(
        settings.seed,
        &[p.group.index() as u64, p.id as u64, absolute_epoch as u64],
    );
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Runs `p.local_epochs` passes of mini-batch SGD from `global`, choosing the
/// objective from the bundle kind.
pub fn local_train(
    bundle: &ModelBundle,
    global: &ParameterMap,
    p: &ParticipantState,
    data: &LocalData,
    settings: &TrainSettings,
    round: usize,
) -> Result<LocalUpdate> {
    let mut params = global.clone();
    let mut loss_sum = 0.0;
    let mut steps = 0usize;
    for e in 0..p.local_epochs {
        let order = epoch_order(data.len(), settings, p, round * p.local_epochs + e);
        for batch in order.chunks(p.local_batch) {
            let (loss, grads) = match bundle.kind {
                ModelKind::Contrastive => {
                    let (Some(img), Some(aud)) = (&data.images, &data.audios) else {
                        return Err(Error::Internal("contrastive participant lacks a view".into()));
                    };
                    if batch.len() < 2 {
                        log::debug!("participant {} skipped a single-sample contrastive batch", p.id);
                        continue;
                    }
                    bundle.contrastive_grads(
                        &params,
                        &img.select_rows(batch),
                        &aud.select_rows(batch),
                        settings.temperature,
                    )?
                }
                _ => {
                    let labels = data
                        .labels
                        .as_ref()
                        .ok_or_else(|| Error::Internal("supervised participant lacks labels".into()))?;
                    let img = data.images.as_ref().map(|t| t.select_rows(batch));
                    let aud = data.audios.as_ref().map(|t| t.select_rows(batch));
                    let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
                    bundle.supervised_grads(
                        &params,
                        Inputs {
                            image: img.as_ref(),
                            audio: aud.as_ref(),
                        },
                        &y,
                    )?
                }
            };
            params = sgd_step(&params, &grads, settings.learning_rate)?;
            loss_sum += loss;
            steps += 1;
        }
    }
    if !params.is_finite() {
        return Err(Error::Internal(format!(
            "{} participant {} diverged to non-finite parameters",
            p.group.name(),
            p.id
        )));
    }
    Ok(LocalUpdate {
        params,
        mean_loss: (steps > 0).then(|| loss_sum / steps as f64),
    })
}

pub fn local_train_supervised(
    bundle: &ModelBundle,
    global: &ParameterMap,
    p: &ParticipantState,
    data: &LocalData,
    settings: &TrainSettings,
    round: usize,
) -> Result<LocalUpdate> {
    if !bundle.is_supervised() {
        return Err(Error::Internal("supervised training needs a classifier".into()));
    }
    local_train(bundle, global, p, data, settings, round)
}

pub fn local_train_contrastive(
    bundle: &ModelBundle,
    global: &ParameterMap,
    p: &ParticipantState,
    data: &LocalData,
    settings: &TrainSettings,
    round: usize,
) -> Result<LocalUpdate> {
    if bundle.kind != ModelKind::Contrastive {
        return Err(Error::Internal("contrastive training needs the contrastive model".into()));
    }
    local_train(bundle, global, p, data, settings, round)
}
