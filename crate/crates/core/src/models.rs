//! The four model topologies. All of them share one key-naming contract:
//! an image tower lives under `img.enc`/`img.proj` and an audio tower under
//! `aud.enc`/`aud.proj` in every model that has one, so the server can find
//! the common sub-network of two models by intersecting their key sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{ntxent_loss, softmax_cross_entropy, ContrastiveBatch, OneHotBatch};
use crate::nn::{self, Activation, LayerSpec, DEFAULT_LEAKY_SLOPE};
use crate::params::{has_prefix, ParameterMap};
use crate::tensor::Tensor;

pub const IMAGE_ENCODER: &str = "img.enc";
pub const IMAGE_PROJECTOR: &str = "img.proj";
pub const IMAGE_OUTPUT: &str = "img.out";
pub const AUDIO_ENCODER: &str = "aud.enc";
pub const AUDIO_PROJECTOR: &str = "aud.proj";
pub const AUDIO_OUTPUT: &str = "aud.out";
pub const FUSION_OUTPUT: &str = "fus.out";

// Full-size widths; `ModelConfig::scale` shrinks them.
const IMAGE_ENCODER_WIDTHS: [usize; 3] = [512, 256, 128];
const AUDIO_ENCODER_WIDTHS: [usize; 3] = [104, 977, 365];
const PROJECTOR_WIDTHS: [usize; 2] = [703, 41];
const MIN_WIDTH: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub image_dim: usize,
    pub audio_dim: usize,
    pub class_count: usize,
    pub scale: f64,
    pub leaky_slope: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            image_dim: 64,
            audio_dim: 40,
            class_count: 9,
            scale: 0.25,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_dim == 0 || self.audio_dim == 0 {
            return Err(Error::config("input dimensions must be positive"));
        }
        if self.class_count < 2 {
            return Err(Error::config("class_count must be at least 2"));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::config(format!("scale must be positive, got {}", self.scale)));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::config("leaky_slope must lie in (0, 1)"));
        }
        for w in IMAGE_ENCODER_WIDTHS
            .iter()
            .chain(&AUDIO_ENCODER_WIDTHS)
            .chain(&PROJECTOR_WIDTHS)
        {
            self.width(*w)?;
        }
        Ok(())
    }

    /// `floor(full * scale)`; widths below 4 are rejected.
    pub fn width(&self, full: usize) -> Result<usize> {
        let w = (full as f64 * self.scale).floor() as usize;
        if w < MIN_WIDTH {
            return Err(Error::config(format!(
                "scale {} shrinks a {full}-wide layer to {w} (< {MIN_WIDTH})",
                self.scale
            )));
        }
        Ok(w)
    }

    /// Width of the projector output, shared by both towers.
    pub fn embed_dim(&self) -> Result<usize> {
        self.width(PROJECTOR_WIDTHS[1])
    }

    fn image_tower(&self) -> Result<Vec<LayerSpec>> {
        let act = Activation::LeakyRelu(self.leaky_slope);
        tower(self, self.image_dim, &IMAGE_ENCODER_WIDTHS, IMAGE_ENCODER, IMAGE_PROJECTOR, act)
    }

    fn audio_tower(&self) -> Result<Vec<LayerSpec>> {
        tower(self, self.audio_dim, &AUDIO_ENCODER_WIDTHS, AUDIO_ENCODER, AUDIO_PROJECTOR, Activation::Relu)
    }
}

fn tower(
    cfg: &ModelConfig,
    input: usize,
    encoder: &[usize],
    enc_prefix: &str,
    proj_prefix: &str,
    act: Activation,
) -> Result<Vec<LayerSpec>> {
    let mut layers = Vec::new();
    let mut prev = input;
    for (i, &w) in encoder.iter().enumerate() {
        let w = cfg.width(w)?;
        layers.push(LayerSpec::dense(prev, w, act, format!("{enc_prefix}.{i}")));
        prev = w;
    }
    for (i, &w) in PROJECTOR_WIDTHS.iter().enumerate() {
        let w = cfg.width(w)?;
        layers.push(LayerSpec::dense(prev, w, act, format!("{proj_prefix}.{i}")));
        prev = w;
    }
    Ok(layers)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    ImageClassifier,
    AudioClassifier,
    LateFusion,
    Contrastive,
}

/// Names of the sub-networks inside a bundle.
pub const IMAGE_TOWER: &str = "image";
pub const AUDIO_TOWER: &str = "audio";
pub const OUTPUT_HEAD: &str = "output";

/// Which modality views a forward pass receives.
#[derive(Debug, Clone, Copy, Default)]
pub struct Inputs<'a> {
    pub image: Option<&'a Tensor>,
    pub audio: Option<&'a Tensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub kind: ModelKind,
    pub networks: Vec<(String, Vec<LayerSpec>)>,
    pub params: ParameterMap,
    pub shared_prefixes: Vec<String>,
    pub class_count: usize,
}

impl ModelBundle {
    fn assemble(
        kind: ModelKind,
        cfg: &ModelConfig,
        networks: Vec<(String, Vec<LayerSpec>)>,
        shared: &[&str],
        seed: u64,
    ) -> Result<Self> {
        let mut params = ParameterMap::new();
        for (_, layers) in &networks {
            params.merge(nn::init_layers(layers, seed)?)?;
        }
        Ok(ModelBundle {
            kind,
            networks,
            params,
            shared_prefixes: shared.iter().map(|s| s.to_string()).collect(),
            class_count: cfg.class_count,
        })
    }

    pub fn network(&self, name: &str) -> Option<&[LayerSpec]> {
        self.networks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, l)| l.as_slice())
    }

    fn require_network(&self, name: &str) -> Result<&[LayerSpec]> {
        self.network(name)
            .ok_or_else(|| Error::Internal(format!("{:?} has no `{name}` network", self.kind)))
    }

    /// Parameter keys under any of the shared prefixes.
    pub fn shared_parameter_keys(&self) -> Vec<String> {
        self.params
            .keys()
            .filter(|k| self.shared_prefixes.iter().any(|p| has_prefix(k, p)))
            .map(str::to_string)
            .collect()
    }

    pub fn is_supervised(&self) -> bool {
        self.kind != ModelKind::Contrastive
    }

    pub fn needs_image(&self) -> bool {
        self.kind != ModelKind::AudioClassifier
    }

    pub fn needs_audio(&self) -> bool {
        self.kind != ModelKind::ImageClassifier
    }

    /// Class logits for the supervised kinds.
    pub fn logits(&self, params: &ParameterMap, inputs: Inputs<'_>) -> Result<Tensor> {
        Ok(self.supervised_forward(params, inputs)?.logits)
    }

    /// Class probabilities for the supervised kinds.
    pub fn predict_proba(&self, params: &ParameterMap, inputs: Inputs<'_>) -> Result<Tensor> {
        Ok(nn::softmax(&self.logits(params, inputs)?))
    }

    fn supervised_forward(&self, params: &ParameterMap, inputs: Inputs<'_>) -> Result<SupervisedPass> {
        let head = self.require_network(OUTPUT_HEAD)?;
        let mut towers = Vec::new();
        let features = match self.kind {
            ModelKind::ImageClassifier => {
                let (r, tape) = nn::forward(self.require_network(IMAGE_TOWER)?, params, need(inputs.image, "image")?)?;
                towers.push((IMAGE_TOWER, tape, r.cols()));
                r
            }
            ModelKind::AudioClassifier => {
                let (r, tape) = nn::forward(self.require_network(AUDIO_TOWER)?, params, need(inputs.audio, "audio")?)?;
                towers.push((AUDIO_TOWER, tape, r.cols()));
                r
            }
            ModelKind::LateFusion => {
                let (ri, ti) = nn::forward(self.require_network(IMAGE_TOWER)?, params, need(inputs.image, "image")?)?;
                let (ra, ta) = nn::forward(self.require_network(AUDIO_TOWER)?, params, need(inputs.audio, "audio")?)?;
                towers.push((IMAGE_TOWER, ti, ri.cols()));
                towers.push((AUDIO_TOWER, ta, ra.cols()));
                ri.concat_cols(&ra)?
            }
            ModelKind::Contrastive => {
                return Err(Error::Internal("contrastive model has no classifier head".into()))
            }
        };
        let (logits, head_tape) = nn::forward(head, params, &features)?;
        Ok(SupervisedPass {
            logits,
            head_tape,
            towers,
        })
    }

    /// Mean cross-entropy on a labelled batch and its parameter gradients.
    pub fn supervised_grads(
        &self,
        params: &ParameterMap,
        inputs: Inputs<'_>,
        labels: &[usize],
    ) -> Result<(f64, ParameterMap)> {
        let pass = self.supervised_forward(params, inputs)?;
        let targets = OneHotBatch::from_labels(labels, self.class_count)?;
        let (loss, dlogits) = softmax_cross_entropy(&pass.logits, &targets)?;
        let head = nn::backward(self.require_network(OUTPUT_HEAD)?, params, &pass.head_tape, &dlogits)?;
        let mut grads = head.params;
        let mut dfeatures = head.input;
        for (name, tape, width) in &pass.towers {
            let (mine, rest) = dfeatures.split_cols(*width);
            let g = nn::backward(self.require_network(name)?, params, tape, &mine)?;
            grads.merge(g.params)?;
            dfeatures = rest;
        }
        Ok((loss, grads))
    }

    /// Projected embeddings `(z_img, z_aud)` of the contrastive model.
    pub fn embed(&self, params: &ParameterMap, image: &Tensor, audio: &Tensor) -> Result<(Tensor, Tensor)> {
        let (zi, _) = nn::forward(self.require_network(IMAGE_TOWER)?, params, image)?;
        let (za, _) = nn::forward(self.require_network(AUDIO_TOWER)?, params, audio)?;
        Ok((zi, za))
    }

    /// NT-Xent loss on a paired batch and its parameter gradients.
    pub fn contrastive_grads(
        &self,
        params: &ParameterMap,
        image: &Tensor,
        audio: &Tensor,
        temperature: f64,
    ) -> Result<(f64, ParameterMap)> {
        if self.kind != ModelKind::Contrastive {
            return Err(Error::Internal(format!("{:?} is not contrastive", self.kind)));
        }
        let img_net = self.require_network(IMAGE_TOWER)?;
        let aud_net = self.require_network(AUDIO_TOWER)?;
        let (zi, ti) = nn::forward(img_net, params, image)?;
        let (za, ta) = nn::forward(aud_net, params, audio)?;
        let out = ntxent_loss(&ContrastiveBatch {
            z_img: &zi,
            z_aud: &za,
            temperature,
        })?;
        let mut grads = nn::backward(img_net, params, &ti, &out.grad_img)?.params;
        grads.merge(nn::backward(aud_net, params, &ta, &out.grad_aud)?.params)?;
        Ok((out.loss, grads))
    }
}

struct SupervisedPass {
    logits: Tensor,
    head_tape: nn::ForwardTape,
    towers: Vec<(&'static str, nn::ForwardTape, usize)>,
}

fn need<'a>(t: Option<&'a Tensor>, what: &str) -> Result<&'a Tensor> {
    t.ok_or_else(|| Error::Internal(format!("missing {what} input")))
}

fn output_layer(in_dim: usize, cfg: &ModelConfig, prefix: &str) -> Vec<LayerSpec> {
    vec![LayerSpec::dense(in_dim, cfg.class_count, Activation::Identity, prefix)]
}

pub fn build_image_classifier(cfg: &ModelConfig, seed: u64) -> Result<ModelBundle> {
    cfg.validate()?;
    let towers = vec![
        (IMAGE_TOWER.to_string(), cfg.image_tower()?),
        (OUTPUT_HEAD.to_string(), output_layer(cfg.embed_dim()?, cfg, IMAGE_OUTPUT)),
    ];
    ModelBundle::assemble(ModelKind::ImageClassifier, cfg, towers, &[IMAGE_ENCODER, IMAGE_PROJECTOR], seed)
}

pub fn build_audio_classifier(cfg: &ModelConfig, seed: u64) -> Result<ModelBundle> {
    cfg.validate()?;
    let towers = vec![
        (AUDIO_TOWER.to_string(), cfg.audio_tower()?),
        (OUTPUT_HEAD.to_string(), output_layer(cfg.embed_dim()?, cfg, AUDIO_OUTPUT)),
    ];
    ModelBundle::assemble(ModelKind::AudioClassifier, cfg, towers, &[AUDIO_ENCODER, AUDIO_PROJECTOR], seed)
}

pub fn build_late_fusion(cfg: &ModelConfig, seed: u64) -> Result<ModelBundle> {
    cfg.validate()?;
    let towers = vec![
        (IMAGE_TOWER.to_string(), cfg.image_tower()?),
        (AUDIO_TOWER.to_string(), cfg.audio_tower()?),
        (OUTPUT_HEAD.to_string(), output_layer(2 * cfg.embed_dim()?, cfg, FUSION_OUTPUT)),
    ];
    ModelBundle::assemble(
        ModelKind::LateFusion,
        cfg,
        towers,
        &[IMAGE_ENCODER, IMAGE_PROJECTOR, AUDIO_ENCODER, AUDIO_PROJECTOR],
        seed,
    )
}

pub fn build_contrastive(cfg: &ModelConfig, seed: u64) -> Result<ModelBundle> {
    cfg.validate()?;
    let towers = vec![
        (IMAGE_TOWER.to_string(), cfg.image_tower()?),
        (AUDIO_TOWER.to_string(), cfg.audio_tower()?),
    ];
    ModelBundle::assemble(
        ModelKind::Contrastive,
        cfg,
        towers,
        &[IMAGE_ENCODER, IMAGE_PROJECTOR, AUDIO_ENCODER, AUDIO_PROJECTOR],
        seed,
    )
}

pub fn build(kind: ModelKind, cfg: &ModelConfig, seed: u64) -> Result<ModelBundle> {
    match kind {
        ModelKind::ImageClassifier => build_image_classifier(cfg, seed),
        ModelKind::AudioClassifier => build_audio_classifier(cfg, seed),
        ModelKind::LateFusion => build_late_fusion(cfg, seed),
        ModelKind::Contrastive => build_contrastive(cfg, seed),
    }
}

/// Sorted keys present in both maps. A key present in both with different
/// shapes is an error.
pub fn shared_keys(a: &ParameterMap, b: &ParameterMap) -> Result<Vec<String>> {
    let mut keys = Vec::new();
    for (k, ta) in a.iter() {
        if let Some(tb) = b.get(k) {
            if ta.shape() != tb.shape() {
                return Err(Error::Incompatible {
                    key: k.to_string(),
                    left: ta.shape().to_vec(),
                    right: tb.shape().to_vec(),
                });
            }
            keys.push(k.to_string());
        }
    }
    Ok(keys)
}
