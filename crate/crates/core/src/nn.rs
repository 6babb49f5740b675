//! Minimal dense network engine: Glorot-initialized layers, a forward pass
//! that records a tape, analytic backpropagation and plain SGD.

use rand::distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::params::ParameterMap;
use crate::rng;
use crate::tensor::{gemm, Tensor};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Softmax,
    Identity,
}

impl Activation {
    fn apply(self, pre: &Tensor) -> Tensor {
        match self {
            Activation::Relu => pre.map(|v| v.max(0.0)),
            Activation::LeakyRelu(slope) => pre.map(|v| if v > 0.0 { v } else { slope * v }),
            Activation::Softmax => softmax(pre),
            Activation::Identity => pre.clone(),
        }
    }

    /// Pulls `grad` (w.r.t. the activation output) back to the pre-activation.
    fn backward(self, pre: &Tensor, out: &Tensor, grad: &Tensor) -> Tensor {
        match self {
            Activation::Relu => pre
                .zip_map(grad, |p, g| if p > 0.0 { g } else { 0.0 })
                .expect("tape shapes"),
            Activation::LeakyRelu(slope) => pre
                .zip_map(grad, |p, g| if p > 0.0 { g } else { slope * g })
                .expect("tape shapes"),
            Activation::Softmax => {
                // dz_j = s_j (g_j - Σ_k g_k s_k)
                let mut dz = grad.clone();
                for i in 0..out.rows() {
                    let s = out.row(i);
                    let dot: f64 = s.iter().zip(grad.row(i)).map(|(a, b)| a * b).sum();
                    for (d, &sj) in dz.row_mut(i).iter_mut().zip(s) {
                        *d = sj * (*d - dot);
                    }
                }
                dz
            }
            Activation::Identity => grad.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// Parameters live at `{prefix}.weight` (`[in_dim, out_dim]`) and `{prefix}.bias`.
    pub prefix: String,
}

impl LayerSpec {
    pub fn dense(in_dim: usize, out_dim: usize, activation: Activation, prefix: impl Into<String>) -> Self {
        LayerSpec {
            in_dim,
            out_dim,
            activation,
            prefix: prefix.into(),
        }
    }

    pub fn weight_key(&self) -> String {
        format!("{}.weight", self.prefix)
    }

    pub fn bias_key(&self) -> String {
        format!("{}.bias", self.prefix)
    }
}

/// Checks that consecutive layers chain and that activation settings are valid.
pub fn validate_layers(layers: &[LayerSpec]) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::config("network needs at least one layer"));
    }
    for layer in layers {
        if layer.in_dim == 0 || layer.out_dim == 0 {
            return Err(Error::config(format!("layer `{}` has a zero dimension", layer.prefix)));
        }
        if let Activation::LeakyRelu(slope) = layer.activation {
            if !(slope > 0.0 && slope < 1.0) {
                return Err(Error::config(format!("leaky-relu slope {slope} outside (0, 1)")));
            }
        }
    }
    for pair in layers.windows(2) {
        if pair[0].out_dim != pair[1].in_dim {
            return Err(Error::config(format!(
                "layer `{}` outputs {} but `{}` expects {}",
                pair[0].prefix, pair[0].out_dim, pair[1].prefix, pair[1].in_dim
            )));
        }
    }
    Ok(())
}

/// Glorot-uniform weights and zero biases. Each layer draws from a stream
/// keyed by its prefix, so a layer gets the same initial values in every
/// model that contains it.
pub fn init_layers(layers: &[LayerSpec], seed: u64) -> Result<ParameterMap> {
    validate_layers(layers)?;
    let mut params = ParameterMap::new();
    for layer in layers {
        let bound = (6.0 / (layer.in_dim + layer.out_dim) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let mut rng = rng::stream(seed, &[rng::hash_str(&layer.prefix)]);
        let weights = (0..layer.in_dim * layer.out_dim)
            .map(|_| dist.sample(&mut rng))
            .collect();
        params.insert(
            layer.weight_key(),
            Tensor::new(vec![layer.in_dim, layer.out_dim], weights)?,
        );
        params.insert(layer.bias_key(), Tensor::zeros(&[layer.out_dim]));
    }
    Ok(params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<LayerSpec>,
    pub params: ParameterMap,
}

pub fn init_network(layers: Vec<LayerSpec>, seed: u64) -> Result<Network> {
    let params = init_layers(&layers, seed)?;
    Ok(Network { layers, params })
}

#[derive(Debug, Clone)]
struct LayerRecord {
    input: Tensor,
    pre: Tensor,
    output: Tensor,
}

/// Activations recorded by [`forward`] for use by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardTape {
    records: Vec<LayerRecord>,
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: ParameterMap,
    /// dLoss/dInput, for chaining into upstream towers.
    pub input: Tensor,
}

impl Network {
    pub fn forward(&self, batch: &Tensor) -> Result<(Tensor, ForwardTape)> {
        forward(&self.layers, &self.params, batch)
    }

    pub fn backward(&self, tape: &ForwardTape, output_grad: &Tensor) -> Result<Gradients> {
        backward(&self.layers, &self.params, tape, output_grad)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }
}

pub fn forward(layers: &[LayerSpec], params: &ParameterMap, batch: &Tensor) -> Result<(Tensor, ForwardTape)> {
    let first = layers
        .first()
        .ok_or_else(|| Error::config("network needs at least one layer"))?;
    if batch.shape().len() != 2 || batch.cols() != first.in_dim {
        return Err(Error::Shape {
            context: "forward input",
            expected: vec![batch.rows(), first.in_dim],
            actual: batch.shape().to_vec(),
        });
    }
    let mut records = Vec::with_capacity(layers.len());
    let mut current = batch.clone();
    for layer in layers {
        let w = params.require(&layer.weight_key())?;
        let b = params.require(&layer.bias_key())?;
        w.expect_shape(&[layer.in_dim, layer.out_dim], "layer weight")?;
        b.expect_shape(&[layer.out_dim], "layer bias")?;
        let mut pre = gemm(&current, false, w, false);
        for i in 0..pre.rows() {
            for (p, &bias) in pre.row_mut(i).iter_mut().zip(b.data()) {
                *p += bias;
            }
        }
        let output = layer.activation.apply(&pre);
        records.push(LayerRecord {
            input: current,
            pre,
            output: output.clone(),
        });
        current = output;
    }
    Ok((current, ForwardTape { records }))
}

pub fn backward(
    layers: &[LayerSpec],
    params: &ParameterMap,
    tape: &ForwardTape,
    output_grad: &Tensor,
) -> Result<Gradients> {
    if tape.records.len() != layers.len() {
        return Err(Error::Internal(format!(
            "tape has {} layers, network has {}",
            tape.records.len(),
            layers.len()
        )));
    }
    let last = tape.records.last().expect("non-empty tape");
    output_grad.expect_shape(last.output.shape(), "backward output gradient")?;

    let mut grads = ParameterMap::new();
    let mut grad = output_grad.clone();
    for (layer, record) in layers.iter().zip(&tape.records).rev() {
        if record.pre.cols() != layer.out_dim || record.input.cols() != layer.in_dim {
            return Err(Error::Internal(format!(
                "tape does not match layer `{}`",
                layer.prefix
            )));
        }
        let dpre = layer.activation.backward(&record.pre, &record.output, &grad);
        let dw = gemm(&record.input, true, &dpre, false);
        let mut db = vec![0.0; layer.out_dim];
        for i in 0..dpre.rows() {
            for (acc, &g) in db.iter_mut().zip(dpre.row(i)) {
                *acc += g;
            }
        }
        let w = params.require(&layer.weight_key())?;
        grad = gemm(&dpre, false, w, true);
        grads.insert(layer.weight_key(), dw);
        grads.insert(layer.bias_key(), Tensor::vector(db));
    }
    Ok(Gradients {
        params: grads,
        input: grad,
    })
}

/// `params - lr * grads`, key by key.
pub fn sgd_step(params: &ParameterMap, grads: &ParameterMap, lr: f64) -> Result<ParameterMap> {
    params.check_compatible(grads)?;
    Ok(params
        .iter()
        .map(|(k, p)| {
            let g = grads.get(k).expect("checked compatible");
            (
                k.to_string(),
                p.zip_map(g, |p, g| p - lr * g).expect("checked compatible"),
            )
        })
        .collect())
}

/// Row-wise softmax with max subtraction. A 1-D input is treated as one row.
pub fn softmax(logits: &Tensor) -> Tensor {
    let mut out = logits.clone();
    let width = logits.shape().last().copied().unwrap_or(1);
    for row in out.data_mut().chunks_mut(width) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}
