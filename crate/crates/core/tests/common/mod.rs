//! Oracles shared by the gradient tests and the acceptance suite.
#![allow(dead_code)]

use fedtransfer::nn::{init_layers, Activation, LayerSpec};
use fedtransfer::{ParameterMap, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-6;
pub const TOL: f64 = 1e-4;

pub fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::new(vec![rows, cols], data).unwrap()
}

pub fn random_net(rng: &mut ChaCha8Rng, input: usize, output: usize, last: Activation) -> Vec<LayerSpec> {
    let depth = rng.random_range(1..=4);
    let mut dims = vec![input];
    for _ in 1..depth {
        dims.push(rng.random_range(2..=16));
    }
    dims.push(output);
    (0..depth)
        .map(|i| {
            let act = if i + 1 == depth {
                last
            } else {
                match rng.random_range(0..3) {
                    0 => Activation::Relu,
                    1 => Activation::LeakyRelu(0.01),
                    _ => Activation::Identity,
                }
            };
            LayerSpec::dense(dims[i], dims[i + 1], act, format!("net.{i}"))
        })
        .collect()
}

/// Initial params with random biases. Zero biases behind a dead ReLU layer
/// would put every downstream unit exactly on a kink.
pub fn random_params(layers: &[LayerSpec], seed: u64, rng: &mut ChaCha8Rng) -> ParameterMap {
    let mut params = init_layers(layers, seed).unwrap();
    for layer in layers {
        for b in params.get_mut(&layer.bias_key()).unwrap().data_mut() {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    params
}

pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale = analytic
        .iter()
        .map(|a| a * a)
        .sum::<f64>()
        .sqrt()
        .max(numeric.iter().map(|n| n * n).sum::<f64>().sqrt());
    if scale < 1e-9 {
        diff
    } else {
        diff / scale
    }
}

/// Central differences of `loss` with respect to every parameter element.
pub fn numeric_grads(params: &ParameterMap, loss: impl Fn(&ParameterMap) -> f64) -> ParameterMap {
    let mut out = params.zeros_like();
    let mut probe = params.clone();
    let keys: Vec<String> = params.keys().map(String::from).collect();
    for key in keys {
        let n = params.get(&key).unwrap().data().len();
        for j in 0..n {
            let base = params.get(&key).unwrap().data()[j];
            probe.get_mut(&key).unwrap().data_mut()[j] = base + H;
            let up = loss(&probe);
            probe.get_mut(&key).unwrap().data_mut()[j] = base - H;
            let down = loss(&probe);
            probe.get_mut(&key).unwrap().data_mut()[j] = base;
            out.get_mut(&key).unwrap().data_mut()[j] = (up - down) / (2.0 * H);
        }
    }
    out
}

/// Direct transcription of NT-Xent over the interleaved views.
pub fn ntxent_reference(zi: &Tensor, za: &Tensor, tau: f64) -> f64 {
    let b = zi.rows();
    let views: Vec<&[f64]> = (0..2 * b).map(|k| if k % 2 == 0 { zi.row(k / 2) } else { za.row(k / 2) }).collect();
    let cos = |u: &[f64], v: &[f64]| {
        let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
        let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        dot / (nu * nv)
    };
    let mut total = 0.0;
    for k in 0..2 * b {
        let positive = k ^ 1;
        let numerator = (cos(views[k], views[positive]) / tau).exp();
        let denominator: f64 = (0..2 * b).filter(|&j| j != k).map(|j| (cos(views[k], views[j]) / tau).exp()).sum();
        total += -(numerator / denominator).ln();
    }
    total / (2 * b) as f64
}
