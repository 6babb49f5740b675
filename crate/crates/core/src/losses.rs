//! Cross-entropy for the supervised groups and the cosine-similarity
//! NT-Xent objective for the multimodal group.

use crate::error::{Error, Result};
use crate::nn::softmax;
use crate::tensor::Tensor;

pub const DEFAULT_TEMPERATURE: f64 = 0.5;
const LOG_FLOOR: f64 = 1e-12;

/// Row-per-sample one-hot targets.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotBatch {
    labels: Tensor,
}

impl OneHotBatch {
    pub fn from_labels(labels: &[usize], classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut t = Tensor::zeros(&[labels.len(), classes]);
        for (i, &c) in labels.iter().enumerate() {
            if c >= classes {
                return Err(Error::config(format!("label {c} outside 0..{classes}")));
            }
            t.row_mut(i)[c] = 1.0;
        }
        Ok(OneHotBatch { labels: t })
    }

    pub fn from_tensor(labels: Tensor) -> Result<Self> {
        if labels.shape().len() != 2 {
            return Err(Error::Shape {
                context: "one-hot targets",
                expected: vec![labels.rows(), labels.cols()],
                actual: labels.shape().to_vec(),
            });
        }
        for i in 0..labels.rows() {
            let row = labels.row(i);
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != row.len() {
                return Err(Error::config(format!("row {i} is not one-hot")));
            }
        }
        Ok(OneHotBatch { labels })
    }

    pub fn tensor(&self) -> &Tensor {
        &self.labels
    }
}

/// Mean cross-entropy of softmax outputs `probs` against `targets`, and the
/// gradient with respect to the pre-softmax logits, `(p - y) / B`.
pub fn cross_entropy(probs: &Tensor, targets: &OneHotBatch) -> Result<(f64, Tensor)> {
    let y = targets.tensor();
    probs.expect_shape(y.shape(), "cross_entropy")?;
    let batch = probs.rows() as f64;
    let loss = probs
        .data()
        .iter()
        .zip(y.data())
        .filter(|(_, &t)| t != 0.0)
        .map(|(&p, &t)| -t * p.max(LOG_FLOOR).ln())
        .sum::<f64>()
        / batch;
    let grad = probs.zip_map(y, |p, t| (p - t) / batch)?;
    Ok((loss, grad))
}

/// Softmax followed by [`cross_entropy`].
pub fn softmax_cross_entropy(logits: &Tensor, targets: &OneHotBatch) -> Result<(f64, Tensor)> {
    cross_entropy(&softmax(logits), targets)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cosine {
    pub value: f64,
    /// Set when a zero-norm vector made the similarity undefined; `value` is 0.
    pub degenerate: bool,
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<Cosine> {
    if u.is_empty() || u.len() != v.len() {
        return Err(Error::Shape {
            context: "cosine_similarity",
            expected: vec![u.len()],
            actual: vec![v.len()],
        });
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Ok(Cosine {
            value: 0.0,
            degenerate: true,
        });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok(Cosine {
        value: (dot / (nu * nv)).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Paired embeddings of the two modalities for one batch.
#[derive(Debug, Clone)]
pub struct ContrastiveBatch<'a> {
    pub z_img: &'a Tensor,
    pub z_aud: &'a Tensor,
    pub temperature: f64,
}

#[derive(Debug, Clone)]
pub struct ContrastiveOutput {
    pub loss: f64,
    pub grad_img: Tensor,
    pub grad_aud: Tensor,
}

/// NT-Xent over the `2B` views interleaved as `img_1, aud_1, img_2, aud_2, …`.
///
/// Each view is an anchor whose positive is its partner from the other
/// modality; the denominator runs over all `2B - 1` other views. The result is
/// the mean over all `2B` anchors.
pub fn ntxent_loss(batch: &ContrastiveBatch<'_>) -> Result<ContrastiveOutput> {
    let (zi, za, tau) = (batch.z_img, batch.z_aud, batch.temperature);
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::config(format!("temperature must be positive, got {tau}")));
    }
    if zi.shape().len() != 2 || zi.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    za.expect_shape(zi.shape(), "ntxent_loss")?;
    let b = zi.rows();
    let d = zi.cols();
    let views = 2 * b;

    let raw: Vec<&[f64]> = (0..views)
        .map(|v| if v % 2 == 0 { zi.row(v / 2) } else { za.row(v / 2) })
        .collect();
    let norms: Vec<f64> = raw.iter().map(|r| norm(r)).collect();
    let unit: Vec<Vec<f64>> = raw
        .iter()
        .zip(&norms)
        .map(|(r, &n)| {
            if n == 0.0 {
                vec![0.0; d]
            } else {
                r.iter().map(|x| x / n).collect()
            }
        })
        .collect();

    let mut sim = vec![0.0; views * views];
    for a in 0..views {
        for w in a..views {
            let s: f64 = unit[a].iter().zip(&unit[w]).map(|(x, y)| x * y).sum();
            sim[a * views + w] = s;
            sim[w * views + a] = s;
        }
    }

    // dL/dsim, accumulated per anchor row.
    let mut dsim = vec![0.0; views * views];
    let mut loss = 0.0;
    let scale = 1.0 / views as f64;
    for a in 0..views {
        let pos = a ^ 1;
        let row = &sim[a * views..(a + 1) * views];
        let max = row
            .iter()
            .enumerate()
            .filter(|&(w, _)| w != a)
            .map(|(_, &s)| s / tau)
            .fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = row
            .iter()
            .enumerate()
            .filter(|&(w, _)| w != a)
            .map(|(_, &s)| (s / tau - max).exp())
            .sum();
        let lse = max + total.ln();
        loss += lse - row[pos] / tau;
        for w in (0..views).filter(|&w| w != a) {
            let p = (row[w] / tau - max).exp() / total;
            let indicator = if w == pos { 1.0 } else { 0.0 };
            dsim[a * views + w] = scale * (p - indicator) / tau;
        }
    }
    loss *= scale;

    let mut grad_img = Tensor::zeros(&[b, d]);
    let mut grad_aud = Tensor::zeros(&[b, d]);
    for a in 0..views {
        if norms[a] == 0.0 {
            continue;
        }
        // sim is symmetric, so a contributes through both dsim[a][w] and dsim[w][a].
        let mut dunit = vec![0.0; d];
        for w in 0..views {
            let g = dsim[a * views + w] + dsim[w * views + a];
            if g != 0.0 {
                for (acc, &u) in dunit.iter_mut().zip(&unit[w]) {
                    *acc += g * u;
                }
            }
        }
        let radial: f64 = dunit.iter().zip(&unit[a]).map(|(g, u)| g * u).sum();
        let target = if a % 2 == 0 {
            grad_img.row_mut(a / 2)
        } else {
            grad_aud.row_mut(a / 2)
        };
        for ((out, &g), &u) in target.iter_mut().zip(&dunit).zip(&unit[a]) {
            *out = (g - radial * u) / norms[a];
        }
    }

    Ok(ContrastiveOutput {
        loss,
        grad_img,
        grad_aud,
    })
}
