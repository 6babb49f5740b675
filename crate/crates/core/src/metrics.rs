//! Accuracy, confusion matrices and the federated-vs-centralized gap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    check_lengths(predictions, labels)?;
    if labels.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / labels.len() as f64)
}

fn check_lengths(predictions: &[usize], labels: &[usize]) -> Result<()> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape {
            context: "predictions vs labels",
            expected: vec![labels.len()],
            actual: vec![predictions.len()],
        });
    }
    Ok(())
}

/// Rows are actual classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }
}

pub fn confusion(predictions: &[usize], labels: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    check_lengths(predictions, labels)?;
    let mut counts = vec![vec![0u64; classes]; classes];
    for (&p, &l) in predictions.iter().zip(labels) {
        if p >= classes || l >= classes {
            return Err(Error::config(format!("class id outside 0..{classes}")));
        }
        counts[l][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedConfusion {
    pub rates: Vec<Vec<f64>>,
    /// Classes with no evaluated samples; their rows are all zero.
    pub empty_rows: Vec<usize>,
}

pub fn normalize(cm: &ConfusionMatrix) -> NormalizedConfusion {
    let mut empty_rows = Vec::new();
    let rates = cm
        .counts
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let total: u64 = row.iter().sum();
            if total == 0 {
                empty_rows.push(i);
                vec![0.0; row.len()]
            } else {
                row.iter().map(|&c| c as f64 / total as f64).collect()
            }
        })
        .collect();
    NormalizedConfusion { rates, empty_rows }
}

/// Absolute accuracy gap between a federated and a centralized model.
pub fn delta_gap(a_fed: f64, a_central: f64) -> f64 {
    (a_fed - a_central).abs()
}
