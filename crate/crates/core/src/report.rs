//! Experiment results: per-round curves, final test metrics and confusion
//! matrices, per seed and averaged over seeds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::metrics::{normalize, ConfusionMatrix, NormalizedConfusion};

/// Metrics recorded after one global round, keyed `"{group}.{metric}"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub values: BTreeMap<String, f64>,
}

impl EpochRecord {
    pub fn new(epoch: usize) -> Self {
        EpochRecord {
            epoch,
            values: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, series: String, value: f64) {
        self.values.insert(series, value);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    /// Series name to one value per global epoch.
    pub curves: BTreeMap<String, Vec<f64>>,
    /// Final test accuracy per supervised modality.
    pub test_accuracy: BTreeMap<String, f64>,
    pub test_loss: BTreeMap<String, f64>,
    pub confusion: BTreeMap<String, ConfusionMatrix>,
    pub aggregation_calls: usize,
}

impl SeedReport {
    pub fn curves_from_history(history: &[EpochRecord]) -> BTreeMap<String, Vec<f64>> {
        let mut curves: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for record in history {
            for (k, &v) in &record.values {
                curves.entry(k.clone()).or_default().push(v);
            }
        }
        curves
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub regime: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedReport>,
    /// Element-wise mean over seeds of every curve.
    pub mean_curves: BTreeMap<String, Vec<f64>>,
    pub mean_test_accuracy: BTreeMap<String, f64>,
    /// Raw counts summed over seeds.
    pub confusion: BTreeMap<String, ConfusionMatrix>,
    pub normalized_confusion: BTreeMap<String, NormalizedConfusion>,
    /// `|federated − centralized|` accuracy per modality, when a reference
    /// centralized report was supplied.
    #[serde(default)]
    pub delta_gaps: BTreeMap<String, f64>,
    pub aggregation_calls: usize,
    /// Excluded from reproducibility comparisons.
    #[serde(default)]
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn from_seeds(config: ExperimentConfig, seeds: Vec<SeedReport>) -> Result<Self> {
        if seeds.is_empty() {
            return Err(Error::Internal("report needs at least one seed".into()));
        }
        let n = seeds.len() as f64;
        let mut mean_curves: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for s in &seeds {
            for (k, v) in &s.curves {
                let slot = mean_curves.entry(k.clone()).or_insert_with(|| vec![0.0; v.len()]);
                for (acc, x) in slot.iter_mut().zip(v) {
                    *acc += x / n;
                }
            }
        }
        let mut mean_test_accuracy: BTreeMap<String, f64> = BTreeMap::new();
        for s in &seeds {
            for (k, v) in &s.test_accuracy {
                *mean_test_accuracy.entry(k.clone()).or_default() += v / n;
            }
        }
        let mut confusion: BTreeMap<String, ConfusionMatrix> = BTreeMap::new();
        for s in &seeds {
            for (k, cm) in &s.confusion {
                let total = confusion.entry(k.clone()).or_insert_with(|| ConfusionMatrix {
                    counts: vec![vec![0; cm.classes()]; cm.classes()],
                });
                for (row, add) in total.counts.iter_mut().zip(&cm.counts) {
                    for (a, b) in row.iter_mut().zip(add) {
                        *a += b;
                    }
                }
            }
        }
        let normalized_confusion = confusion.iter().map(|(k, cm)| (k.clone(), normalize(cm))).collect();
        Ok(ExperimentReport {
            regime: config.regime.name().to_string(),
            aggregation_calls: seeds.iter().map(|s| s.aggregation_calls).sum(),
            config,
            seeds,
            mean_curves,
            mean_test_accuracy,
            confusion,
            normalized_confusion,
            delta_gaps: BTreeMap::new(),
            wall_clock_seconds: 0.0,
        })
    }

    /// Fills `delta_gaps` against a centralized reference report.
    pub fn set_reference(&mut self, centralized: &ExperimentReport) {
        self.delta_gaps = self
            .mean_test_accuracy
            .iter()
            .filter_map(|(k, &a)| {
                centralized
                    .mean_test_accuracy
                    .get(k)
                    .map(|&c| (k.clone(), crate::metrics::delta_gap(a, c)))
            })
            .collect();
    }
}
