//! Multimodal datasets: synthetic generation, CSV ingestion, stratified
//! splitting and participant partitioning.

mod csv;
mod partition;
mod split;
mod synthetic;

pub use self::csv::{load_csv_features, CsvSources};
pub use partition::{
    composition, partition_balanced, partition_unbalanced_paired, partition_unbalanced_random,
    Partition,
};
pub use split::{split, Split, SplitSpec};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Aligned image and audio views with class labels; row `i` of every field
/// describes the same underlying sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalDataset {
    images: Tensor,
    audios: Tensor,
    labels: Vec<usize>,
    class_count: usize,
}

impl MultimodalDataset {
    pub fn new(images: Tensor, audios: Tensor, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if images.shape().len() != 2 || audios.shape().len() != 2 {
            return Err(Error::Internal("dataset views must be matrices".into()));
        }
        for (name, n) in [("image", images.rows()), ("audio", audios.rows())] {
            if n != labels.len() {
                return Err(Error::Alignment {
                    left_name: name.into(),
                    left: n,
                    right_name: "labels".into(),
                    right: labels.len(),
                });
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::config(format!("label {bad} outside 0..{class_count}")));
        }
        Ok(MultimodalDataset {
            images,
            audios,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn images(&self) -> &Tensor {
        &self.images
    }

    pub fn audios(&self) -> &Tensor {
        &self.audios
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn image_dim(&self) -> usize {
        self.images.cols()
    }

    pub fn audio_dim(&self) -> usize {
        self.audios.cols()
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.class_count];
        for &l in &self.labels {
            h[l] += 1;
        }
        h
    }

    /// Fails unless every class occurs at least once.
    pub fn check_all_classes_present(&self) -> Result<()> {
        match self.class_histogram().iter().position(|&c| c == 0) {
            Some(c) => Err(Error::config(format!("class {c} has no samples"))),
            None => Ok(()),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> MultimodalDataset {
        MultimodalDataset {
            images: self.images.select_rows(indices),
            audios: self.audios.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
        }
    }
}
