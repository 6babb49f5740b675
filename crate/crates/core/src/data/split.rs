use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::MultimodalDataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.8,
            val: 0.1,
            test: 0.1,
            seed: 7,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| f.is_nan() || *f < 0.0) || self.train <= 0.0 {
            return Err(Error::config("split fractions must be non-negative, train positive"));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config("split fractions must sum to 1"));
        }
        Ok(())
    }
}

/// Sorted sample indices of each part.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn datasets(&self, data: &MultimodalDataset) -> (MultimodalDataset, MultimodalDataset, MultimodalDataset) {
        (
            data.subset(&self.train),
            data.subset(&self.val),
            data.subset(&self.test),
        )
    }
}

/// Label-stratified split: each class is shuffled and cut independently, with
/// val and test sizes rounded per class and train taking the remainder.
pub fn split(data: &MultimodalDataset, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut by_class = vec![Vec::new(); data.class_count()];
    for (i, &l) in data.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    let mut out = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (class, mut members) in by_class.into_iter().enumerate() {
        let mut rng = rng::stream(spec.seed, &[class as u64]);
        members.shuffle(&mut rng);
        let n = members.len();
        let n_val = ((n as f64) * spec.val).round() as usize;
        let n_test = (((n as f64) * spec.test).round() as usize).min(n - n_val.min(n));
        let n_val = n_val.min(n);
        out.val.extend_from_slice(&members[..n_val]);
        out.test.extend_from_slice(&members[n_val..n_val + n_test]);
        out.train.extend_from_slice(&members[n_val + n_test..]);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}
