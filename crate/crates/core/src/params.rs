//! Named parameter maps, the unit of model exchange between participants
//! and the server.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Ordered map from dotted parameter keys (`"img.enc.0.weight"`) to tensors.
/// Iteration is lexicographic by key.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterMap {
    entries: BTreeMap<String, Tensor>,
}

impl ParameterMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: impl Into<String>, value: Tensor) -> Option<Tensor> {
        self.entries.insert(key.into(), value)
    }

    pub fn get(&self, key: &str) -> Option<&Tensor> {
        self.entries.get(key)
    }

    pub fn get_mut(&mut self, key: &str) -> Option<&mut Tensor> {
        self.entries.get_mut(key)
    }

    pub fn require(&self, key: &str) -> Result<&Tensor> {
        self.get(key).ok_or_else(|| Error::KeyMismatch {
            key: key.to_string(),
        })
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.entries.values().map(Tensor::len).sum()
    }

    pub fn merge(&mut self, other: ParameterMap) -> Result<()> {
        for (k, v) in other.entries {
            if self.entries.contains_key(&k) {
                return Err(Error::Internal(format!("duplicate parameter key `{k}`")));
            }
            self.entries.insert(k, v);
        }
        Ok(())
    }

    /// Keys starting with `prefix` followed by a `.` separator (or equal to it).
    pub fn keys_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.keys().filter(move |k| has_prefix(k, prefix))
    }

    /// Same keys and shapes everywhere. Reports the first offending key.
    pub fn check_compatible(&self, other: &ParameterMap) -> Result<()> {
        for key in self.keys().chain(other.keys()) {
            match (self.get(key), other.get(key)) {
                (Some(a), Some(b)) if a.shape() != b.shape() => {
                    return Err(Error::Incompatible {
                        key: key.to_string(),
                        left: a.shape().to_vec(),
                        right: b.shape().to_vec(),
                    })
                }
                (Some(_), Some(_)) => {}
                _ => {
                    return Err(Error::KeyMismatch {
                        key: key.to_string(),
                    })
                }
            }
        }
        Ok(())
    }

    pub fn zeros_like(&self) -> ParameterMap {
        ParameterMap {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), Tensor::zeros(v.shape())))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entries.values().all(Tensor::is_finite)
    }

    pub fn max_abs_diff(&self, other: &ParameterMap) -> f64 {
        self.iter()
            .filter_map(|(k, v)| other.get(k).map(|o| v.max_abs_diff(o)))
            .fold(0.0, f64::max)
    }
}

impl FromIterator<(String, Tensor)> for ParameterMap {
    fn from_iter<I: IntoIterator<Item = (String, Tensor)>>(iter: I) -> Self {
        ParameterMap {
            entries: iter.into_iter().collect(),
        }
    }
}

pub(crate) fn has_prefix(key: &str, prefix: &str) -> bool {
    key.strip_prefix(prefix)
        .is_some_and(|rest| rest.is_empty() || rest.starts_with('.'))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(entries: &[(&str, &[f64])]) -> ParameterMap {
        entries
            .iter()
            .map(|(k, v)| (k.to_string(), Tensor::vector(v.to_vec())))
            .collect()
    }

    #[test]
    fn iteration_is_lexicographic() {
        let m = map(&[("b", &[1.0]), ("a.z", &[1.0]), ("a", &[1.0])]);
        assert_eq!(m.keys().collect::<Vec<_>>(), vec!["a", "a.z", "b"]);
    }

    #[test]
    fn prefix_respects_separator() {
        let m = map(&[("img.enc.0.weight", &[1.0]), ("img.encx.weight", &[1.0])]);
        assert_eq!(m.keys_with_prefix("img.enc").count(), 1);
    }

    #[test]
    fn compatibility_names_offending_key() {
        let a = map(&[("w", &[1.0, 2.0])]);
        let b = map(&[("w", &[1.0])]);
        match a.check_compatible(&b) {
            Err(Error::Incompatible { key, .. }) => assert_eq!(key, "w"),
            other => panic!("unexpected {other:?}"),
        }
        let c = map(&[("v", &[1.0, 2.0])]);
        assert!(matches!(
            a.check_compatible(&c),
            Err(Error::KeyMismatch { .. })
        ));
    }
}
