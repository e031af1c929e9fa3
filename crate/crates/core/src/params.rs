//! Named collections of trainable tensors.

use std::collections::BTreeMap;

use crate::error::{shape_err, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Ordered map from parameter name to tensor. Iteration is sorted by name,
/// so every traversal (updates, checkpoints, norms) is deterministic.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterSet<T> {
    entries: BTreeMap<String, Tensor<T>>,
}

impl<T: Real> ParameterSet<T> {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// Inserts a tensor, replacing any previous entry under the same name.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) {
        self.entries.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.entries.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar entries across all tensors.
    pub fn numel(&self) -> usize {
        self.entries.values().map(Tensor::len).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), Tensor::zeros(v.shape().to_vec())))
                .collect(),
        }
    }

    /// `self += c * other`, requiring identical names and shapes.
    pub fn axpy(&mut self, c: T, other: &Self) -> Result<()> {
        if self.entries.len() != other.entries.len() {
            return shape_err("parameter sets have different sizes");
        }
        for (name, value) in self.entries.iter_mut() {
            match other.entries.get(name) {
                Some(o) => value.axpy(c, o)?,
                None => return shape_err(format!("parameter {name} missing from operand")),
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, c: T) {
        for v in self.entries.values_mut() {
            for x in v.data_mut() {
                *x *= c;
            }
        }
    }

    pub fn global_norm(&self) -> T {
        self.entries
            .values()
            .map(Tensor::norm_sq)
            .sum::<T>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.entries.values().all(Tensor::all_finite)
    }

    /// Copy of the subset whose names start with `prefix`, with the prefix
    /// stripped.
    pub fn strip_prefix(&self, prefix: &str) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .filter_map(|(k, v)| k.strip_prefix(prefix).map(|s| (s.to_string(), v.clone())))
                .collect(),
        }
    }

    /// Merges `other` into `self` under `prefix`.
    pub fn extend_prefixed(&mut self, prefix: &str, other: &Self) {
        for (k, v) in &other.entries {
            self.entries.insert(format!("{prefix}{k}"), v.clone());
        }
    }
}

impl<T: Real> FromIterator<(String, Tensor<T>)> for ParameterSet<T> {
    fn from_iter<I: IntoIterator<Item = (String, Tensor<T>)>>(iter: I) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}
