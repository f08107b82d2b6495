//! Labeled tensor-factor registry.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// An ordered list of labeled subsystems with their dimensions.
///
/// Every operator in this crate is tagged with a `SystemSpec`; the matrix
/// basis is ordered lexicographically over the subsystem computational bases
/// in label order (leftmost label is the most significant index). All
/// reshape-like operations (tensor products, partial traces, permutations)
/// derive from this single convention.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemSpec {
    labels: Vec<String>,
    dims: Vec<usize>,
}

impl SystemSpec {
    /// Build a spec from `(label, dim)` pairs. Labels must be unique and
    /// dimensions at least 1. An empty list is the trivial (scalar) system.
    pub fn new<S: Into<String>>(parts: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let mut labels = Vec::new();
        let mut dims = Vec::new();
        for (label, dim) in parts {
            let label = label.into();
            if dim < 1 {
                return Err(Error::InvalidDimension { label, dim });
            }
            if labels.contains(&label) {
                return Err(Error::DuplicateLabel(label));
            }
            labels.push(label);
            dims.push(dim);
        }
        Ok(SystemSpec { labels, dims })
    }

    /// Single-subsystem spec.
    pub fn single(label: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new([(label.into(), dim)])
    }

    /// The trivial system: no subsystems, total dimension 1.
    pub fn scalar() -> Self {
        SystemSpec {
            labels: Vec::new(),
            dims: Vec::new(),
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Product of all subsystem dimensions.
    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Position of `label` in the factor list.
    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.dims[self.index_of(label)?])
    }

    /// Total dimension of a subset of labels.
    pub fn dim_of_labels(&self, labels: &[String]) -> Result<usize> {
        let mut d = 1;
        for l in labels {
            d *= self.dim_of(l)?;
        }
        Ok(d)
    }

    /// Concatenate two specs; label sets must be disjoint.
    pub fn tensor(&self, other: &SystemSpec) -> Result<SystemSpec> {
        SystemSpec::new(
            self.labels
                .iter()
                .cloned()
                .zip(self.dims.iter().copied())
                .chain(other.labels.iter().cloned().zip(other.dims.iter().copied())),
        )
    }

    /// The sub-spec of the given label positions, in the given order.
    pub(crate) fn select(&self, positions: &[usize]) -> SystemSpec {
        SystemSpec {
            labels: positions.iter().map(|&i| self.labels[i].clone()).collect(),
            dims: positions.iter().map(|&i| self.dims[i]).collect(),
        }
    }

    /// Row-major strides: the basis index of multi-index `(i_0, .., i_{n-1})`
    /// is `sum_k i_k * stride_k`.
    pub(crate) fn strides(&self) -> Vec<usize> {
        let n = self.dims.len();
        let mut strides = vec![1usize; n];
        for k in (0..n.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    /// Replace every label via `f`, keeping dimensions. Fails on collisions.
    pub fn relabeled(&self, f: impl Fn(&str) -> String) -> Result<SystemSpec> {
        SystemSpec::new(
            self.labels
                .iter()
                .map(|l| (f(l), 0))
                .zip(self.dims.iter())
                .map(|((l, _), &d)| (l, d)),
        )
    }

    /// Human-readable `label:dim` list, used in error messages.
    pub fn describe(&self) -> String {
        self.labels
            .iter()
            .zip(&self.dims)
            .map(|(l, d)| format!("{l}:{d}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}
