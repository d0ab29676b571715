//! Time series container, window geometry and validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Uniformly sampled multivariate series, stored dims-major: `values[d][t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct Series<S> {
    pub id: String,
    pub values: Vec<Vec<S>>,
    /// Per-point labels, 1 = anomalous.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<u8>>,
}

impl<S: Scalar> Series<S> {
    /// Builds and validates a series.
    pub fn new(id: impl Into<String>, values: Vec<Vec<S>>, labels: Option<Vec<u8>>) -> Result<Self> {
        validate_series(Series {
            id: id.into(),
            values,
            labels,
        })
    }

    pub fn univariate(id: impl Into<String>, values: Vec<S>) -> Result<Self> {
        Self::new(id, vec![values], None)
    }

    pub fn dims(&self) -> usize {
        self.values.len()
    }

    pub fn len(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    /// Labels, or all zeros for an unlabeled series.
    pub fn labels_or_zero(&self) -> Vec<u8> {
        self.labels.clone().unwrap_or_else(|| vec![0; self.len()])
    }

    /// Mutable labels, materialized as zeros when absent.
    pub fn labels_mut(&mut self) -> &mut Vec<u8> {
        let len = self.len();
        self.labels.get_or_insert_with(|| vec![0; len])
    }

    /// Same samples with every label cleared to 0.
    pub fn with_zero_labels(mut self) -> Self {
        self.labels = Some(vec![0; self.len()]);
        self
    }

    pub fn anomaly_count(&self) -> usize {
        self.labels
            .as_ref()
            .map_or(0, |l| l.iter().filter(|&&v| v != 0).count())
    }

    /// Root mean square over all samples.
    pub fn rms(&self) -> S {
        let n = self.dims() * self.len();
        if n == 0 {
            return S::zero();
        }
        let ss: S = self.values.iter().flatten().map(|&v| v * v).sum();
        (ss / S::of_usize(n)).sqrt()
    }
}

/// Checks every series invariant and returns the series unchanged.
pub fn validate_series<S: Scalar>(series: Series<S>) -> Result<Series<S>> {
    let dims = series.values.len();
    let len = series.values.first().map_or(0, Vec::len);
    if dims == 0 || len == 0 {
        return Err(Error::EmptySeries { dims, len });
    }
    for (d, row) in series.values.iter().enumerate() {
        if row.len() != len {
            return Err(Error::RaggedSeries {
                dim: d,
                got: row.len(),
                expected: len,
            });
        }
    }
    // Report the earliest offending timestamp, lowest dimension first.
    for t in 0..len {
        for (d, row) in series.values.iter().enumerate() {
            if !row[t].is_finite() {
                return Err(Error::NonFiniteSample { dim: d, index: t });
            }
        }
    }
    if let Some(labels) = &series.labels {
        if labels.len() != len {
            return Err(Error::LabelLengthMismatch {
                labels: labels.len(),
                len,
            });
        }
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(Error::Parse {
                record: i,
                message: format!("label must be 0 or 1, got {}", labels[i]),
            });
        }
    }
    Ok(series)
}

/// Trend/residual split of a series; `trend + residual` reproduces the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<S> {
    pub trend: Vec<Vec<S>>,
    pub residual: Vec<Vec<S>>,
    pub lambda: S,
}

impl<S: Scalar> Decomposition<S> {
    /// Elementwise `trend + residual`.
    pub fn reconstruct(&self) -> Vec<Vec<S>> {
        self.trend
            .iter()
            .zip(&self.residual)
            .map(|(t, r)| t.iter().zip(r).map(|(&a, &b)| a + b).collect())
            .collect()
    }
}

/// Geometry of the sliding full/context/suspect windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowSpec {
    pub context_len: usize,
    pub suspect_len: usize,
    pub stride: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            context_len: 96,
            suspect_len: 4,
            stride: 1,
        }
    }
}

impl WindowSpec {
    pub fn new(context_len: usize, suspect_len: usize, stride: usize) -> Result<Self> {
        let spec = Self {
            context_len,
            suspect_len,
            stride,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.context_len == 0 || self.suspect_len == 0 || self.stride == 0 {
            return Err(Error::InvalidConfig(format!(
                "window lengths and stride must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn full_len(&self) -> usize {
        self.context_len + self.suspect_len
    }

    /// Window start offsets for a series of length `len`.
    pub fn starts(&self, len: usize) -> impl Iterator<Item = usize> {
        let full = self.full_len();
        let last = len.checked_sub(full);
        let stride = self.stride;
        (0..).map(move |i| i * stride).take_while(move |&s| last.is_some_and(|l| s <= l))
    }

    pub fn with_stride(self, stride: usize) -> Self {
        Self { stride, ..self }
    }
}

/// A full window and its context prefix, labeled by its suspect suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct Pair<S> {
    pub source_id: String,
    /// Offset of the full window in the source series.
    pub start: usize,
    pub context_len: usize,
    /// 1 when any point of the suspect span is anomalous.
    pub label: u8,
    /// Full window, dims-major.
    pub full: Vec<Vec<S>>,
}

impl<S: Scalar> Pair<S> {
    pub fn dims(&self) -> usize {
        self.full.len()
    }

    pub fn full_len(&self) -> usize {
        self.full.first().map_or(0, Vec::len)
    }

    pub fn suspect_len(&self) -> usize {
        self.full_len() - self.context_len
    }

    /// The first `context_len` columns of the full window.
    pub fn context(&self) -> Vec<&[S]> {
        self.full.iter().map(|row| &row[..self.context_len]).collect()
    }

    pub fn context_owned(&self) -> Vec<Vec<S>> {
        self.full
            .iter()
            .map(|row| row[..self.context_len].to_vec())
            .collect()
    }
}
