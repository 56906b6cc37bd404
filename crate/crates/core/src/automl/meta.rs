//! Meta-dataset rows and their soft labels.

use serde::{Deserialize, Serialize};

use super::AutomlError;
use crate::features::{RepresentationVector, REPRESENTATION_DIM};

/// One corpus series: its representation and the error of every method on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaRow {
    pub dataset_id: String,
    pub representation: RepresentationVector,
    /// Aligned with [`MetaDataset::method_ids`].
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaDataset {
    pub method_ids: Vec<String>,
    pub rows: Vec<MetaRow>,
}

impl MetaDataset {
    pub fn new(method_ids: Vec<String>, rows: Vec<MetaRow>) -> Result<Self, AutomlError> {
        let meta = Self { method_ids, rows };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<(), AutomlError> {
        let m = self.method_ids.len();
        if m == 0 {
            return Err(AutomlError::InvalidMeta("no methods".into()));
        }
        let mut ids = self.method_ids.clone();
        ids.sort();
        ids.dedup();
        if ids.len() != m {
            return Err(AutomlError::InvalidMeta("method ids are not distinct".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.errors.len() != m {
                return Err(AutomlError::InvalidMeta(format!(
                    "row {i} has {} errors for {m} methods",
                    row.errors.len()
                )));
            }
            if row.errors.iter().any(|e| !e.is_finite() || *e < 0.0) {
                return Err(AutomlError::InvalidMeta(format!("row {i} has a negative or non-finite error")));
            }
            if row.representation.0.iter().any(|v| !v.is_finite()) {
                return Err(AutomlError::InvalidMeta(format!("row {i} has a non-finite representation")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub(crate) fn inputs(&self) -> Vec<[f64; REPRESENTATION_DIM]> {
        self.rows.iter().map(|r| r.representation.0).collect()
    }
}

/// Row-stochastic `N × M` matrix of soft labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftLabelMatrix {
    pub rows: Vec<Vec<f64>>,
}

/// In-place softmax over `z`, shifted by the maximum for stability.
pub(crate) fn softmax(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in z.iter_mut() {
        *v /= total;
    }
}

/// Soft label of one row: `softmax(−z / τ)` where `z` is the row's errors
/// standardized with the population standard deviation. Equal errors give
/// the uniform distribution.
pub fn soft_label(errors: &[f64], temperature: f64) -> Vec<f64> {
    let m = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / m;
    let sd = (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / m).sqrt();
    let mut z: Vec<f64> = if sd > 0.0 {
        errors.iter().map(|e| -(e - mean) / sd / temperature).collect()
    } else {
        vec![0.0; errors.len()]
    };
    softmax(&mut z);
    z
}

pub fn build_soft_labels(meta: &MetaDataset, temperature: f64) -> Result<SoftLabelMatrix, AutomlError> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(AutomlError::InvalidHyper(format!("temperature must be positive, got {temperature}")));
    }
    meta.validate()?;
    Ok(SoftLabelMatrix { rows: meta.rows.iter().map(|r| soft_label(&r.errors, temperature)).collect() })
}
