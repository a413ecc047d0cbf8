use serde::{Deserialize, Serialize};

use super::{Cell, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: f64,
    pub std: f64,
}

impl Scaler {
    pub fn forward(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Source of a feature: a numeric column, or one category of a categorical column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureOrigin {
    pub column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

/// Standardized design matrix built from a complete dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub values: Matrix,
    pub feature_names: Vec<String>,
    pub scaler: Vec<Scaler>,
    pub origin: Vec<FeatureOrigin>,
    pub row_ids: Vec<String>,
    /// Zero-variance features removed before scaling.
    pub dropped: Vec<String>,
}

impl FeatureMatrix {
    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn d(&self) -> usize {
        self.values.cols()
    }

    /// Wraps an already-standardized matrix with identity scalers.
    pub fn from_standardized(values: Matrix) -> Self {
        let d = values.cols();
        let names: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
        FeatureMatrix {
            scaler: vec![Scaler { mean: 0.0, std: 1.0 }; d],
            origin: names.iter().map(|n| FeatureOrigin { column: n.clone(), category: None }).collect(),
            row_ids: (0..values.rows()).map(|i| i.to_string()).collect(),
            feature_names: names,
            values,
            dropped: vec![],
        }
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Feature value back in original units.
    pub fn original_value(&self, j: usize, z: f64) -> f64 {
        self.scaler[j].inverse(z)
    }

    pub fn unstandardized(&self) -> Matrix {
        let mut m = self.values.clone();
        for i in 0..m.rows() {
            for (j, v) in m.row_mut(i).iter_mut().enumerate() {
                *v = self.scaler[j].inverse(*v);
            }
        }
        m
    }

    pub fn is_indicator(&self, j: usize) -> bool {
        self.origin[j].category.is_some()
    }
}

/// One-hot encodes categoricals, then z-scores every feature with the sample
/// standard deviation. Constant features are dropped and listed in `dropped`.
pub fn to_feature_matrix(d: &Dataset) -> Result<FeatureMatrix> {
    if d.missing_count() > 0 {
        return Err(Error::invalid("feature matrix needs a complete dataset; apply complete-case filtering first"));
    }
    let n = d.n_rows();
    let mut raw_cols: Vec<Vec<f64>> = Vec::new();
    let mut names = Vec::new();
    let mut origin = Vec::new();
    for (j, col) in d.schema.iter().enumerate() {
        match col.kind {
            ColumnKind::Numeric => {
                raw_cols.push(d.rows.iter().map(|r| r[j].and_then(Cell::as_number).unwrap_or(f64::NAN)).collect());
                names.push(col.name.clone());
                origin.push(FeatureOrigin { column: col.name.clone(), category: None });
            }
            ColumnKind::Categorical => {
                for (c, cat) in col.categories.iter().enumerate() {
                    raw_cols.push(
                        d.rows
                            .iter()
                            .map(|r| if r[j].and_then(Cell::as_category) == Some(c) { 1.0 } else { 0.0 })
                            .collect(),
                    );
                    names.push(format!("{}={}", col.name, cat));
                    origin.push(FeatureOrigin { column: col.name.clone(), category: Some(cat.clone()) });
                }
            }
        }
    }

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut scaler = Vec::new();
    for (j, col) in raw_cols.iter().enumerate() {
        let mean = linalg::mean(col);
        let std = linalg::variance(col).sqrt();
        if n < 2 || !(std > 1e-12 * mean.abs().max(1.0)) {
            dropped.push(names[j].clone());
        } else {
            kept.push(j);
            scaler.push(Scaler { mean, std });
        }
    }

    let mut values = Matrix::zeros(n, kept.len());
    for (k, &j) in kept.iter().enumerate() {
        for i in 0..n {
            values.set(i, k, scaler[k].forward(raw_cols[j][i]));
        }
    }
    Ok(FeatureMatrix {
        values,
        feature_names: kept.iter().map(|&j| names[j].clone()).collect(),
        origin: kept.iter().map(|&j| origin[j].clone()).collect(),
        scaler,
        row_ids: d.row_ids.clone(),
        dropped,
    })
}
