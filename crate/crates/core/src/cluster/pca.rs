use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::linalg::{dot, symmetric_eigen, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    /// 2 x d, orthonormal rows.
    pub components: Matrix,
    pub explained_variance_ratio: [f64; 2],
    /// n x 2.
    pub coordinates: Matrix,
    pub mean: Vec<f64>,
}

impl PcaProjection {
    pub fn project(&self, x: &[f64]) -> [f64; 2] {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        [dot(self.components.row(0), &centered), dot(self.components.row(1), &centered)]
    }
}

/// Top-2 principal axes of the sample covariance. Each component is signed
/// so that its largest-magnitude entry is positive.
pub fn pca_project(m: &FeatureMatrix) -> Result<PcaProjection> {
    let n = m.n();
    let d = m.d();
    if n < 2 {
        return Err(Error::invalid("pca needs at least two rows"));
    }
    let mean = m.values.column_means();
    let cov = m.values.covariance();
    let (values, vectors) = symmetric_eigen(&cov);
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();

    let mut components = Matrix::zeros(2, d);
    let mut ratio = [0.0; 2];
    for r in 0..2.min(d) {
        let mut v = vectors.row(r).to_vec();
        let pivot = v.iter().enumerate().fold(0, |best, (j, x)| if x.abs() > v[best].abs() { j } else { best });
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.row_mut(r).copy_from_slice(&v);
        ratio[r] = if total > 0.0 { values[r].max(0.0) / total } else { 0.0 };
    }

    let mut coordinates = Matrix::zeros(n, 2);
    let mut proj = PcaProjection { components, explained_variance_ratio: ratio, coordinates: Matrix::zeros(0, 2), mean };
    for i in 0..n {
        let p = proj.project(m.values.row(i));
        coordinates.row_mut(i).copy_from_slice(&p);
    }
    proj.coordinates = coordinates;
    Ok(proj)
}
