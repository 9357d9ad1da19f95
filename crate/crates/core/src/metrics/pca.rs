//! Principal-component projection for two-dimensional views of features.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    pub dims: usize,
    pub mean: Vec<f64>,
    /// Components, one per row, each of length H.
    pub components: Vec<Vec<f64>>,
    /// Sample variance along each component, non-increasing.
    pub variances: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// Projected coordinates, N rows of `dims` values, row-major.
    pub projected: Vec<f64>,
}

impl PcaProjection {
    pub fn point(&self, i: usize) -> &[f64] {
        &self.projected[i * self.dims..(i + 1) * self.dims]
    }

    /// Project new rows with the fitted mean and components.
    pub fn transform(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        if features.h() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                context: "pca transform",
                expected: self.mean.len(),
                got: features.h(),
            });
        }
        let mut out = Vec::with_capacity(features.n() * self.dims);
        for row in features.rows() {
            for c in &self.components {
                out.push(
                    row.iter()
                        .zip(&self.mean)
                        .zip(c)
                        .map(|((x, m), v)| (x - m) * v)
                        .sum(),
                );
            }
        }
        Ok(out)
    }
}

/// Mean-centred projection onto the top `dims` eigenvectors of the sample
/// covariance. Each component is signed so that its largest-magnitude
/// coordinate is positive.
pub fn pca_project(features: &FeatureMatrix, dims: usize) -> Result<PcaProjection> {
    let (n, h) = (features.n(), features.h());
    if dims == 0 || dims > h {
        return Err(Error::InvalidParameter(format!(
            "dims must lie in 1..={h}, got {dims}"
        )));
    }
    if n < dims || n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least max(2, dims) rows, got {n}"
        )));
    }
    let x = features.to_matrix();
    let mean: DVector<f64> = x.row_mean().transpose();
    let centred = DMatrix::from_fn(n, h, |i, j| x[(i, j)] - mean[j]);
    let cov = centred.transpose() * &centred / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..h).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let top = eig.eigenvalues[order[0]].max(0.0);
    let floor = 1e-12 * top.max(f64::MIN_POSITIVE);
    let mut components = Vec::with_capacity(dims);
    let mut variances = Vec::with_capacity(dims);
    for &idx in order.iter().take(dims) {
        let value = eig.eigenvalues[idx];
        if !(value > floor) {
            return Err(Error::Numerical(format!(
                "covariance has rank below {dims}; component variance {value:e}"
            )));
        }
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let lead = v
            .iter()
            .copied()
            .fold(0.0f64, |m, e| if e.abs() > m.abs() { e } else { m });
        if lead < 0.0 {
            v.iter_mut().for_each(|e| *e = -*e);
        }
        components.push(v);
        variances.push(value);
    }
    let mean: Vec<f64> = mean.iter().copied().collect();
    let mut proj = PcaProjection {
        dims,
        explained_variance_ratio: variances.iter().map(|v| v / total).collect(),
        mean,
        components,
        variances,
        projected: Vec::new(),
    };
    proj.projected = proj.transform(features)?;
    Ok(proj)
}
