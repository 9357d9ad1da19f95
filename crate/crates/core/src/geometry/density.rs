//! Mixture-density region: points outside every component's shell.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::montecarlo::Region;
use super::threshold::check_epsilon;
use crate::error::{Error, Result};
use crate::gmm::GaussianMixture;

/// `{z : (z - μ_i)ᵀ Σ_i⁻¹ (z - μ_i) > c_i for every component i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRegion {
    pub gmm: GaussianMixture,
    pub epsilon: f64,
    pub thresholds: Vec<f64>,
}

impl Region for DensityRegion {
    fn contains(&self, z: &[f64]) -> bool {
        self.thresholds
            .iter()
            .enumerate()
            .all(|(c, t)| self.gmm.mahalanobis_sq(c, z).is_ok_and(|m| m > *t))
    }
}

/// Per-component thresholds at the `1 - ε` quantile of a chi-square with
/// H degrees of freedom, so each component alone leaves mass `ε` outside
/// its shell. The mixture-level mass is then at most `ε` and can be
/// measured with [`super::mc_region_mass`].
pub fn density_region(gmm: &GaussianMixture, epsilon: f64) -> Result<DensityRegion> {
    check_epsilon(epsilon)?;
    let chi = ChiSquared::new(gmm.h() as f64)
        .map_err(|e| Error::Numerical(format!("chi-square construction failed: {e}")))?;
    let c = chi.inverse_cdf(1.0 - epsilon);
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Numerical(format!("chi-square quantile is {c}")));
    }
    Ok(DensityRegion {
        gmm: gmm.clone(),
        epsilon,
        thresholds: vec![c; gmm.k()],
    })
}
