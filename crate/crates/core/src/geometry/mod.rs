//! Regions of feature space that a head is guaranteed to score as more
//! uncertain than a `1 - ε` fraction of the training data.
//!
//! [`empirical_threshold`] turns training scores into the cut-off `u*`.
//! The two-class slab is solved exactly under a Gaussian class model,
//! general heads use the pairwise-slab linear approximation, and mixture
//! densities use per-component Mahalanobis shells. [`mc_region_mass`]
//! measures any of them against any sampler.

mod density;
mod linear;
mod montecarlo;
mod slab;
mod threshold;

pub use density::{density_region, DensityRegion};
pub use linear::{
    exact_contour_offset, far_field_direction, fit_linear_region, fit_linear_region_with,
    LinearApproxRegion, LinearFitConfig, PairSlab,
};
pub use montecarlo::{
    mc_region_mass, AnnulusSampler, BoxSampler, MixtureSampler, Predicate, Region, Sampler,
    DEFAULT_MC_SAMPLES, DEFAULT_MC_SEED,
};
pub use slab::{solve_alpha_exact_k2, ExactSlab, GaussianClassModel, SlabRegion};
pub use threshold::{empirical_threshold, RegionSpec};

use serde::{Deserialize, Serialize};

/// Any fitted region in a self-describing form for export.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RegionExport {
    Slab(SlabRegion),
    Linear(LinearApproxRegion),
    Density(DensityRegion),
}

impl Region for RegionExport {
    fn contains(&self, z: &[f64]) -> bool {
        match self {
            RegionExport::Slab(r) => r.contains(z),
            RegionExport::Linear(r) => r.contains(z),
            RegionExport::Density(r) => r.contains(z),
        }
    }
}
