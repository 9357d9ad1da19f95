//! One module per verb plus the shared file loaders.

pub mod attribute;
pub mod audit;
pub mod counterfactual;
pub mod depth;
pub mod gen_head;
pub mod gmm;
pub mod pca;
pub mod region;
pub mod score;
pub mod sweep;
pub mod train_toy;

use std::path::Path;

use anyhow::{Context, Result};
use softood::features::{self, FeatureFormat};
use softood::{FeatureMatrix, GaussianMixture, LabelVector, SoftmaxHead};

/// Features and optional labels; the format follows the file extension.
pub fn load_features(path: &Path) -> Result<(FeatureMatrix, Option<LabelVector>)> {
    features::load_features(path, FeatureFormat::from_path(path), None)
        .with_context(|| format!("loading features {}", path.display()))
}

pub fn load_head(path: &Path) -> Result<SoftmaxHead> {
    features::load_head(path).with_context(|| format!("loading head {}", path.display()))
}

pub fn load_gmm(path: &Path) -> Result<GaussianMixture> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading mixture {}", path.display()))?;
    GaussianMixture::from_json(&text).with_context(|| format!("parsing mixture {}", path.display()))
}
