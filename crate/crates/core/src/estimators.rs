//! Softmax-derived uncertainty estimators, the magnitude/angle surrogate and
//! their gradient fields in feature space.
//!
//! Every score follows the convention that a larger value means more
//! uncertain. Entropies use the natural log.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::gmm::GaussianMixture;
use crate::head::{decompose, softmax_logits, SoftmaxHead};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorId {
    Max,
    Entropy,
    Cool,
    Density,
    Mental,
}

impl std::fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            EstimatorId::Max => "max",
            EstimatorId::Entropy => "entropy",
            EstimatorId::Cool => "cool",
            EstimatorId::Density => "density",
            EstimatorId::Mental => "mental",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(EstimatorId::Max),
            "entropy" => Ok(EstimatorId::Entropy),
            "cool" => Ok(EstimatorId::Cool),
            "density" => Ok(EstimatorId::Density),
            "mental" => Ok(EstimatorId::Mental),
            other => Err(Error::InvalidParameter(format!(
                "unknown estimator {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyScore {
    pub value: f64,
    pub estimator: EstimatorId,
}

/// Logit cooling applied before taking the entropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoolingConfig {
    pub factor: f64,
    /// Scale `w_i·z + b_i` as a whole (true) or only `z` (false).
    pub scale_bias: bool,
}

impl Default for CoolingConfig {
    fn default() -> Self {
        Self {
            factor: 0.1,
            scale_bias: true,
        }
    }
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

fn entropy_of_logits(logits: &[f64]) -> f64 {
    let h: f64 = log_softmax(logits)
        .iter()
        .map(|lp| {
            let p = lp.exp();
            if p == 0.0 {
                0.0
            } else {
                -p * lp
            }
        })
        .sum();
    h.max(0.0)
}

/// Negative maximum class probability, in `[-1, -1/K]`.
pub fn u_max(head: &SoftmaxHead, z: &[f64]) -> Result<f64> {
    let p = softmax_logits(&head.logits(z)?);
    Ok(-p.iter().copied().fold(0.0, f64::max))
}

/// Shannon entropy of the softmax output.
pub fn u_entropy(head: &SoftmaxHead, z: &[f64]) -> Result<f64> {
    Ok(entropy_of_logits(&head.logits(z)?))
}

/// Entropy after cooling the logits by `cfg.factor`.
pub fn u_cool(head: &SoftmaxHead, z: &[f64], cfg: CoolingConfig) -> Result<f64> {
    Ok(entropy_of_logits(&head.scaled_logits(
        z,
        cfg.factor,
        cfg.scale_bias,
    )?))
}

/// Closed-form surrogate for `u_max` from `‖z‖` and the largest cosine,
/// exact when every non-maximal cosine equals `-1/(K-1)` under an
/// equal-norm, zero-bias head with unit weight norms.
pub fn u_mental(k: usize, z_norm: f64, max_cos: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "mental model needs K >= 2, got {k}"
        )));
    }
    if !(z_norm >= 0.0 && z_norm.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "z_norm must be finite and >= 0, got {z_norm}"
        )));
    }
    if !(-1.0..=1.0).contains(&max_cos) {
        return Err(Error::InvalidParameter(format!(
            "max_cos must lie in [-1, 1], got {max_cos}"
        )));
    }
    let km1 = (k - 1) as f64;
    Ok(-1.0 / (1.0 + km1 * (-z_norm * (1.0 / km1 + max_cos)).exp()))
}

pub fn u_density(gmm: &GaussianMixture, z: &[f64]) -> Result<f64> {
    Ok(-gmm.log_density(z)?)
}

/// `Σ_j σ_j w_j`, the probability-weighted mean weight vector.
fn mean_weight(head: &SoftmaxHead, p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; head.h()];
    for (j, pj) in p.iter().enumerate() {
        for (o, w) in out.iter_mut().zip(head.weights().column(j).iter()) {
            *o += pj * w;
        }
    }
    out
}

/// Gradient of `u_max`: `σ_i Σ_j σ_j (w_j - w_i)` with `i` the argmax.
/// Errors when the largest logit is shared, where the field jumps.
pub fn grad_u_max(head: &SoftmaxHead, z: &[f64]) -> Result<Vec<f64>> {
    let logits = head.logits(z)?;
    let i = crate::head::argmax(&logits);
    if let Some(j) = (0..logits.len()).find(|&j| j != i && logits[j] == logits[i]) {
        return Err(Error::OnBoundary(i.min(j), i.max(j)));
    }
    let p = softmax_logits(&logits);
    let wbar = mean_weight(head, &p);
    Ok(wbar
        .iter()
        .zip(head.weights().column(i).iter())
        .map(|(m, wi)| p[i] * (m - wi))
        .collect())
}

/// Gradient of `u_entropy`: `Σ_i (ln σ_i + 1) σ_i Σ_j σ_j (w_j - w_i)`.
///
/// Entropy is smooth across decision boundaries, so ties are not an error.
pub fn grad_u_entropy(head: &SoftmaxHead, z: &[f64]) -> Result<Vec<f64>> {
    let logits = head.logits(z)?;
    let logp = log_softmax(&logits);
    let p: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
    let wbar = mean_weight(head, &p);
    let mut out = vec![0.0; head.h()];
    for i in 0..head.k() {
        let coef = (logp[i] + 1.0) * p[i];
        if coef == 0.0 {
            continue;
        }
        for (o, (m, wi)) in out
            .iter_mut()
            .zip(wbar.iter().zip(head.weights().column(i).iter()))
        {
            *o += coef * (m - wi);
        }
    }
    Ok(out)
}

/// Gradient of `u_density`, `Σ_k r_k(z) Σ_k⁻¹ (z - μ_k)` with posterior
/// responsibilities `r_k`, including the chain rule through any feature
/// transform the mixture was fitted with.
pub fn grad_u_density(gmm: &GaussianMixture, z: &[f64]) -> Result<Vec<f64>> {
    gmm.grad_neg_log_density(z)
}

/// One row of a batch score table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub sample_index: usize,
    pub u_max: f64,
    pub u_entropy: f64,
    pub u_cool: f64,
    pub u_density: Option<f64>,
    pub z_norm: f64,
    pub max_cos: f64,
    pub argmax_class: usize,
}

/// Scores every row. Rows are processed in parallel but each row's result
/// depends only on that row, so output is independent of scheduling.
pub fn score_batch(
    head: &SoftmaxHead,
    gmm: Option<&GaussianMixture>,
    features: &FeatureMatrix,
    cooling: CoolingConfig,
) -> Result<Vec<ScoreRow>> {
    if features.h() != head.h() {
        return Err(Error::DimensionMismatch {
            context: "features vs head",
            expected: head.h(),
            got: features.h(),
        });
    }
    (0..features.n())
        .into_par_iter()
        .map(|i| {
            let z = features.row(i);
            let d = decompose(head, z)?;
            Ok(ScoreRow {
                sample_index: i,
                u_max: u_max(head, z)?,
                u_entropy: u_entropy(head, z)?,
                u_cool: u_cool(head, z, cooling)?,
                u_density: gmm.map(|g| u_density(g, z)).transpose()?,
                z_norm: d.z_norm,
                max_cos: d.max_cos(),
                argmax_class: d.argmax_class,
            })
        })
        .collect()
}

/// Scores of one estimator for every row.
pub fn score_column(
    estimator: EstimatorId,
    head: &SoftmaxHead,
    gmm: Option<&GaussianMixture>,
    features: &FeatureMatrix,
    cooling: CoolingConfig,
) -> Result<Vec<f64>> {
    if estimator == EstimatorId::Density && gmm.is_none() {
        return Err(Error::InvalidParameter(
            "density scores need a fitted mixture".into(),
        ));
    }
    (0..features.n())
        .into_par_iter()
        .map(|i| {
            let z = features.row(i);
            match estimator {
                EstimatorId::Max => u_max(head, z),
                EstimatorId::Entropy => u_entropy(head, z),
                EstimatorId::Cool => u_cool(head, z, cooling),
                EstimatorId::Density => u_density(gmm.expect("checked above"), z),
                EstimatorId::Mental => {
                    let d = decompose(head, z)?;
                    u_mental(head.k(), d.z_norm, d.max_cos())
                }
            }
        })
        .collect()
}

pub fn score(
    estimator: EstimatorId,
    head: &SoftmaxHead,
    gmm: Option<&GaussianMixture>,
    z: &[f64],
    cooling: CoolingConfig,
) -> Result<UncertaintyScore> {
    let features = FeatureMatrix::new(1, z.len(), z.to_vec())?;
    let value = score_column(estimator, head, gmm, &features, cooling)?[0];
    Ok(UncertaintyScore { value, estimator })
}
