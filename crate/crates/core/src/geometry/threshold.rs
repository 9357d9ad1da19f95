use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::EstimatorId;

/// Target training mass `ε` and the score cut-off `u*` it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub epsilon: f64,
    pub u_star: f64,
    pub estimator: EstimatorId,
}

impl RegionSpec {
    pub fn new(epsilon: f64, u_star: f64, estimator: EstimatorId) -> Result<Self> {
        check_epsilon(epsilon)?;
        if !u_star.is_finite() {
            return Err(Error::NonFinite("threshold u*"));
        }
        Ok(Self {
            epsilon,
            u_star,
            estimator,
        })
    }

    /// Whether a score falls in the region, i.e. strictly exceeds `u*`.
    pub fn admits(&self, score: f64) -> bool {
        score > self.u_star
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok(())
}

/// `(1 - ε)` quantile of the scores with the nearest-rank convention: the
/// value at rank `ceil((1 - ε) N)` of the ascending order. At most an `ε`
/// fraction of the scores is strictly greater than the result.
pub fn empirical_threshold(scores: &[f64], epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if scores.is_empty() {
        return Err(Error::EmptyInput("threshold needs at least one score"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("training scores"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // The small slack keeps exact products such as 0.95 * 100 from rounding up.
    let rank = (((1.0 - epsilon) * n as f64) - 1e-9)
        .ceil()
        .clamp(1.0, n as f64) as usize;
    Ok(sorted[rank - 1])
}
