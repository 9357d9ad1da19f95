//! Area under the ROC curve through the Mann–Whitney rank statistic.
//! Higher scores mean more uncertain, so the AUROC is the probability that
//! an OOD score exceeds an in-distribution score, ties counting one half.

use crate::error::{Error, Result};

use super::stats::average_ranks;

pub fn auroc(scores_in: &[f64], scores_out: &[f64]) -> Result<f64> {
    if scores_in.is_empty() {
        return Err(Error::EmptyInput("in-distribution scores"));
    }
    if scores_out.is_empty() {
        return Err(Error::EmptyInput("OOD scores"));
    }
    if scores_in.iter().chain(scores_out).any(|s| s.is_nan()) {
        return Err(Error::NonFinite("auroc scores"));
    }
    let (n_in, n_out) = (scores_in.len() as f64, scores_out.len() as f64);
    let pooled: Vec<f64> = scores_out.iter().chain(scores_in).copied().collect();
    let ranks = average_ranks(&pooled);
    // Ranks are integers or half-integers, so this sum is exact.
    let rank_sum: f64 = ranks[..scores_out.len()].iter().sum();
    let u = rank_sum - n_out * (n_out + 1.0) / 2.0;
    Ok(u / (n_in * n_out))
}

/// Quadratic pairwise count, used as a reference implementation.
pub fn auroc_brute_force(scores_in: &[f64], scores_out: &[f64]) -> Result<f64> {
    if scores_in.is_empty() || scores_out.is_empty() {
        return Err(Error::EmptyInput("scores"));
    }
    let mut twice = 0u64;
    for o in scores_out {
        for i in scores_in {
            twice += match o.partial_cmp(i) {
                Some(std::cmp::Ordering::Greater) => 2,
                Some(std::cmp::Ordering::Equal) => 1,
                _ => 0,
            };
        }
    }
    Ok(twice as f64 / (2.0 * scores_in.len() as f64 * scores_out.len() as f64))
}
