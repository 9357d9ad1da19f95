//! Attribution of OOD-detection failures to three causes from the AUROCs
//! of the max-probability (A), entropy (B), cooled-entropy (C) and density
//! (D) estimators:
//!
//! * cause 1, a poorly structured decision boundary: `C − B`;
//! * cause 2, OOD features that land near the training features: `D − C`;
//! * cause 3, whatever the density estimator still misses: `1 − D`.
//!
//! The three sum to `1 − B`. A enters no cause and is reported alongside.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub auroc_max: f64,
    pub auroc_entropy: f64,
    pub auroc_cool: f64,
    pub auroc_density: f64,
    pub cause1: f64,
    pub cause2: f64,
    pub cause3: f64,
}

impl AttributionReport {
    /// Header matching [`AttributionReport::csv_row`].
    pub const CSV_HEADER: &'static str =
        "auroc_max,auroc_entropy,auroc_cool,auroc_density,cause1,cause2,cause3";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.auroc_max,
            self.auroc_entropy,
            self.auroc_cool,
            self.auroc_density,
            self.cause1,
            self.cause2,
            self.cause3
        )
    }

    /// Causes that came out negative, meaning a stronger estimator
    /// underperformed a weaker one.
    pub fn negative_causes(&self) -> Vec<usize> {
        [self.cause1, self.cause2, self.cause3]
            .iter()
            .enumerate()
            .filter(|(_, c)| **c < 0.0)
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn cause_sum(&self) -> f64 {
        self.cause1 + self.cause2 + self.cause3
    }
}

pub fn attribute(a: f64, b: f64, c: f64, d: f64) -> AttributionReport {
    AttributionReport {
        auroc_max: a,
        auroc_entropy: b,
        auroc_cool: c,
        auroc_density: d,
        cause1: c - b,
        cause2: d - c,
        cause3: 1.0 - d,
    }
}

/// Indices that subsample the larger of two sets down to the size of the
/// smaller one. The smaller side keeps every index. Chosen indices are
/// returned in increasing order.
pub fn balance(n_in: usize, n_out: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_in == 0 || n_out == 0 {
        return Err(Error::EmptyInput("balance needs both sides nonempty"));
    }
    let m = n_in.min(n_out);
    let mut r = rng::seeded(seed);
    let mut pick = |n: usize| -> Vec<usize> {
        if n == m {
            (0..n).collect()
        } else {
            let mut v = index::sample(&mut r, n, m).into_vec();
            v.sort_unstable();
            v
        }
    };
    let a = pick(n_in);
    let b = pick(n_out);
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mnist_row() {
        let r = attribute(0.0, 0.963, 0.963, 0.995);
        assert_eq!(r.cause1, 0.0);
        assert!((r.cause2 - 0.032).abs() < 1e-12);
        assert!((r.cause3 - 0.005).abs() < 1e-12);
        assert!((r.cause_sum() - (1.0 - 0.963)).abs() < 1e-12);
    }

    #[test]
    fn fashion_row_arithmetic() {
        let r = attribute(0.0, 0.887, 0.887, 0.985);
        assert!((r.cause2 - 0.098).abs() < 1e-12);
        assert!((r.cause3 - 0.015).abs() < 1e-12);
    }

    #[test]
    fn perfect_detector() {
        let r = attribute(1.0, 1.0, 1.0, 1.0);
        assert_eq!((r.cause1, r.cause2, r.cause3), (0.0, 0.0, 0.0));
        assert!(r.negative_causes().is_empty());
    }

    #[test]
    fn negative_causes_flagged() {
        let r = attribute(0.9, 0.9, 0.85, 0.95);
        assert_eq!(r.negative_causes(), vec![1]);
    }

    #[test]
    fn csv_shape() {
        let row = attribute(0.1, 0.2, 0.3, 0.4).csv_row();
        assert_eq!(
            row.split(',').count(),
            AttributionReport::CSV_HEADER.split(',').count()
        );
    }

    #[test]
    fn balancing() {
        let (a, b) = balance(10, 4, 7).unwrap();
        assert_eq!(b, vec![0, 1, 2, 3]);
        assert_eq!(a.len(), 4);
        assert!(a.windows(2).all(|w| w[0] < w[1]) && *a.last().unwrap() < 10);
        assert_eq!(balance(10, 4, 7).unwrap(), (a, b));
        assert!(balance(0, 3, 0).is_err());
    }
}
