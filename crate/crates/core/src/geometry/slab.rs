//! The region between two parallel hyperplanes and its exact two-class
//! solution under Gaussian class-conditionals.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};

use super::montecarlo::{MixtureSampler, Region};
use super::threshold::check_epsilon;
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, LabelVector};
use crate::head::SoftmaxHead;

const ALPHA_TOL: f64 = 1e-10;
const MAX_STEPS: usize = 60;
/// Classes whose mass across the decision boundary stays below this count
/// as linearly separable.
const SEPARABLE_MASS: f64 = 1e-4;

/// `{z : -alpha_lo < n·(z - anchor) / ‖n‖² < alpha_hi}`.
///
/// Offsets are measured in multiples of the normal, so the feature-space
/// half-widths are `alpha · ‖n‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabRegion {
    pub normal: Vec<f64>,
    pub anchor: Vec<f64>,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
}

impl SlabRegion {
    pub fn new(normal: Vec<f64>, anchor: Vec<f64>, alpha_lo: f64, alpha_hi: f64) -> Result<Self> {
        if normal.len() != anchor.len() {
            return Err(Error::DimensionMismatch {
                context: "slab anchor",
                expected: normal.len(),
                got: anchor.len(),
            });
        }
        if normal.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidParameter(
                "slab normal must be nonzero".into(),
            ));
        }
        if !(alpha_lo >= 0.0 && alpha_hi >= 0.0) {
            return Err(Error::InvalidParameter("slab offsets must be >= 0".into()));
        }
        Ok(Self {
            normal,
            anchor,
            alpha_lo,
            alpha_hi,
        })
    }

    fn normal_sq(&self) -> f64 {
        self.normal.iter().map(|v| v * v).sum()
    }

    /// Signed position along the normal in multiples of `n`.
    pub fn offset(&self, z: &[f64]) -> f64 {
        let proj: f64 = self
            .normal
            .iter()
            .zip(z.iter().zip(&self.anchor))
            .map(|(n, (a, b))| n * (a - b))
            .sum();
        proj / self.normal_sq()
    }

    /// Feature-space distances from the anchor hyperplane to the two faces.
    pub fn half_widths(&self) -> (f64, f64) {
        let norm = self.normal_sq().sqrt();
        (self.alpha_lo * norm, self.alpha_hi * norm)
    }
}

impl Region for SlabRegion {
    fn contains(&self, z: &[f64]) -> bool {
        let t = self.offset(z);
        -self.alpha_lo < t && t < self.alpha_hi
    }
}

/// One Gaussian per class with class priors.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianClassModel {
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
    pub priors: Vec<f64>,
}

impl GaussianClassModel {
    pub fn new(
        means: Vec<Vec<f64>>,
        covariances: Vec<DMatrix<f64>>,
        priors: Vec<f64>,
    ) -> Result<Self> {
        let k = priors.len();
        if k == 0 || means.len() != k || covariances.len() != k {
            return Err(Error::InvalidParameter(
                "class model needs one mean, covariance and prior per class".into(),
            ));
        }
        let total: f64 = priors.iter().sum();
        if priors.iter().any(|p| !(*p > 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(
                "class priors must be positive and sum to 1".into(),
            ));
        }
        let h = means[0].len();
        for (c, (m, s)) in means.iter().zip(&covariances).enumerate() {
            if m.len() != h || s.nrows() != h || s.ncols() != h {
                return Err(Error::DimensionMismatch {
                    context: "class model",
                    expected: h,
                    got: m.len(),
                });
            }
            if s.clone().cholesky().is_none() {
                return Err(Error::SingularModel { component: c });
            }
        }
        Ok(Self {
            means,
            covariances,
            priors,
        })
    }

    /// Per-class sample means, covariances plus `reg · I`, and class
    /// frequencies as priors.
    pub fn from_labeled(features: &FeatureMatrix, labels: &LabelVector, reg: f64) -> Result<Self> {
        labels.check_pairs(features)?;
        if !(reg >= 0.0 && reg.is_finite()) {
            return Err(Error::InvalidParameter(
                "reg must be finite and >= 0".into(),
            ));
        }
        let h = features.h();
        let k = labels.k();
        let mut means = Vec::with_capacity(k);
        let mut covariances = Vec::with_capacity(k);
        let mut priors = Vec::with_capacity(k);
        for c in 0..k {
            let rows: Vec<&[f64]> = features
                .rows()
                .zip(labels.as_slice())
                .filter(|(_, l)| **l == c)
                .map(|(r, _)| r)
                .collect();
            if rows.is_empty() {
                return Err(Error::InvalidParameter(format!("class {c} has no samples")));
            }
            let n = rows.len() as f64;
            let mut mean = vec![0.0; h];
            for r in &rows {
                for (m, v) in mean.iter_mut().zip(*r) {
                    *m += v / n;
                }
            }
            let mut cov = DMatrix::from_diagonal_element(h, h, reg);
            for r in &rows {
                for a in 0..h {
                    for b in 0..h {
                        cov[(a, b)] += (r[a] - mean[a]) * (r[b] - mean[b]) / n;
                    }
                }
            }
            means.push(mean);
            covariances.push(cov);
            priors.push(n / features.n() as f64);
        }
        Self::new(means, covariances, priors)
    }

    pub fn k(&self) -> usize {
        self.priors.len()
    }

    pub fn h(&self) -> usize {
        self.means[0].len()
    }

    pub fn sampler(&self) -> Result<MixtureSampler> {
        MixtureSampler::new(&self.priors, &self.means, &self.covariances)
    }
}

/// Solution of the exact two-class slab problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSlab {
    pub slab: SlabRegion,
    pub alpha: f64,
    /// Mass of each class lying on the wrong side of the decision boundary.
    pub crossing_mass: Vec<f64>,
    pub separable: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Finds `α` such that the slab `|w_1·(z - z_0)| < α‖w_1‖²` around the
/// decision boundary holds training mass `ε`, for a two-class head with
/// `w_1 = -w_2`. `z_0` is the point of the boundary closest to the origin.
///
/// Each class contributes the probability of lying closer than `α` to the
/// boundary on its own side, which for a Gaussian class is an erf term:
/// `Σ_i π_i erf((m_i - α‖w_i‖²) / sqrt(2 w_iᵀ Σ_i w_i)) = 1 - 2ε` with
/// `m_i = w_i·(μ_i - z_0)`. Mass crossing to the far side of the boundary
/// is ignored, which is exact for separable classes; `crossing_mass` and
/// `separable` report how much was ignored.
pub fn solve_alpha_exact_k2(
    model: &GaussianClassModel,
    head: &SoftmaxHead,
    epsilon: f64,
) -> Result<ExactSlab> {
    check_epsilon(epsilon)?;
    if model.k() != 2 || head.k() != 2 {
        return Err(Error::InvalidParameter(
            "exact slab needs exactly two classes".into(),
        ));
    }
    if model.h() != head.h() {
        return Err(Error::DimensionMismatch {
            context: "class model vs head",
            expected: head.h(),
            got: model.h(),
        });
    }
    let w = [head.column(0), head.column(1)];
    let scale = head.weight_norm(0).max(head.weight_norm(1));
    if scale == 0.0 {
        return Err(Error::DegenerateWeight { class: 0 });
    }
    let asym = w[0]
        .iter()
        .zip(&w[1])
        .map(|(a, b)| (a + b).abs())
        .fold(0.0, f64::max);
    if asym > 1e-8 * scale.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "exact slab needs w_1 = -w_2 (max deviation {asym:e})"
        )));
    }
    let d: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| a - b).collect();
    let d_sq = dot(&d, &d);
    let db = head.bias()[0] - head.bias()[1];
    let z0: Vec<f64> = d.iter().map(|v| -db * v / d_sq).collect();

    let mut margin = [0.0; 2];
    let mut spread = [0.0; 2];
    let mut w_sq = [0.0; 2];
    for i in 0..2 {
        let rel: Vec<f64> = model.means[i].iter().zip(&z0).map(|(m, z)| m - z).collect();
        margin[i] = dot(&w[i], &rel);
        let sw = &model.covariances[i] * nalgebra::DVector::from_column_slice(&w[i]);
        spread[i] = (2.0 * dot(&w[i], sw.as_slice())).sqrt();
        w_sq[i] = dot(&w[i], &w[i]);
    }
    let crossing_mass: Vec<f64> = (0..2).map(|i| 0.5 * erfc(margin[i] / spread[i])).collect();
    let separable = crossing_mass.iter().all(|m| *m < SEPARABLE_MASS);

    let f = |alpha: f64| -> f64 {
        (0..2)
            .map(|i| model.priors[i] * erf((margin[i] - alpha * w_sq[i]) / spread[i]))
            .sum::<f64>()
            - (1.0 - 2.0 * epsilon)
    };
    if !(f(0.0) > 0.0) {
        return Err(Error::NoRoot(format!(
            "training mass near the boundary already exceeds epsilon = {epsilon}"
        )));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut doublings = 0;
    while f(hi) > 0.0 {
        doublings += 1;
        if doublings > MAX_STEPS {
            return Err(Error::NoRoot(
                "no sign change after 60 bracket doublings".into(),
            ));
        }
        lo = hi;
        hi *= 2.0;
    }
    let mut steps = 0;
    while hi - lo > ALPHA_TOL {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::NoRoot(
                "bisection did not reach tolerance in 60 steps".into(),
            ));
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let alpha = 0.5 * (lo + hi);
    Ok(ExactSlab {
        slab: SlabRegion::new(w[0].clone(), z0, alpha, alpha)?,
        alpha,
        crossing_mass,
        separable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::montecarlo::mc_region_mass;

    #[test]
    fn class_model_from_labels() {
        let f = FeatureMatrix::from_rows(&[
            vec![0.0, 0.0],
            vec![2.0, 0.0],
            vec![5.0, 5.0],
            vec![5.0, 7.0],
            vec![5.0, 6.0],
        ])
        .unwrap();
        let l = LabelVector::new(vec![0, 0, 1, 1, 1], 2).unwrap();
        let m = GaussianClassModel::from_labeled(&f, &l, 0.5).unwrap();
        assert_eq!(m.means[0], vec![1.0, 0.0]);
        assert!((m.covariances[0][(0, 0)] - 1.5).abs() < 1e-15);
        assert!((m.covariances[0][(1, 1)] - 0.5).abs() < 1e-15);
        assert!((m.covariances[1][(1, 1)] - (2.0 / 3.0 + 0.5)).abs() < 1e-12);
        assert!((m.priors[1] - 0.6).abs() < 1e-15);
        let missing = LabelVector::new(vec![0, 0, 0, 0, 0], 2).unwrap();
        assert!(GaussianClassModel::from_labeled(&f, &missing, 0.1).is_err());
    }

    fn scenario(sd2: f64) -> (GaussianClassModel, SoftmaxHead) {
        let model = GaussianClassModel::new(
            vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
            vec![DMatrix::identity(2, 2) * sd2; 2],
            vec![0.5, 0.5],
        )
        .unwrap();
        let head = SoftmaxHead::from_columns(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        (model, head)
    }

    #[test]
    fn symmetric_scenario_closed_form() {
        let (model, head) = scenario(0.01);
        let sol = solve_alpha_exact_k2(&model, &head, 0.05).unwrap();
        // erf((1 - α) / sqrt(0.02)) = 0.9 solved independently.
        let oracle = 1.0 - 0.02f64.sqrt() * 1.163_087_153_676_674_3;
        assert!(
            (sol.alpha - oracle).abs() < 1e-9,
            "{} vs {oracle}",
            sol.alpha
        );
        assert!(sol.separable);
    }

    #[test]
    fn tiny_epsilon_reaches_clusters() {
        let (model, head) = scenario(0.01);
        let sol = solve_alpha_exact_k2(&model, &head, 1e-9).unwrap();
        assert!(sol.alpha > 0.35 && sol.alpha < 0.5, "{}", sol.alpha);
        let m = mc_region_mass(&sol.slab, &model.sampler().unwrap(), 100_000, 1).unwrap();
        assert!(m < 1e-4);
    }

    #[test]
    fn weight_scale_self_consistent() {
        let (model, head) = scenario(0.02);
        let a = solve_alpha_exact_k2(&model, &head, 0.1).unwrap();
        let double = SoftmaxHead::from_columns(&[vec![2.0, 0.0], vec![-2.0, 0.0]]).unwrap();
        let b = solve_alpha_exact_k2(&model, &double, 0.1).unwrap();
        assert!((b.alpha - a.alpha / 2.0).abs() < 1e-9);
        let probe: Vec<[f64; 2]> = (0..200).map(|i| [-1.0 + 0.01 * i as f64, 0.3]).collect();
        for z in probe {
            let t = a.slab.offset(&z);
            if (t.abs() - a.alpha).abs() > 1e-8 {
                assert_eq!(a.slab.contains(&z), b.slab.contains(&z));
            }
        }
    }

    #[test]
    fn slab_mass_is_epsilon() {
        let (model, head) = scenario(0.01);
        let sol = solve_alpha_exact_k2(&model, &head, 0.05).unwrap();
        let n = 200_000;
        let m = mc_region_mass(&sol.slab, &model.sampler().unwrap(), n, 4).unwrap();
        assert!(
            (m - 0.05).abs() < 3.0 * (0.05 * 0.95 / n as f64).sqrt(),
            "{m}"
        );
    }

    #[test]
    fn bias_moves_anchor() {
        let (model, head) = scenario(0.01);
        let biased = head.with_bias(vec![0.2, 0.0]).unwrap();
        let sol = solve_alpha_exact_k2(&model, &biased, 0.05).unwrap();
        // Boundary at 2 z_x + 0.2 = 0.
        assert!((sol.slab.anchor[0] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (model, _) = scenario(0.01);
        let skew = SoftmaxHead::from_columns(&[vec![1.0, 0.0], vec![-1.0, 0.5]]).unwrap();
        assert!(matches!(
            solve_alpha_exact_k2(&model, &skew, 0.05),
            Err(Error::InvalidParameter(_))
        ));
        let (wide, head) = scenario(4.0);
        let sol = solve_alpha_exact_k2(&wide, &head, 0.05);
        assert!(matches!(sol, Err(Error::NoRoot(_))));
        let (over, head) = scenario(0.5);
        let sol = solve_alpha_exact_k2(&over, &head, 0.3).unwrap();
        assert!(!sol.separable);
    }
}
