//! Full-covariance Gaussian mixtures fitted by expectation maximization.
//!
//! Responsibilities are computed in log space and every density evaluation
//! goes through cached Cholesky factors. Stored covariances already include
//! the diagonal regularization.
//!
//! The covariance update is guarded so that each iteration never lowers the
//! expected complete-data log-likelihood: if the regularized scatter matrix
//! would score worse than the previous covariance, the previous covariance
//! is kept for that component. This makes the loop a generalized EM, so the
//! data log-likelihood is non-decreasing even with regularization.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, LabelVector};
use crate::rng;

const FORMAT_VERSION: u32 = 1;
const MAX_REINITS: usize = 3;
/// Components with less total responsibility than this are treated as empty.
const EMPTY_MASS: f64 = 1e-6;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Elementwise map applied to features before fitting and scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureTransform {
    #[default]
    Identity,
    /// `sign(z) · ln(1 + |z|)`, which is `ln(1 + z)` on nonnegative activations.
    SignedLog,
}

impl FeatureTransform {
    fn apply(self, v: f64) -> f64 {
        match self {
            FeatureTransform::Identity => v,
            FeatureTransform::SignedLog => v.signum() * v.abs().ln_1p(),
        }
    }

    fn derivative(self, v: f64) -> f64 {
        match self {
            FeatureTransform::Identity => 1.0,
            FeatureTransform::SignedLog => 1.0 / (1.0 + v.abs()),
        }
    }

    pub fn transform_row(self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|v| self.apply(*v)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    Labels,
    KmeansPp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmConfig {
    /// Number of mixture components; defaults to the number of label classes.
    pub k_components: Option<usize>,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub reg: f64,
    pub seed: u64,
    /// Defaults to `labels` when labels are supplied and `kmeans_pp` otherwise.
    pub init: Option<InitMethod>,
    pub transform: FeatureTransform,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            k_components: None,
            max_iter: 200,
            rel_tol: 1e-6,
            reg: 1e-5,
            seed: 0,
            init: None,
            transform: FeatureTransform::Identity,
        }
    }
}

impl EmConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter("rel_tol must be > 0".into()));
        }
        if !(self.reg >= 0.0 && self.reg.is_finite()) {
            return Err(Error::InvalidParameter(
                "reg must be finite and >= 0".into(),
            ));
        }
        if self.k_components == Some(0) {
            return Err(Error::InvalidParameter("k_components must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Factor {
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl Factor {
    fn new(cov: &DMatrix<f64>, component: usize) -> Result<Self> {
        let chol = cov
            .clone()
            .cholesky()
            .ok_or(Error::SingularModel { component })?;
        let log_det = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|d| d.ln())
                .sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::SingularModel { component });
        }
        Ok(Self { chol, log_det })
    }

    /// `dᵀ Σ⁻¹ d` by forward substitution on the lower factor.
    fn mahalanobis_sq(&self, d: &[f64]) -> f64 {
        let l = self.chol.l_dirty();
        let n = d.len();
        let mut y = vec![0.0; n];
        let mut total = 0.0;
        for i in 0..n {
            let mut s = d[i];
            for j in 0..i {
                s -= l[(i, j)] * y[j];
            }
            y[i] = s / l[(i, i)];
            total += y[i] * y[i];
        }
        total
    }
}

/// Weighted Gaussian mixture with full covariances.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "MixtureRepr", into = "MixtureRepr")]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<DMatrix<f64>>,
    reg: f64,
    transform: FeatureTransform,
    factors: Vec<Factor>,
}

impl PartialEq for GaussianMixture {
    fn eq(&self, other: &Self) -> bool {
        self.weights == other.weights
            && self.means == other.means
            && self.covariances == other.covariances
            && self.reg == other.reg
            && self.transform == other.transform
    }
}

impl GaussianMixture {
    /// Builds a mixture from explicit parameters. Covariances are used as
    /// given; `reg` is recorded but not added again.
    pub fn new(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<DMatrix<f64>>,
        reg: f64,
        transform: FeatureTransform,
    ) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::EmptyInput("mixture has no components"));
        }
        if means.len() != k || covariances.len() != k {
            return Err(Error::DimensionMismatch {
                context: "mixture components",
                expected: k,
                got: means.len().min(covariances.len()),
            });
        }
        let h = means[0].len();
        if h == 0 {
            return Err(Error::InvalidParameter(
                "mixture dimension must be >= 1".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(
                "mixture weights must be positive and sum to 1".into(),
            ));
        }
        let mut factors = Vec::with_capacity(k);
        for (c, (mean, cov)) in means.iter().zip(&covariances).enumerate() {
            if mean.len() != h {
                return Err(Error::DimensionMismatch {
                    context: "mixture mean",
                    expected: h,
                    got: mean.len(),
                });
            }
            if cov.nrows() != h || cov.ncols() != h {
                return Err(Error::DimensionMismatch {
                    context: "mixture covariance",
                    expected: h,
                    got: cov.nrows(),
                });
            }
            if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("mixture parameters"));
            }
            let scale = cov.diagonal().amax().max(1.0);
            if (cov - cov.transpose()).amax() > 1e-10 * scale {
                return Err(Error::InvalidParameter(format!(
                    "covariance {c} is not symmetric"
                )));
            }
            factors.push(Factor::new(cov, c)?);
        }
        Ok(Self {
            weights,
            means,
            covariances,
            reg,
            transform,
            factors,
        })
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn h(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn covariances(&self) -> &[DMatrix<f64>] {
        &self.covariances
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    pub fn transform(&self) -> FeatureTransform {
        self.transform
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.h() {
            return Err(Error::DimensionMismatch {
                context: "mixture input",
                expected: self.h(),
                got: z.len(),
            });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mixture input"));
        }
        Ok(())
    }

    /// Squared Mahalanobis distance to component `c`, in transformed space.
    pub fn mahalanobis_sq(&self, c: usize, z: &[f64]) -> Result<f64> {
        self.check(z)?;
        let x = self.transform.transform_row(z);
        Ok(self.mahalanobis_transformed(c, &x))
    }

    fn mahalanobis_transformed(&self, c: usize, x: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(&self.means[c]).map(|(a, b)| a - b).collect();
        self.factors[c].mahalanobis_sq(&d)
    }

    /// `ln π_c + ln N(x; μ_c, Σ_c)` for every component.
    fn component_log_terms(&self, x: &[f64]) -> Vec<f64> {
        let h = self.h() as f64;
        (0..self.k())
            .map(|c| {
                let m = self.mahalanobis_transformed(c, x);
                self.weights[c].ln() - 0.5 * (h * LN_2PI + self.factors[c].log_det + m)
            })
            .collect()
    }

    /// `ln q(z)` where the density is taken over transformed features.
    pub fn log_density(&self, z: &[f64]) -> Result<f64> {
        self.check(z)?;
        let x = self.transform.transform_row(z);
        Ok(log_sum_exp(&self.component_log_terms(&x)))
    }

    /// Posterior component probabilities at `z`.
    pub fn responsibilities(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z)?;
        let x = self.transform.transform_row(z);
        let terms = self.component_log_terms(&x);
        let lse = log_sum_exp(&terms);
        Ok(terms.iter().map(|t| (t - lse).exp()).collect())
    }

    /// Gradient of `-ln q(z)` with respect to the raw input `z`.
    pub fn grad_neg_log_density(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z)?;
        let x = self.transform.transform_row(z);
        let terms = self.component_log_terms(&x);
        let lse = log_sum_exp(&terms);
        let mut grad = DVector::zeros(self.h());
        for c in 0..self.k() {
            let r = (terms[c] - lse).exp();
            if r == 0.0 {
                continue;
            }
            let d =
                DVector::from_iterator(self.h(), x.iter().zip(&self.means[c]).map(|(a, b)| a - b));
            grad += self.factors[c].chol.solve(&d) * r;
        }
        Ok(grad
            .iter()
            .zip(z)
            .map(|(g, v)| g * self.transform.derivative(*v))
            .collect())
    }

    /// Total log-likelihood of the rows, in transformed space.
    pub fn total_log_likelihood(&self, features: &FeatureMatrix) -> Result<f64> {
        if features.h() != self.h() {
            return Err(Error::DimensionMismatch {
                context: "mixture input",
                expected: self.h(),
                got: features.h(),
            });
        }
        let per_row: Vec<f64> = features
            .as_slice()
            .par_chunks_exact(self.h())
            .map(|z| log_sum_exp(&self.component_log_terms(&self.transform.transform_row(z))))
            .collect();
        Ok(per_row.iter().sum())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[derive(Serialize, Deserialize)]
struct MixtureRepr {
    format_version: u32,
    k: usize,
    h: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    /// Each covariance flattened row-major.
    covariances: Vec<Vec<f64>>,
    reg: f64,
    #[serde(default)]
    transform: FeatureTransform,
}

impl From<GaussianMixture> for MixtureRepr {
    fn from(g: GaussianMixture) -> Self {
        let h = g.h();
        MixtureRepr {
            format_version: FORMAT_VERSION,
            k: g.k(),
            h,
            covariances: g
                .covariances
                .iter()
                .map(|c| c.transpose().iter().copied().collect())
                .collect(),
            weights: g.weights,
            means: g.means,
            reg: g.reg,
            transform: g.transform,
        }
    }
}

impl TryFrom<MixtureRepr> for GaussianMixture {
    type Error = Error;

    fn try_from(r: MixtureRepr) -> Result<Self> {
        if r.format_version != FORMAT_VERSION {
            return Err(Error::format(
                "mixture json",
                format!("unsupported format_version {}", r.format_version),
            ));
        }
        if r.weights.len() != r.k {
            return Err(Error::format(
                "mixture json",
                "weights length differs from k",
            ));
        }
        let covariances = r
            .covariances
            .iter()
            .map(|flat| {
                if flat.len() != r.h * r.h {
                    Err(Error::format("mixture json", "covariance has wrong size"))
                } else {
                    Ok(DMatrix::from_row_slice(r.h, r.h, flat))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        GaussianMixture::new(r.weights, r.means, covariances, r.reg, r.transform)
    }
}

/// Outcome of an EM run.
#[derive(Debug, Clone)]
pub struct EmFit {
    pub mixture: GaussianMixture,
    /// Total log-likelihood at the start of each iteration and at the end.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub reinitializations: usize,
}

pub fn fit_em(
    features: &FeatureMatrix,
    labels: Option<&LabelVector>,
    cfg: &EmConfig,
) -> Result<GaussianMixture> {
    Ok(fit_em_traced(features, labels, cfg)?.mixture)
}

/// Weighted moments `(Σ r, mean, Σ r (x-μ)(x-μ)ᵀ / Σ r)` of the rows.
fn weighted_moments(x: &[Vec<f64>], r: &[f64], h: usize) -> (f64, Vec<f64>, DMatrix<f64>) {
    let mass: f64 = r.iter().sum();
    let mut mean = vec![0.0; h];
    for (row, w) in x.iter().zip(r) {
        if *w == 0.0 {
            continue;
        }
        for (m, v) in mean.iter_mut().zip(row) {
            *m += w * v;
        }
    }
    for m in &mut mean {
        *m /= mass;
    }
    let mut scatter = DMatrix::zeros(h, h);
    let mut d = vec![0.0; h];
    for (row, w) in x.iter().zip(r) {
        if *w == 0.0 {
            continue;
        }
        for ((di, v), m) in d.iter_mut().zip(row).zip(&mean) {
            *di = v - m;
        }
        for a in 0..h {
            let wa = w * d[a];
            for b in 0..=a {
                scatter[(a, b)] += wa * d[b];
            }
        }
    }
    for a in 0..h {
        for b in 0..=a {
            let v = scatter[(a, b)] / mass;
            scatter[(a, b)] = v;
            scatter[(b, a)] = v;
        }
    }
    (mass, mean, scatter)
}

fn regularized(mut s: DMatrix<f64>, reg: f64) -> DMatrix<f64> {
    for i in 0..s.nrows() {
        s[(i, i)] += reg;
    }
    s
}

/// `ln|Σ| + tr(Σ⁻¹ S)`: minus twice the per-sample expected log-likelihood
/// of a component with covariance `Σ` and scatter `S`, up to constants.
fn covariance_objective(factor: &Factor, scatter: &DMatrix<f64>) -> f64 {
    factor.log_det + factor.chol.solve(scatter).trace()
}

struct EmState {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<DMatrix<f64>>,
}

fn hard_responsibilities(assign: &[usize], k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|c| {
            assign
                .iter()
                .map(|a| if *a == c { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

fn kmeans_pp(x: &[Vec<f64>], k: usize, seed: u64) -> Vec<usize> {
    let n = x.len();
    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>();
    let mut rng = rng::seeded(seed);
    let mut centers: Vec<Vec<f64>> = vec![x[rng.random_range(0..n)].clone()];
    let mut best: Vec<f64> = x.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = best.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, d) in best.iter().enumerate() {
                if target < *d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(x[next].clone());
        for (b, p) in best.iter_mut().zip(x) {
            *b = b.min(dist2(p, &centers[centers.len() - 1]));
        }
    }
    let mut assign = vec![0usize; n];
    for _ in 0..10 {
        for (a, p) in assign.iter_mut().zip(x) {
            let mut best_c = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = dist2(p, center);
                if d < best_d {
                    best_d = d;
                    best_c = c;
                }
            }
            *a = best_c;
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = x
                .iter()
                .zip(&assign)
                .filter(|(_, a)| **a == c)
                .map(|(p, _)| p)
                .collect();
            if members.is_empty() {
                continue;
            }
            for (d, cv) in center.iter_mut().enumerate() {
                *cv = members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64;
            }
        }
    }
    assign
}

/// Runs EM and returns the fitted mixture with its log-likelihood trace.
pub fn fit_em_traced(
    features: &FeatureMatrix,
    labels: Option<&LabelVector>,
    cfg: &EmConfig,
) -> Result<EmFit> {
    cfg.validate()?;
    if let Some(l) = labels {
        l.check_pairs(features)?;
    }
    let k = match (cfg.k_components, labels) {
        (Some(k), _) => k,
        (None, Some(l)) => l.k(),
        (None, None) => {
            return Err(Error::InvalidParameter(
                "k_components is required when no labels are given".into(),
            ))
        }
    };
    let init = cfg.init.unwrap_or(if labels.is_some() {
        InitMethod::Labels
    } else {
        InitMethod::KmeansPp
    });
    let n = features.n();
    let h = features.h();
    let x: Vec<Vec<f64>> = features
        .rows()
        .map(|z| cfg.transform.transform_row(z))
        .collect();
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("transformed features"));
    }

    let resp = match init {
        InitMethod::Labels => {
            let l = labels.ok_or_else(|| {
                Error::InvalidParameter("labels initialization needs labels".into())
            })?;
            if l.k() != k {
                return Err(Error::InvalidParameter(format!(
                    "labels initialization needs k_components = {} (number of classes), got {k}",
                    l.k()
                )));
            }
            hard_responsibilities(l.as_slice(), k)
        }
        InitMethod::KmeansPp => {
            if k > n {
                return Err(Error::InvalidParameter(format!(
                    "cannot place {k} components on {n} samples"
                )));
            }
            hard_responsibilities(&kmeans_pp(&x, k, cfg.seed), k)
        }
    };

    let global_cov = {
        let (_, _, s) = weighted_moments(&x, &vec![1.0; n], h);
        regularized(s, cfg.reg)
    };

    let mut reinitializations = 0usize;
    let mut state = EmState {
        weights: vec![0.0; k],
        means: vec![vec![0.0; h]; k],
        covariances: vec![DMatrix::zeros(h, h); k],
    };
    let mut old_factors: Option<Vec<Factor>> = None;
    let mut row_ll: Vec<f64> = vec![0.0; n];
    let mut resp = resp;
    let mut trace = Vec::new();
    let mut iterations = 0usize;
    let mut converged = false;

    loop {
        // M-step from the current responsibilities.
        for c in 0..k {
            let (mass, mean, scatter) = weighted_moments(&x, &resp[c], h);
            if !(mass >= EMPTY_MASS) {
                reinitializations += 1;
                if reinitializations > MAX_REINITS {
                    return Err(Error::EmptyComponent {
                        component: c,
                        retries: MAX_REINITS,
                    });
                }
                // Reseed at the worst-explained sample with the global spread.
                let worst = if old_factors.is_some() {
                    row_ll
                        .iter()
                        .enumerate()
                        .fold(0, |b, (i, v)| if *v < row_ll[b] { i } else { b })
                } else {
                    c % n
                };
                state.weights[c] = 1.0 / n as f64;
                state.means[c] = x[worst].clone();
                state.covariances[c] = global_cov.clone();
                continue;
            }
            let candidate = regularized(scatter.clone(), cfg.reg);
            let keep_old = match &old_factors {
                Some(f) => {
                    let cand = Factor::new(&candidate, c)?;
                    covariance_objective(&f[c], &scatter) < covariance_objective(&cand, &scatter)
                }
                None => false,
            };
            state.weights[c] = mass / n as f64;
            state.means[c] = mean;
            if !keep_old {
                state.covariances[c] = candidate;
            }
        }
        let total: f64 = state.weights.iter().sum();
        for w in &mut state.weights {
            *w /= total;
        }
        let mixture = GaussianMixture::new(
            state.weights.clone(),
            state.means.clone(),
            state.covariances.clone(),
            cfg.reg,
            cfg.transform,
        )?;

        // E-step.
        let rows: Vec<(f64, Vec<f64>)> = x
            .par_iter()
            .map(|xi| {
                let terms = mixture.component_log_terms(xi);
                let lse = log_sum_exp(&terms);
                (lse, terms.iter().map(|t| (t - lse).exp()).collect())
            })
            .collect();
        let ll: f64 = rows.iter().map(|(l, _)| l).sum();
        if !ll.is_finite() {
            return Err(Error::Numerical("EM log-likelihood is not finite".into()));
        }
        for (i, (l, r)) in rows.iter().enumerate() {
            row_ll[i] = *l;
            for c in 0..k {
                resp[c][i] = r[c];
            }
        }
        if let Some(prev) = trace.last().copied() {
            if ll - prev <= cfg.rel_tol * f64::abs(prev) {
                converged = true;
            }
        }
        trace.push(ll);
        old_factors = Some(mixture.factors.clone());
        if converged || iterations >= cfg.max_iter {
            return Ok(EmFit {
                mixture,
                log_likelihood: trace,
                iterations,
                converged,
                reinitializations,
            });
        }
        iterations += 1;
    }
}
