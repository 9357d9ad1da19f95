//! Pairwise-slab approximation of the max-probability uncertain region for
//! heads with any number of classes.
//!
//! For each class pair `(i, j)` the decision hyperplane `(w_i - w_j)·z +
//! b_i - b_j = 0` is thickened into a slab. A point belongs to the region
//! when its predicted class is `i` or `j` and it lies inside that pair's
//! slab. Each side's offset is the distance at which the max probability
//! reaches the threshold far out along the boundary, where only the two
//! classes compete. There the offset no longer depends on the distance
//! travelled, and the slab sits inside the exact region.

use serde::{Deserialize, Serialize};

use super::montecarlo::Region;
use super::slab::SlabRegion;
use super::threshold::{empirical_threshold, RegionSpec};
use crate::error::{Error, Result};
use crate::estimators::{u_max, EstimatorId};
use crate::features::FeatureMatrix;
use crate::gmm::log_sum_exp;
use crate::head::{argmax, SoftmaxHead};

const ALPHA_TOL: f64 = 1e-10;
const MAX_BISECTIONS: usize = 200;
const MAX_DOUBLINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearFitConfig {
    /// Distance along the boundary, in multiples of the largest weight norm,
    /// at which offsets are first matched.
    pub magnitude_factor: f64,
    /// How many times the distance may grow tenfold while offsets still move.
    pub max_escalations: usize,
}

impl Default for LinearFitConfig {
    fn default() -> Self {
        Self {
            magnitude_factor: 1e3,
            max_escalations: 10,
        }
    }
}

/// Slab for the class pair `(i, j)`, `i < j`. The slab normal is
/// `w_i - w_j`, so `alpha_hi` is the offset into class `i`'s side and
/// `alpha_lo` the offset into class `j`'s side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSlab {
    pub i: usize,
    pub j: usize,
    pub slab: SlabRegion,
    /// Unit direction along the boundary used for fitting.
    pub direction: Vec<f64>,
    /// `min_k (w_i - w_k)·e` over the other classes; offsets are zero unless positive.
    pub margin: f64,
    /// Distance along `direction` at which the offsets were finally matched.
    pub magnitude: f64,
}

impl PairSlab {
    pub fn alpha_i(&self) -> f64 {
        self.slab.alpha_hi
    }

    pub fn alpha_j(&self) -> f64 {
        self.slab.alpha_lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearApproxRegion {
    pub spec: RegionSpec,
    pub head: SoftmaxHead,
    pub pairs: Vec<PairSlab>,
}

impl LinearApproxRegion {
    pub fn pair(&self, i: usize, j: usize) -> Option<&PairSlab> {
        let (a, b) = (i.min(j), i.max(j));
        self.pairs.iter().find(|p| p.i == a && p.j == b)
    }
}

impl Region for LinearApproxRegion {
    fn contains(&self, z: &[f64]) -> bool {
        let top = argmax(&self.head.logits_unchecked(z));
        self.pairs
            .iter()
            .any(|p| (p.i == top || p.j == top) && p.slab.contains(z))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn difference(head: &SoftmaxHead, i: usize, j: usize) -> Result<Vec<f64>> {
    let d: Vec<f64> = head
        .column(i)
        .iter()
        .zip(head.column(j))
        .map(|(a, b)| a - b)
        .collect();
    if d.iter().all(|v| *v == 0.0) {
        return Err(Error::InvalidParameter(format!(
            "classes {i} and {j} have identical weights, so they share no boundary"
        )));
    }
    Ok(d)
}

/// Component of `v` orthogonal to `d`.
fn reject(v: &[f64], d: &[f64]) -> Vec<f64> {
    let coef = dot(v, d) / dot(d, d);
    v.iter().zip(d).map(|(a, b)| a - coef * b).collect()
}

fn normalized(v: Vec<f64>) -> Option<Vec<f64>> {
    let n = dot(&v, &v).sqrt();
    (n > 1e-12).then(|| v.into_iter().map(|x| x / n).collect())
}

/// Direction along the `(i, j)` boundary where those two classes dominate
/// all others at large distances, together with its margin
/// `min_{k≠i,j} (w_i - w_k)·e`.
///
/// The in-plane direction (`w_i + w_j` with the `w_i - w_j` component
/// removed) is tried first in both orientations; directions opposing each
/// other class weight are the fallback. The best-margin candidate wins.
/// When the feature space has no direction orthogonal to `w_i - w_j`, the
/// zero vector is returned.
pub fn far_field_direction(head: &SoftmaxHead, i: usize, j: usize) -> Result<(Vec<f64>, f64)> {
    let d = difference(head, i, j)?;
    let wi = head.column(i);
    let others: Vec<usize> = (0..head.k()).filter(|k| *k != i && *k != j).collect();
    let margin = |e: &[f64]| -> f64 {
        others
            .iter()
            .map(|&k| dot(&wi, e) - dot(&head.column(k), e))
            .fold(f64::INFINITY, f64::min)
    };

    let mut raw: Vec<Vec<f64>> = Vec::new();
    let sum: Vec<f64> = wi.iter().zip(head.column(j)).map(|(a, b)| a + b).collect();
    raw.push(reject(&sum, &d));
    for &k in &others {
        raw.push(reject(
            &head.column(k).iter().map(|v| -v).collect::<Vec<_>>(),
            &d,
        ));
    }
    // Coordinate axes guarantee a candidate whenever one exists.
    for axis in 0..head.h() {
        let mut unit = vec![0.0; head.h()];
        unit[axis] = 1.0;
        raw.push(reject(&unit, &d));
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    for v in raw {
        let Some(e) = normalized(v) else { continue };
        for sign in [1.0, -1.0] {
            let cand: Vec<f64> = e.iter().map(|x| sign * x).collect();
            let m = margin(&cand);
            if best.as_ref().is_none_or(|(_, bm)| m > *bm) {
                best = Some((cand, m));
            }
        }
    }
    Ok(best.unwrap_or_else(|| (vec![0.0; head.h()], margin(&vec![0.0; head.h()]))))
}

/// Offset `t > 0`, in multiples of `w_i - w_j`, at which the probability of
/// class `i` reaches `confidence` along the line
/// `z_0 + magnitude·e + t (w_i - w_j)`, with `z_0` the point of the `(i, j)`
/// boundary closest to the origin. Returns the largest bisection point still
/// below the target, or `None` when the target is never reached.
///
/// Logit differences are formed analytically so large magnitudes do not
/// cancel.
pub fn exact_contour_offset(
    head: &SoftmaxHead,
    i: usize,
    j: usize,
    e: &[f64],
    magnitude: f64,
    confidence: f64,
) -> Result<Option<f64>> {
    let d = difference(head, i, j)?;
    let d_sq = dot(&d, &d);
    let b = head.bias();
    let z0: Vec<f64> = d.iter().map(|v| -(b[i] - b[j]) * v / d_sq).collect();
    let wi = head.column(i);
    // Per other class: (along e, along d, constant) parts of logit_k - logit_i.
    let parts: Vec<(f64, f64, f64)> = (0..head.k())
        .filter(|k| *k != i)
        .map(|k| {
            let diff: Vec<f64> = head.column(k).iter().zip(&wi).map(|(a, b)| a - b).collect();
            if k == j {
                (0.0, -d_sq, 0.0)
            } else {
                (dot(&diff, e), dot(&diff, &d), dot(&diff, &z0) + b[k] - b[i])
            }
        })
        .collect();
    let target = confidence.ln();
    // ln σ_i(t) - ln(confidence)
    let f = |t: f64| -> f64 {
        let mut terms = Vec::with_capacity(parts.len() + 1);
        terms.push(0.0);
        terms.extend(parts.iter().map(|(pe, pd, c)| magnitude * pe + t * pd + c));
        -log_sum_exp(&terms) - target
    };
    if !(confidence > 0.0 && confidence < 1.0) || f(0.0) >= 0.0 {
        return Ok(None);
    }
    let mut lo = 0.0;
    let mut hi = 1.0 / d_sq.sqrt();
    let mut doublings = 0;
    while f(hi) < 0.0 {
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Ok(None);
        }
        lo = hi;
        hi *= 2.0;
    }
    let mut steps = 0;
    while hi - lo > ALPHA_TOL && steps < MAX_BISECTIONS {
        steps += 1;
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Far-field offsets on both sides of the `(i, j)` boundary.
fn fit_pair(
    head: &SoftmaxHead,
    i: usize,
    j: usize,
    confidence: f64,
    cfg: &LinearFitConfig,
) -> Result<PairSlab> {
    let d = difference(head, i, j)?;
    let (e, margin) = far_field_direction(head, i, j)?;
    let max_norm = (0..head.k())
        .map(|k| head.weight_norm(k))
        .fold(0.0, f64::max);
    let mut magnitude = cfg.magnitude_factor * max_norm;
    let mut alphas = (0.0, 0.0);
    if margin > 0.0 {
        let side = |c: f64| -> Result<(f64, f64)> {
            let ai = exact_contour_offset(head, i, j, &e, c, confidence)?.unwrap_or(0.0);
            let aj = exact_contour_offset(head, j, i, &e, c, confidence)?.unwrap_or(0.0);
            Ok((ai, aj))
        };
        alphas = side(magnitude)?;
        for _ in 0..cfg.max_escalations {
            let next = side(magnitude * 10.0)?;
            let moved = (next.0 - alphas.0).abs().max((next.1 - alphas.1).abs());
            magnitude *= 10.0;
            alphas = next;
            if moved <= ALPHA_TOL * 1e-2 {
                break;
            }
        }
    }
    let d_sq = dot(&d, &d);
    let b = head.bias();
    let anchor: Vec<f64> = d.iter().map(|v| -(b[i] - b[j]) * v / d_sq).collect();
    Ok(PairSlab {
        i,
        j,
        slab: SlabRegion::new(d, anchor, alphas.1, alphas.0)?,
        direction: e,
        margin,
        magnitude,
    })
}

/// Fits the linear approximation with the threshold taken from `u_max` on
/// the training features.
pub fn fit_linear_region(
    head: &SoftmaxHead,
    train: &FeatureMatrix,
    epsilon: f64,
) -> Result<LinearApproxRegion> {
    fit_linear_region_with(head, train, epsilon, &LinearFitConfig::default())
}

pub fn fit_linear_region_with(
    head: &SoftmaxHead,
    train: &FeatureMatrix,
    epsilon: f64,
    cfg: &LinearFitConfig,
) -> Result<LinearApproxRegion> {
    if train.h() != head.h() {
        return Err(Error::DimensionMismatch {
            context: "training features vs head",
            expected: head.h(),
            got: train.h(),
        });
    }
    if !(cfg.magnitude_factor > 0.0) {
        return Err(Error::InvalidParameter(
            "magnitude_factor must be > 0".into(),
        ));
    }
    let scores = train
        .rows()
        .map(|z| u_max(head, z))
        .collect::<Result<Vec<_>>>()?;
    let u_star = empirical_threshold(&scores, epsilon)?;
    let spec = RegionSpec::new(epsilon, u_star, EstimatorId::Max)?;
    let confidence = -u_star;
    let mut pairs = Vec::new();
    for i in 0..head.k() {
        for j in i + 1..head.k() {
            pairs.push(fit_pair(head, i, j, confidence, cfg)?);
        }
    }
    Ok(LinearApproxRegion {
        spec,
        head: head.clone(),
        pairs,
    })
}
