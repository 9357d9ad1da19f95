//! Decision-boundary structures: the equiangular optimum, fixed
//! counterfactual heads, audits of trained heads and the regularized
//! cross-entropy used to compare them.
//!
//! The optimum places the K class weights at the vertices of a regular
//! simplex centred on the origin: equal norms, zero bias, zero sum and
//! pairwise cosine `-1/(K-1)`.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, LabelVector};
use crate::head::{decompose, SoftmaxHead};
use crate::metrics::stats::{Histogram, Summary};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimalStructureSpec {
    pub k: usize,
    pub h: usize,
    /// Common weight norm.
    #[serde(default = "default_c1")]
    pub c1: f64,
    /// Cluster centres for synthetic features sit at `c3 · w_i`.
    #[serde(default = "default_c3")]
    pub c3: f64,
}

fn default_c1() -> f64 {
    1.0
}

fn default_c3() -> f64 {
    5.0
}

impl OptimalStructureSpec {
    pub fn new(k: usize, h: usize) -> Self {
        Self {
            k,
            h,
            c1: default_c1(),
            c3: default_c3(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidParameter(format!(
                "need K >= 2, got {}",
                self.k
            )));
        }
        if self.h + 1 < self.k {
            return Err(Error::InvalidParameter(format!(
                "the simplex of {} classes needs H >= {}, got {}",
                self.k,
                self.k - 1,
                self.h
            )));
        }
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(Error::InvalidParameter("c1 must be positive".into()));
        }
        Ok(())
    }
}

/// Random `rows × cols` matrix with orthonormal columns.
fn random_orthonormal(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng::seeded(seed);
    let g = DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut r));
    g.qr().q().columns(0, cols).into_owned()
}

/// Regular simplex vertices in `R^(K-1)` with norm `c1`, one per row.
fn simplex_vertices(k: usize, c1: f64) -> DMatrix<f64> {
    let kf = k as f64;
    let centering = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { 0.0 } - 1.0 / kf);
    let basis = centering.columns(0, k - 1).into_owned().qr().q();
    basis * (c1 / (1.0 - 1.0 / kf).sqrt())
}

pub fn gen_optimal_head(spec: &OptimalStructureSpec, seed: u64) -> Result<SoftmaxHead> {
    spec.validate()?;
    let vertices = simplex_vertices(spec.k, spec.c1);
    let embed = random_orthonormal(spec.h, spec.k - 1, seed);
    SoftmaxHead::new(embed * vertices.transpose(), DVector::zeros(spec.k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CounterfactualKind {
    Sandwich,
    Stack,
    Lopsided,
}

impl std::str::FromStr for CounterfactualKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sandwich" => Ok(Self::Sandwich),
            "stack" => Ok(Self::Stack),
            "lopsided" => Ok(Self::Lopsided),
            other => Err(Error::InvalidParameter(format!(
                "unknown head structure {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for CounterfactualKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sandwich => "sandwich",
            Self::Stack => "stack",
            Self::Lopsided => "lopsided",
        })
    }
}

/// Constants used to build a counterfactual head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadMetadata {
    pub kind: CounterfactualKind,
    pub c: f64,
    /// Weight vectors in the 2-D plane before embedding, one per class.
    pub plane_weights: Vec<[f64; 2]>,
    pub biases: Vec<f64>,
    /// Orthonormal `H × 2` embedding, column-major.
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualHead {
    pub head: SoftmaxHead,
    pub metadata: HeadMetadata,
}

/// Three-class heads with deliberately poor structure, embedded in the
/// same seeded plane as the optimal head of the same seed:
///
/// * sandwich: `(0, c)`, `(-c, 0)`, `(c, 0)`;
/// * stack: parallel weights `c`, `2c`, `3c` along one axis with biases
///   `0`, `-c²`, `-3c²`, so the boundaries are parallel lines at `c` and `2c`;
/// * lopsided: the optimal directions with norms `c`, `c`, `4c`.
pub fn gen_counterfactual_head(
    kind: CounterfactualKind,
    k: usize,
    h: usize,
    c: f64,
    seed: u64,
) -> Result<CounterfactualHead> {
    if k != 3 {
        return Err(Error::InvalidParameter(format!(
            "counterfactual heads have 3 classes, got {k}"
        )));
    }
    if h < 2 {
        return Err(Error::InvalidParameter(
            "counterfactual heads need H >= 2".into(),
        ));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(
            "weight scale must be positive".into(),
        ));
    }
    let (plane, biases): (Vec<[f64; 2]>, Vec<f64>) = match kind {
        CounterfactualKind::Sandwich => (vec![[0.0, c], [-c, 0.0], [c, 0.0]], vec![0.0; 3]),
        CounterfactualKind::Stack => (
            vec![[c, 0.0], [2.0 * c, 0.0], [3.0 * c, 0.0]],
            vec![0.0, -c * c, -3.0 * c * c],
        ),
        CounterfactualKind::Lopsided => {
            let v = simplex_vertices(3, 1.0);
            let norms = [c, c, 4.0 * c];
            (
                (0..3)
                    .map(|i| [v[(i, 0)] * norms[i], v[(i, 1)] * norms[i]])
                    .collect(),
                vec![0.0; 3],
            )
        }
    };
    let embed = random_orthonormal(h, 2, seed);
    let planar = DMatrix::from_fn(2, 3, |r, col| plane[col][r]);
    let head = SoftmaxHead::new(&embed * planar, DVector::from_vec(biases.clone()))?;
    Ok(CounterfactualHead {
        head,
        metadata: HeadMetadata {
            kind,
            c,
            plane_weights: plane,
            biases,
            embedding: embed.iter().copied().collect(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub k: usize,
    pub h: usize,
    pub weight_norms: Vec<f64>,
    pub biases: Vec<f64>,
    /// Cosines for pairs `(i, j)`, `i < j`, in lexicographic order.
    pub pairwise_cos: Vec<f64>,
    pub target_cos: f64,
    pub mean_abs_deviation: f64,
    pub max_abs_deviation: f64,
    /// Population standard deviation of the norms over their mean.
    pub norm_cv: f64,
    pub max_abs_bias: f64,
    pub cos_histogram: Histogram,
    pub norm_histogram: Histogram,
    pub bias_histogram: Histogram,
}

pub fn audit_head(head: &SoftmaxHead) -> Result<StructureReport> {
    let k = head.k();
    let norms: Vec<f64> = (0..k).map(|i| head.weight_norm(i)).collect();
    if let Some(class) = norms.iter().position(|n| *n == 0.0) {
        return Err(Error::DegenerateWeight { class });
    }
    let gram = head.weights().transpose() * head.weights();
    let mut cos = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            cos.push((gram[(i, j)] / (norms[i] * norms[j])).clamp(-1.0, 1.0));
        }
    }
    let target = -1.0 / (k as f64 - 1.0);
    let dev: Vec<f64> = cos.iter().map(|c| (c - target).abs()).collect();
    let norm_summary = Summary::of(&norms)?;
    let biases: Vec<f64> = head.bias().iter().copied().collect();
    let max_abs_bias = biases.iter().map(|b| b.abs()).fold(0.0, f64::max);
    let max_norm = norm_summary.max;
    Ok(StructureReport {
        k,
        h: head.h(),
        mean_abs_deviation: dev.iter().sum::<f64>() / dev.len() as f64,
        max_abs_deviation: dev.iter().copied().fold(0.0, f64::max),
        norm_cv: norm_summary.std / norm_summary.mean,
        max_abs_bias,
        cos_histogram: Histogram::new(&cos, -1.0, 1.0, 40),
        norm_histogram: Histogram::new(&norms, 0.0, max_norm * 1.05, 20),
        bias_histogram: Histogram::new(
            &biases,
            -max_abs_bias.max(1e-12),
            max_abs_bias.max(1e-12),
            20,
        ),
        weight_norms: norms,
        biases,
        pairwise_cos: cos,
        target_cos: target,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleStats {
    pub z_norm: Vec<f64>,
    pub max_cos: Vec<f64>,
    pub z_norm_summary: Summary,
    pub max_cos_summary: Summary,
    pub z_norm_histogram: Histogram,
    pub max_cos_histogram: Histogram,
}

/// `‖z‖` and `max_i cos θ_{z,i}` for every row, with summaries.
pub fn angle_stats(features: &FeatureMatrix, head: &SoftmaxHead) -> Result<AngleStats> {
    let mut z_norm = Vec::with_capacity(features.n());
    let mut max_cos = Vec::with_capacity(features.n());
    for z in features.rows() {
        let d = decompose(head, z)?;
        z_norm.push(d.z_norm);
        max_cos.push(d.max_cos());
    }
    let zs = Summary::of(&z_norm)?;
    Ok(AngleStats {
        z_norm_histogram: Histogram::new(&z_norm, 0.0, zs.max.max(1e-12), 30),
        max_cos_histogram: Histogram::new(&max_cos, -1.0, 1.0, 40),
        z_norm_summary: zs,
        max_cos_summary: Summary::of(&max_cos)?,
        z_norm,
        max_cos,
    })
}

/// Mean cross-entropy plus `λ1 Σ_i (‖w_i‖² + b_i²)`.
pub fn regularized_xent(
    features: &FeatureMatrix,
    labels: &LabelVector,
    head: &SoftmaxHead,
    lambda1: f64,
) -> Result<f64> {
    labels.check_pairs(features)?;
    if labels.k() > head.k() {
        if let Some(&label) = labels.as_slice().iter().find(|l| **l >= head.k()) {
            return Err(Error::LabelOutOfRange { label, k: head.k() });
        }
    }
    if !(lambda1 >= 0.0) {
        return Err(Error::InvalidParameter("lambda1 must be >= 0".into()));
    }
    let mut total = 0.0;
    for (z, &y) in features.rows().zip(labels.as_slice()) {
        let logits = head.logits(z)?;
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        total += lse - logits[y];
    }
    let penalty = head
        .weights()
        .iter()
        .chain(head.bias().iter())
        .map(|v| v * v)
        .sum::<f64>();
    Ok(total / features.n() as f64 + lambda1 * penalty)
}

/// Labelled features clustered at `c3 · w_i` with isotropic noise.
pub fn clusters_at_weights(
    head: &SoftmaxHead,
    c3: f64,
    noise_sd: f64,
    per_class: usize,
    seed: u64,
) -> Result<(FeatureMatrix, LabelVector)> {
    if per_class == 0 {
        return Err(Error::InvalidParameter("per_class must be >= 1".into()));
    }
    let mut r = rng::seeded(seed);
    let mut data = Vec::with_capacity(head.k() * per_class * head.h());
    let mut labels = Vec::with_capacity(head.k() * per_class);
    for c in 0..head.k() {
        let w = head.column(c);
        for _ in 0..per_class {
            for v in &w {
                let e: f64 = StandardNormal.sample(&mut r);
                data.push(c3 * v + noise_sd * e);
            }
            labels.push(c);
        }
    }
    Ok((
        FeatureMatrix::new(head.k() * per_class, head.h(), data)?,
        LabelVector::new(labels, head.k())?,
    ))
}
