//! The softmax head and the magnitude/angle view of its logits.
//!
//! Logits are `w_i · z + b_i` with `W` stored as an `H × K` matrix whose
//! columns are the class weight vectors. The bias is kept explicit rather
//! than absorbed into an appended constant feature.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HeadRepr", into = "HeadRepr")]
pub struct SoftmaxHead {
    w: DMatrix<f64>,
    b: DVector<f64>,
}

impl SoftmaxHead {
    pub fn new(w: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if w.ncols() < 2 {
            return Err(Error::InvalidParameter(format!(
                "softmax head needs at least 2 classes, got {}",
                w.ncols()
            )));
        }
        if w.nrows() < 1 {
            return Err(Error::InvalidParameter(
                "feature dimension must be >= 1".into(),
            ));
        }
        if b.len() != w.ncols() {
            return Err(Error::DimensionMismatch {
                context: "head bias",
                expected: w.ncols(),
                got: b.len(),
            });
        }
        if w.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("softmax head"));
        }
        Ok(Self { w, b })
    }

    /// Head with zero bias built from class weight vectors given as columns.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let k = columns.len();
        let h = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != h) {
            return Err(Error::DimensionMismatch {
                context: "head columns",
                expected: h,
                got: bad.len(),
            });
        }
        let w = DMatrix::from_fn(h, k, |r, c| columns[c][r]);
        Self::new(w, DVector::zeros(k))
    }

    pub fn with_bias(mut self, b: Vec<f64>) -> Result<Self> {
        let b = DVector::from_vec(b);
        Self::new(std::mem::take(&mut self.w), b)
    }

    /// Number of classes.
    pub fn k(&self) -> usize {
        self.w.ncols()
    }

    /// Feature dimension.
    pub fn h(&self) -> usize {
        self.w.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn bias(&self) -> &DVector<f64> {
        &self.b
    }

    /// Weight vector of class `i` as an owned vector.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.w.column(i).iter().copied().collect()
    }

    pub fn weight_norm(&self, i: usize) -> f64 {
        self.w.column(i).norm()
    }

    fn check_input(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.h() {
            return Err(Error::DimensionMismatch {
                context: "feature vector",
                expected: self.h(),
                got: z.len(),
            });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector"));
        }
        Ok(())
    }

    /// Raw logits `w_i · z + b_i`.
    pub fn logits(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_input(z)?;
        Ok(self.logits_unchecked(z))
    }

    pub(crate) fn logits_unchecked(&self, z: &[f64]) -> Vec<f64> {
        (0..self.k())
            .map(|i| {
                let col = self.w.column(i);
                col.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + self.b[i]
            })
            .collect()
    }

    /// Logits with the class weights applied to `scale · z` and, when
    /// `scale_bias` is set, the bias scaled as well.
    pub(crate) fn scaled_logits(
        &self,
        z: &[f64],
        scale: f64,
        scale_bias: bool,
    ) -> Result<Vec<f64>> {
        let mut logits = self.logits(z)?;
        for (i, l) in logits.iter_mut().enumerate() {
            let b = self.b[i];
            let wz = *l - b;
            *l = scale * wz + if scale_bias { scale * b } else { b };
        }
        Ok(logits)
    }
}

#[derive(Serialize, Deserialize)]
struct HeadRepr {
    h: usize,
    k: usize,
    /// Row-major `H × K`.
    w: Vec<f64>,
    b: Vec<f64>,
}

impl From<SoftmaxHead> for HeadRepr {
    fn from(head: SoftmaxHead) -> Self {
        let (h, k) = (head.h(), head.k());
        let w = (0..h)
            .flat_map(|r| (0..k).map(move |c| (r, c)))
            .map(|(r, c)| head.w[(r, c)])
            .collect();
        HeadRepr {
            h,
            k,
            w,
            b: head.b.iter().copied().collect(),
        }
    }
}

impl TryFrom<HeadRepr> for SoftmaxHead {
    type Error = Error;

    fn try_from(r: HeadRepr) -> Result<Self> {
        if r.w.len() != r.h * r.k {
            return Err(Error::DimensionMismatch {
                context: "serialized head weights",
                expected: r.h * r.k,
                got: r.w.len(),
            });
        }
        SoftmaxHead::new(
            DMatrix::from_row_slice(r.h, r.k, &r.w),
            DVector::from_vec(r.b),
        )
    }
}

/// Softmax of a logit vector using max-logit subtraction.
pub fn softmax_logits(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

/// Class probabilities `σ(z)` for the head.
pub fn softmax(head: &SoftmaxHead, z: &[f64]) -> Result<Vec<f64>> {
    Ok(softmax_logits(&head.logits(z)?))
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `‖z‖` and the cosine between `z` and every class weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleDecomposition {
    pub z_norm: f64,
    pub cos_theta: Vec<f64>,
    /// Class with the largest logit (bias included), lowest index on ties.
    pub argmax_class: usize,
}

impl AngleDecomposition {
    pub fn max_cos(&self) -> f64 {
        self.cos_theta
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn decompose(head: &SoftmaxHead, z: &[f64]) -> Result<AngleDecomposition> {
    let logits = head.logits(z)?;
    let norms: Vec<f64> = (0..head.k()).map(|i| head.weight_norm(i)).collect();
    if let Some(class) = norms.iter().position(|n| *n == 0.0) {
        return Err(Error::DegenerateWeight { class });
    }
    let z_norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cos_theta = if z_norm == 0.0 {
        vec![0.0; head.k()]
    } else {
        (0..head.k())
            .map(|i| {
                let wz = logits[i] - head.b[i];
                (wz / (norms[i] * z_norm)).clamp(-1.0, 1.0)
            })
            .collect()
    };
    Ok(AngleDecomposition {
        z_norm,
        cos_theta,
        argmax_class: argmax(&logits),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sandwich() -> SoftmaxHead {
        SoftmaxHead::from_columns(&[vec![0.0, 1.0], vec![-1.0, 0.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn zero_input_gives_uniform() {
        let w = DMatrix::from_row_slice(2, 3, &[0.3, -1.2, 4.0, 2.0, 0.1, -0.7]);
        let head = SoftmaxHead::new(w, DVector::zeros(3)).unwrap();
        let p = softmax(&head, &[0.0, 0.0]).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sandwich_counterexample_values() {
        let head = sandwich();
        let p1 = softmax(&head, &[1.0, 0.0]).unwrap();
        let p2 = softmax(&head, &[0.9, -0.44]).unwrap();
        let m1 = p1.iter().copied().fold(0.0, f64::max);
        let m2 = p2.iter().copied().fold(0.0, f64::max);
        assert!((m1 - 0.665).abs() < 5e-4, "{m1}");
        assert!((m2 - 0.700).abs() < 1e-3, "{m2}");
    }

    #[test]
    fn dimension_and_finiteness_errors() {
        let head = sandwich();
        assert!(matches!(
            softmax(&head, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            softmax(&head, &[f64::NAN, 0.0]),
            Err(Error::NonFinite(_))
        ));
        assert!(SoftmaxHead::from_columns(&[vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn decompose_parallel_and_zero() {
        let head = sandwich();
        let d = decompose(&head, &[0.0, 3.0]).unwrap();
        assert!((d.cos_theta[0] - 1.0).abs() < 1e-15);
        assert_eq!(d.argmax_class, 0);
        assert!((d.z_norm - 3.0).abs() < 1e-15);

        let d0 = decompose(&head, &[0.0, 0.0]).unwrap();
        assert_eq!(d0.z_norm, 0.0);
        assert!(d0.cos_theta.iter().all(|c| *c == 0.0));
        assert_eq!(d0.argmax_class, 0);
    }

    #[test]
    fn decompose_rejects_zero_column() {
        let head = SoftmaxHead::from_columns(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            decompose(&head, &[1.0, 1.0]),
            Err(Error::DegenerateWeight { class: 1 })
        ));
    }

    #[test]
    fn optimal_k3_cosines() {
        let s = 3f64.sqrt() / 2.0;
        let head =
            SoftmaxHead::from_columns(&[vec![0.0, 1.0], vec![-s, -0.5], vec![s, -0.5]]).unwrap();
        let d = decompose(&head, &[0.0, 1.0]).unwrap();
        assert!((d.cos_theta[0] - 1.0).abs() < 1e-12);
        assert!((d.cos_theta[1] + 0.5).abs() < 1e-12);
        assert!((d.cos_theta[2] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn ties_break_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    #[test]
    fn json_round_trip() {
        let head = sandwich().with_bias(vec![0.1, -0.2, 0.3]).unwrap();
        let s = serde_json::to_string(&head).unwrap();
        let back: SoftmaxHead = serde_json::from_str(&s).unwrap();
        assert_eq!(head, back);
    }
}
