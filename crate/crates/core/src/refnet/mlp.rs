//! Dense network whose last hidden layer is the feature space `z`, topped by
//! a softmax head. All parameters live in one flat vector: for every body
//! layer the `out × in` weights row-major then the biases, followed by the
//! head weights column by column and the head biases.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::head::{softmax_logits, SoftmaxHead};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Self::Relu => x.max(0.0),
            Self::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Self::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Tanh => 1.0 - post * post,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Self::Relu),
            "tanh" => Ok(Self::Tanh),
            other => Err(Error::InvalidParameter(format!(
                "unknown activation {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    /// Input width, hidden widths, with the last entry the feature width H.
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
    pub k: usize,
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>, activation: Activation, k: usize) -> Result<Self> {
        let spec = Self {
            layer_widths,
            activation,
            k,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::InvalidParameter(
                "an MLP needs an input width and at least one hidden layer".into(),
            ));
        }
        if self.layer_widths.contains(&0) {
            return Err(Error::InvalidParameter("layer widths must be >= 1".into()));
        }
        if self.k < 2 {
            return Err(Error::InvalidParameter(format!(
                "need K >= 2, got {}",
                self.k
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn feature_dim(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    pub fn hidden_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    fn body_len(&self) -> usize {
        self.layer_widths
            .windows(2)
            .map(|w| w[1] * (w[0] + 1))
            .sum()
    }

    pub fn param_count(&self) -> usize {
        self.body_len() + self.k * (self.feature_dim() + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    spec: MlpSpec,
    params: Vec<f64>,
}

/// Activations of one forward pass, kept for backpropagation.
struct Trace {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl Mlp {
    /// He-scaled Gaussian body weights and a small random head, zero biases.
    pub fn init(spec: MlpSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut r = rng::seeded(seed);
        let mut params = Vec::with_capacity(spec.param_count());
        for w in spec.layer_widths.windows(2) {
            let scale = (2.0 / w[0] as f64).sqrt();
            params.extend((0..w[0] * w[1]).map(|_| {
                scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut r)
            }));
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        let h = spec.feature_dim();
        let scale = (1.0 / h as f64).sqrt();
        params.extend((0..h * spec.k).map(|_| {
            scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut r)
        }));
        params.extend(std::iter::repeat_n(0.0, spec.k));
        Ok(Self { spec, params })
    }

    pub fn from_params(spec: MlpSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return Err(Error::DimensionMismatch {
                context: "mlp parameters",
                expected: spec.param_count(),
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("mlp parameters"));
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Offset of the head weights in the flat parameter vector.
    pub fn head_offset(&self) -> usize {
        self.spec.body_len()
    }

    pub fn head(&self) -> SoftmaxHead {
        let (h, k) = (self.spec.feature_dim(), self.spec.k);
        let off = self.head_offset();
        let w = DMatrix::from_column_slice(h, k, &self.params[off..off + h * k]);
        let b = DVector::from_column_slice(&self.params[off + h * k..]);
        SoftmaxHead::new(w, b).expect("head parameters are finite")
    }

    /// Replace the head parameters.
    pub fn set_head(&mut self, head: &SoftmaxHead) -> Result<()> {
        if head.h() != self.spec.feature_dim() || head.k() != self.spec.k {
            return Err(Error::DimensionMismatch {
                context: "head shape (H*K)",
                expected: self.spec.feature_dim() * self.spec.k,
                got: head.h() * head.k(),
            });
        }
        let off = self.head_offset();
        let hk = head.h() * head.k();
        self.params[off..off + hk].copy_from_slice(head.weights().as_slice());
        self.params[off + hk..].copy_from_slice(head.bias().as_slice());
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "network input",
                expected: self.spec.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn forward(&self, x: &[f64]) -> Trace {
        let act = self.spec.activation;
        let mut pre = Vec::with_capacity(self.spec.hidden_layers());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.spec.hidden_layers() + 1);
        post.push(x.to_vec());
        let mut off = 0;
        for w in self.spec.layer_widths.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let input = post.last().unwrap();
            let weights = &self.params[off..off + n_in * n_out];
            let bias = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let p: Vec<f64> = (0..n_out)
                .map(|o| {
                    bias[o]
                        + weights[o * n_in..(o + 1) * n_in]
                            .iter()
                            .zip(input)
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                })
                .collect();
            post.push(p.iter().map(|v| act.apply(*v)).collect());
            pre.push(p);
            off += n_out * (n_in + 1);
        }
        let z = post.last().unwrap();
        let (h, k) = (self.spec.feature_dim(), self.spec.k);
        let logits: Vec<f64> = (0..k)
            .map(|c| {
                self.params[off + h * k + c]
                    + self.params[off + c * h..off + (c + 1) * h]
                        .iter()
                        .zip(z)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
            })
            .collect();
        Trace {
            pre,
            post,
            probs: softmax_logits(&logits),
        }
    }

    /// Final-layer features `z` for one input.
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.forward(x).post.pop().unwrap())
    }

    pub fn features_batch(&self, inputs: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check_input(inputs.row(0))?;
        let mut data = Vec::with_capacity(inputs.n() * self.spec.feature_dim());
        for x in inputs.rows() {
            data.extend(self.forward(x).post.pop().unwrap());
        }
        FeatureMatrix::new(inputs.n(), self.spec.feature_dim(), data)
    }

    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.forward(x).probs)
    }

    /// Mean cross-entropy over the batch plus `λ1 Σ_i (‖w_i‖² + b_i²)` on
    /// the head, with its gradient over all parameters.
    pub fn loss_and_gradient(
        &self,
        inputs: &[&[f64]],
        labels: &[usize],
        lambda1: f64,
    ) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.accumulate(inputs, labels, lambda1, &mut grad)?;
        Ok((loss, grad))
    }

    pub(crate) fn accumulate(
        &self,
        inputs: &[&[f64]],
        labels: &[usize],
        lambda1: f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        if inputs.is_empty() || inputs.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "batch labels",
                expected: inputs.len(),
                got: labels.len(),
            });
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (h, k) = (self.spec.feature_dim(), self.spec.k);
        let head_off = self.head_offset();
        let inv_n = 1.0 / inputs.len() as f64;
        let mut loss = 0.0;
        for (x, &y) in inputs.iter().zip(labels) {
            self.check_input(x)?;
            if y >= k {
                return Err(Error::LabelOutOfRange { label: y, k });
            }
            let t = self.forward(x);
            loss -= t.probs[y].max(f64::MIN_POSITIVE).ln();
            let mut dlogit = t.probs.clone();
            dlogit[y] -= 1.0;
            dlogit.iter_mut().for_each(|d| *d *= inv_n);
            let z = t.post.last().unwrap();
            let mut delta = vec![0.0; h];
            for c in 0..k {
                let col = head_off + c * h;
                for j in 0..h {
                    grad[col + j] += dlogit[c] * z[j];
                    delta[j] += dlogit[c] * self.params[col + j];
                }
                grad[head_off + h * k + c] += dlogit[c];
            }
            let mut off = head_off;
            for layer in (0..self.spec.hidden_layers()).rev() {
                let (n_in, n_out) = (
                    self.spec.layer_widths[layer],
                    self.spec.layer_widths[layer + 1],
                );
                off -= n_out * (n_in + 1);
                for (o, d) in delta.iter_mut().enumerate() {
                    *d *= self
                        .spec
                        .activation
                        .derivative(t.pre[layer][o], t.post[layer + 1][o]);
                }
                let input = &t.post[layer];
                let mut next = vec![0.0; n_in];
                for o in 0..n_out {
                    let row = off + o * n_in;
                    for i in 0..n_in {
                        grad[row + i] += delta[o] * input[i];
                        next[i] += delta[o] * self.params[row + i];
                    }
                    grad[off + n_in * n_out + o] += delta[o];
                }
                delta = next;
            }
        }
        let mut penalty = 0.0;
        for (g, p) in grad[head_off..].iter_mut().zip(&self.params[head_off..]) {
            penalty += p * p;
            *g += 2.0 * lambda1 * p;
        }
        Ok(loss * inv_n + lambda1 * penalty)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn batch(d: usize, n: usize, k: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut r = rng::seeded(seed);
        let x = (0..n)
            .map(|_| (0..d).map(|_| r.random_range(-2.0..2.0)).collect())
            .collect();
        let y = (0..n).map(|_| r.random_range(0..k)).collect();
        (x, y)
    }

    fn gradient_check(activation: Activation, widths: Vec<usize>) {
        let spec = MlpSpec::new(widths.clone(), activation, 3).unwrap();
        let mut net = Mlp::init(spec, 5).unwrap();
        let b = net.head_offset();
        net.params_mut()[b + 1] = 0.3;
        let (x, y) = batch(widths[0], 10, 3, 8);
        let refs: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
        let (_, grad) = net.loss_and_gradient(&refs, &y, 0.01).unwrap();
        let step = 1e-6;
        let mut worst = 0.0f64;
        for p in 0..net.params().len() {
            let orig = net.params()[p];
            net.params_mut()[p] = orig + step;
            let (up, _) = net.loss_and_gradient(&refs, &y, 0.01).unwrap();
            net.params_mut()[p] = orig - step;
            let (down, _) = net.loss_and_gradient(&refs, &y, 0.01).unwrap();
            net.params_mut()[p] = orig;
            let fd = (up - down) / (2.0 * step);
            let rel = (fd - grad[p]).abs() / grad[p].abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "{activation:?} worst relative error {worst}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        gradient_check(Activation::Tanh, vec![4, 6, 5]);
        gradient_check(Activation::Relu, vec![3, 7, 6, 4]);
    }

    #[test]
    fn head_round_trip_is_exact() {
        let spec = MlpSpec::new(vec![2, 8, 4], Activation::Relu, 3).unwrap();
        let mut net = Mlp::init(spec, 1).unwrap();
        let head = SoftmaxHead::from_columns(&[
            vec![0.1, 0.2, 0.3, 0.4],
            vec![1.0 / 3.0, 0.0, -1.0, 2.0],
            vec![-0.7, 0.5, 0.1, 1e-9],
        ])
        .unwrap()
        .with_bias(vec![0.25, -0.5, 1.0 / 7.0])
        .unwrap();
        net.set_head(&head).unwrap();
        assert_eq!(net.head(), head);
    }

    #[test]
    fn feature_width_and_probabilities() {
        let spec = MlpSpec::new(vec![5, 9, 7], Activation::Tanh, 4).unwrap();
        let net = Mlp::init(spec, 2).unwrap();
        let x = [0.1, -0.2, 0.3, 1.0, 2.0];
        assert_eq!(net.features(&x).unwrap().len(), 7);
        let p = net.probabilities(&x).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(net.features(&[1.0]).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(MlpSpec::new(vec![4], Activation::Relu, 3).is_err());
        assert!(MlpSpec::new(vec![4, 0], Activation::Relu, 3).is_err());
        assert!(MlpSpec::new(vec![4, 4], Activation::Relu, 1).is_err());
        assert!(Mlp::from_params(
            MlpSpec::new(vec![2, 2], Activation::Relu, 2).unwrap(),
            vec![0.0; 3]
        )
        .is_err());
    }
}
