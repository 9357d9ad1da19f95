//! Mini-batch SGD with an optional frozen head.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, LabelVector};
use crate::head::{argmax, SoftmaxHead};
use crate::rng;

use super::mlp::{Mlp, MlpSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    /// Penalty `λ1` on the squared head weights and biases.
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub frozen_head: Option<SoftmaxHead>,
}

fn default_epochs() -> usize {
    50
}

fn default_batch() -> usize {
    64
}

fn default_lr() -> f64 {
    0.05
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            batch_size: default_batch(),
            learning_rate: default_lr(),
            weight_decay: 0.0,
            seed: 0,
            frozen_head: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "epochs and batch_size must be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(
                "learning_rate must be positive".into(),
            ));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidParameter("weight_decay must be >= 0".into()));
        }
        Ok(())
    }
}

/// Trained network with its per-epoch mean training loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub net: Mlp,
    pub loss_history: Vec<f64>,
    pub head_frozen: bool,
}

impl Model {
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.net.features(x)
    }

    pub fn features_batch(&self, inputs: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.net.features_batch(inputs)
    }

    pub fn head(&self) -> SoftmaxHead {
        self.net.head()
    }

    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.net.probabilities(x)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.probabilities(x)?))
    }

    pub fn accuracy(&self, inputs: &FeatureMatrix, labels: &LabelVector) -> Result<f64> {
        labels.check_pairs(inputs)?;
        let mut correct = 0usize;
        for (x, &y) in inputs.rows().zip(labels.as_slice()) {
            correct += usize::from(self.predict(x)? == y);
        }
        Ok(correct as f64 / inputs.n() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        let net = Mlp::from_params(m.net.spec().clone(), m.net.params().to_vec())?;
        Ok(Self { net, ..m })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

pub fn train(
    inputs: &FeatureMatrix,
    labels: &LabelVector,
    spec: &MlpSpec,
    cfg: &TrainConfig,
) -> Result<Model> {
    cfg.validate()?;
    spec.validate()?;
    labels.check_pairs(inputs)?;
    if inputs.h() != spec.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "training inputs",
            expected: spec.input_dim(),
            got: inputs.h(),
        });
    }
    if let Some(&label) = labels.as_slice().iter().find(|l| **l >= spec.k) {
        return Err(Error::LabelOutOfRange { label, k: spec.k });
    }
    let mut net = Mlp::init(spec.clone(), cfg.seed)?;
    if let Some(head) = &cfg.frozen_head {
        net.set_head(head)?;
    }
    let trainable = if cfg.frozen_head.is_some() {
        net.head_offset()
    } else {
        net.params().len()
    };
    let mut order: Vec<usize> = (0..inputs.n()).collect();
    let mut r = rng::substream(cfg.seed, 1);
    let mut grad = vec![0.0; net.params().len()];
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut r);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| inputs.row(i)).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| labels.as_slice()[i]).collect();
            let loss = net.accumulate(&xs, &ys, cfg.weight_decay, &mut grad)?;
            if !loss.is_finite() || grad[..trainable].iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            total += loss * chunk.len() as f64;
            for (p, g) in net.params_mut()[..trainable].iter_mut().zip(&grad) {
                *p -= cfg.learning_rate * g;
            }
        }
        history.push(total / inputs.n() as f64);
    }
    Ok(Model {
        net,
        loss_history: history,
        head_frozen: cfg.frozen_head.is_some(),
    })
}
