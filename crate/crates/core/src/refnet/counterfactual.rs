//! Frozen-head experiment: train the body of the same network under
//! different fixed head structures and compare accuracy, training loss and
//! OOD detection against a trainable head.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::u_entropy;
use crate::features::FeatureMatrix;
use crate::head::SoftmaxHead;
use crate::metrics::{auroc, balance, mean_se};
use crate::structure::{
    clusters_at_weights, gen_counterfactual_head, gen_optimal_head, regularized_xent,
    CounterfactualKind, OptimalStructureSpec,
};

use super::mlp::{Activation, MlpSpec};
use super::tasks::SyntheticTask;
use super::train::{train, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    Trainable,
    Optimal,
    Sandwich,
    Stack,
    Lopsided,
}

impl Structure {
    pub const ALL: [Structure; 5] = [
        Self::Trainable,
        Self::Optimal,
        Self::Sandwich,
        Self::Stack,
        Self::Lopsided,
    ];

    fn counterfactual(self) -> Option<CounterfactualKind> {
        match self {
            Self::Sandwich => Some(CounterfactualKind::Sandwich),
            Self::Stack => Some(CounterfactualKind::Stack),
            Self::Lopsided => Some(CounterfactualKind::Lopsided),
            _ => None,
        }
    }

    /// Frozen head for this structure, or `None` when trainable.
    pub fn head(self, k: usize, h: usize, c: f64, seed: u64) -> Result<Option<SoftmaxHead>> {
        Ok(match self {
            Self::Trainable => None,
            Self::Optimal => Some(gen_optimal_head(
                &OptimalStructureSpec {
                    k,
                    h,
                    c1: c,
                    c3: 5.0,
                },
                seed,
            )?),
            other => {
                Some(gen_counterfactual_head(other.counterfactual().unwrap(), k, h, c, seed)?.head)
            }
        })
    }
}

impl std::str::FromStr for Structure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trainable" => Ok(Self::Trainable),
            "optimal" => Ok(Self::Optimal),
            other => other.parse::<CounterfactualKind>().map(|k| match k {
                CounterfactualKind::Sandwich => Self::Sandwich,
                CounterfactualKind::Stack => Self::Stack,
                CounterfactualKind::Lopsided => Self::Lopsided,
            }),
        }
    }
}

impl std::fmt::Display for Structure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Trainable => f.write_str("trainable"),
            Self::Optimal => f.write_str("optimal"),
            other => other.counterfactual().unwrap().fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterfactualConfig {
    pub structures: Vec<Structure>,
    pub seeds: Vec<u64>,
    pub task: SyntheticTask,
    pub ood: SyntheticTask,
    pub test_per_class: usize,
    /// Hidden widths, the last one being the feature width H.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Common weight norm of the frozen heads.
    pub head_norm: f64,
    pub train: TrainConfig,
    /// Settings for the loss comparison on clusters at `c3 · w_i`, with
    /// heads of norm `cluster_head_norm`.
    pub cluster_head_norm: f64,
    pub cluster_c3: f64,
    pub cluster_noise: f64,
    pub cluster_per_class: usize,
    pub cluster_lambda1: f64,
}

impl Default for CounterfactualConfig {
    fn default() -> Self {
        Self {
            structures: Structure::ALL.to_vec(),
            seeds: vec![0, 1, 2],
            task: SyntheticTask::GaussianBlobs {
                k: 3,
                n_per_class: 300,
                separation: 6.0,
                sigma: 1.0,
                nuisance_dims: 0,
                nuisance_sigma: 0.0,
                seed: 0,
            },
            ood: SyntheticTask::RingOod {
                n: 900,
                dim: 2,
                inner: 12.0,
                outer: 18.0,
                nuisance_sigma: 0.0,
                seed: 0,
            },
            test_per_class: 300,
            hidden: vec![16, 8],
            activation: Activation::Tanh,
            head_norm: 0.5,
            train: TrainConfig::default(),
            cluster_head_norm: 1.0,
            cluster_c3: 5.0,
            cluster_noise: 0.3,
            cluster_per_class: 200,
            cluster_lambda1: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureRow {
    pub structure: Structure,
    pub accuracy: Vec<f64>,
    pub auroc: Vec<f64>,
    /// Cross-entropy of the trained network on its training set.
    pub train_xent: Vec<f64>,
    /// Regularized cross-entropy of the head on clusters at the optimal
    /// weights; `None` for the trainable head.
    pub cluster_xent: Option<Vec<f64>>,
    pub accuracy_mean: f64,
    pub accuracy_se: f64,
    pub auroc_mean: f64,
    pub auroc_se: f64,
    pub train_xent_mean: f64,
    pub train_xent_se: f64,
    pub cluster_xent_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualReport {
    pub seeds: Vec<u64>,
    pub rows: Vec<StructureRow>,
}

impl CounterfactualReport {
    pub fn row(&self, s: Structure) -> Option<&StructureRow> {
        self.rows.iter().find(|r| r.structure == s)
    }
}

struct RunResult {
    accuracy: f64,
    auroc: f64,
    train_xent: f64,
    cluster_xent: Option<f64>,
}

fn split_seed(seed: u64, slot: u64) -> u64 {
    seed.wrapping_mul(3).wrapping_add(slot)
}

fn run_one(cfg: &CounterfactualConfig, structure: Structure, seed: u64) -> Result<RunResult> {
    let k = cfg
        .task
        .classes()
        .ok_or_else(|| Error::InvalidParameter("counterfactual task must be labelled".into()))?;
    let h = *cfg
        .hidden
        .last()
        .ok_or(Error::EmptyInput("hidden widths"))?;
    let (x, y) = cfg.task.with_seed(split_seed(seed, 0)).generate()?;
    let (xt, yt) = cfg
        .task
        .with_seed(split_seed(seed, 1))
        .with_count(cfg.test_per_class)
        .generate()?;
    let (xo, _) = cfg.ood.with_seed(split_seed(seed, 2)).generate()?;
    let (y, yt) = (y.unwrap(), yt.unwrap());
    let mut widths = vec![cfg.task.input_dim()];
    widths.extend_from_slice(&cfg.hidden);
    let spec = MlpSpec::new(widths, cfg.activation, k)?;
    let frozen = structure.head(k, h, cfg.head_norm, seed)?;
    let model = train(
        &x,
        &y,
        &spec,
        &TrainConfig {
            seed,
            frozen_head: frozen.clone(),
            ..cfg.train.clone()
        },
    )?;
    let head = model.head();
    let score = |m: &FeatureMatrix| -> Result<Vec<f64>> {
        model
            .features_batch(m)?
            .rows()
            .map(|z| u_entropy(&head, z))
            .collect()
    };
    let (s_in, s_out) = (score(&xt)?, score(&xo)?);
    let (i_in, i_out) = balance(s_in.len(), s_out.len(), seed)?;
    let s_in: Vec<f64> = i_in.iter().map(|&i| s_in[i]).collect();
    let s_out: Vec<f64> = i_out.iter().map(|&i| s_out[i]).collect();
    let cluster_xent = match &frozen {
        None => None,
        Some(_) => {
            let optimal = Structure::Optimal
                .head(k, h, cfg.cluster_head_norm, seed)?
                .unwrap();
            let candidate = structure.head(k, h, cfg.cluster_head_norm, seed)?.unwrap();
            let (f, l) = clusters_at_weights(
                &optimal,
                cfg.cluster_c3,
                cfg.cluster_noise,
                cfg.cluster_per_class,
                split_seed(seed, 3),
            )?;
            Some(regularized_xent(&f, &l, &candidate, cfg.cluster_lambda1)?)
        }
    };
    Ok(RunResult {
        accuracy: model.accuracy(&xt, &yt)?,
        auroc: auroc(&s_in, &s_out)?,
        train_xent: regularized_xent(&model.features_batch(&x)?, &y, &head, 0.0)?,
        cluster_xent,
    })
}

/// Every structure and seed is an independent run; runs execute in
/// parallel and are gathered in order.
pub fn run_counterfactual(cfg: &CounterfactualConfig) -> Result<CounterfactualReport> {
    if cfg.structures.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::EmptyInput(
            "counterfactual needs structures and seeds",
        ));
    }
    if cfg.task.classes() != Some(3) {
        return Err(Error::InvalidParameter(
            "the counterfactual structures are defined for 3 classes".into(),
        ));
    }
    let jobs: Vec<(Structure, u64)> = cfg
        .structures
        .iter()
        .flat_map(|&s| cfg.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(s, seed)| run_one(cfg, s, seed))
        .collect::<Result<Vec<_>>>()?;
    let n = cfg.seeds.len();
    let rows = cfg
        .structures
        .iter()
        .enumerate()
        .map(|(i, &structure)| {
            let chunk = &results[i * n..(i + 1) * n];
            let accuracy: Vec<f64> = chunk.iter().map(|r| r.accuracy).collect();
            let aurocs: Vec<f64> = chunk.iter().map(|r| r.auroc).collect();
            let xent: Vec<f64> = chunk.iter().map(|r| r.train_xent).collect();
            let cluster: Option<Vec<f64>> = chunk.iter().map(|r| r.cluster_xent).collect();
            let (accuracy_mean, accuracy_se) = mean_se(&accuracy)?;
            let (auroc_mean, auroc_se) = mean_se(&aurocs)?;
            let (train_xent_mean, train_xent_se) = mean_se(&xent)?;
            Ok(StructureRow {
                structure,
                cluster_xent_mean: cluster
                    .as_ref()
                    .map(|c| c.iter().sum::<f64>() / c.len() as f64),
                accuracy,
                auroc: aurocs,
                train_xent: xent,
                cluster_xent: cluster,
                accuracy_mean,
                accuracy_se,
                auroc_mean,
                auroc_se,
                train_xent_mean,
                train_xent_se,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CounterfactualReport {
        seeds: cfg.seeds.clone(),
        rows,
    })
}
