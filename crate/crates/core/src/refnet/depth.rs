//! OOD detection as a function of network depth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::u_entropy;
use crate::metrics::{auroc, balance, mean_se};

use super::mlp::{Activation, MlpSpec};
use super::tasks::SyntheticTask;
use super::train::{train, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepthStudyConfig {
    /// Labelled task; its training and test splits are drawn with seeds
    /// derived from each run seed.
    pub train_task: SyntheticTask,
    pub ood_task: SyntheticTask,
    /// Test samples per class.
    pub test_per_class: usize,
    pub hidden_width: usize,
    pub depths: Vec<usize>,
    pub seeds: Vec<u64>,
    pub activation: Activation,
    pub train: TrainConfig,
}

const NUISANCE_DIMS: usize = 8;

impl Default for DepthStudyConfig {
    /// Three blobs in two informative coordinates plus eight unit-variance
    /// nuisance coordinates; OOD is a far ring in the informative plane
    /// with the same nuisance noise.
    fn default() -> Self {
        Self {
            train_task: SyntheticTask::GaussianBlobs {
                k: 3,
                n_per_class: 300,
                separation: 6.0,
                sigma: 1.0,
                nuisance_dims: NUISANCE_DIMS,
                nuisance_sigma: 1.0,
                seed: 0,
            },
            ood_task: SyntheticTask::RingOod {
                n: 900,
                dim: 2 + NUISANCE_DIMS,
                inner: 12.0,
                outer: 18.0,
                nuisance_sigma: 1.0,
                seed: 0,
            },
            test_per_class: 300,
            hidden_width: 16,
            depths: vec![1, 2, 3, 4],
            seeds: (0..5).collect(),
            activation: Activation::Tanh,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthRow {
    pub depth: usize,
    pub accuracy_mean: f64,
    pub accuracy_se: f64,
    pub auroc_mean: f64,
    pub auroc_se: f64,
    pub accuracy: Vec<f64>,
    pub auroc: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthTable {
    pub seeds: Vec<u64>,
    pub rows: Vec<DepthRow>,
}

/// Per-run seed for the data split `slot` (0 train, 1 test, 2 OOD).
fn split_seed(seed: u64, slot: u64) -> u64 {
    seed.wrapping_mul(3).wrapping_add(slot)
}

/// Accuracy on the test split and entropy-score AUROC against the OOD set
/// for one depth and seed.
pub fn depth_run(cfg: &DepthStudyConfig, depth: usize, seed: u64) -> Result<(f64, f64)> {
    let k = cfg.train_task.classes().ok_or_else(|| {
        Error::InvalidParameter("depth study needs a labelled training task".into())
    })?;
    let (x, y) = cfg.train_task.with_seed(split_seed(seed, 0)).generate()?;
    let (xt, yt) = cfg
        .train_task
        .with_seed(split_seed(seed, 1))
        .with_count(cfg.test_per_class)
        .generate()?;
    let (xo, _) = cfg.ood_task.with_seed(split_seed(seed, 2)).generate()?;
    let (y, yt) = (y.unwrap(), yt.unwrap());
    let mut widths = vec![cfg.train_task.input_dim()];
    widths.extend(std::iter::repeat_n(cfg.hidden_width, depth));
    let spec = MlpSpec::new(widths, cfg.activation, k)?;
    let model = train(
        &x,
        &y,
        &spec,
        &TrainConfig {
            seed,
            ..cfg.train.clone()
        },
    )?;
    let accuracy = model.accuracy(&xt, &yt)?;
    let head = model.head();
    let score = |m: &crate::features::FeatureMatrix| -> Result<Vec<f64>> {
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
    Ok((accuracy, auroc(&s_in, &s_out)?))
}

/// One model per depth and seed. Depth `d` means `d` hidden layers of
/// `hidden_width` units. Runs execute in parallel and are collected in
/// order, so the table is identical to a sequential run.
pub fn depth_study(cfg: &DepthStudyConfig) -> Result<DepthTable> {
    if cfg.depths.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::EmptyInput("depth study needs depths and seeds"));
    }
    if cfg.depths.contains(&0) || cfg.hidden_width == 0 {
        return Err(Error::InvalidParameter(
            "depths and hidden_width must be >= 1".into(),
        ));
    }
    let jobs: Vec<(usize, u64)> = cfg
        .depths
        .iter()
        .flat_map(|&d| cfg.seeds.iter().map(move |&s| (d, s)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(d, s)| depth_run(cfg, d, s))
        .collect::<Result<Vec<_>>>()?;
    let rows = cfg
        .depths
        .iter()
        .enumerate()
        .map(|(i, &depth)| {
            let chunk = &results[i * cfg.seeds.len()..(i + 1) * cfg.seeds.len()];
            let accuracy: Vec<f64> = chunk.iter().map(|r| r.0).collect();
            let aurocs: Vec<f64> = chunk.iter().map(|r| r.1).collect();
            let (accuracy_mean, accuracy_se) = mean_se(&accuracy)?;
            let (auroc_mean, auroc_se) = mean_se(&aurocs)?;
            Ok(DepthRow {
                depth,
                accuracy_mean,
                accuracy_se,
                auroc_mean,
                auroc_se,
                accuracy,
                auroc: aurocs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DepthTable {
        seeds: cfg.seeds.clone(),
        rows,
    })
}
