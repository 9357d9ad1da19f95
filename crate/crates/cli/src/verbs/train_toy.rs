//! `train-toy`: train the reference network on a synthetic task and emit
//! the model, its loss curve and penultimate-layer features.

use anyhow::Result;
use clap::Args;
use serde::{Deserialize, Serialize};
use softood::features::{save_features, save_head, FeatureFormat};
use softood::refnet::{train, Activation, MlpSpec, Structure, SyntheticTask, TrainConfig};

use crate::config::{config_error, header, num, Output};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainToyConfig {
    pub task: SyntheticTask,
    /// Samples per class of the held-out test split.
    pub test_per_class: usize,
    /// Optional unlabelled OOD task whose features are also emitted.
    pub ood: Option<SyntheticTask>,
    /// Hidden widths, the last one being the feature width H.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Head structure; anything but `trainable` freezes the head.
    pub structure: Structure,
    pub head_norm: f64,
    pub train: TrainConfig,
}

impl Default for TrainToyConfig {
    fn default() -> Self {
        Self {
            task: SyntheticTask::TwoDToy {
                n_per_class: 300,
                seed: 0,
            },
            test_per_class: 300,
            ood: None,
            hidden: vec![16, 8],
            activation: Activation::Tanh,
            structure: Structure::Trainable,
            head_norm: 0.5,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainToyFlags {
    #[arg(long)]
    #[serde(rename = "train.seed")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(rename = "train.epochs")]
    epochs: Option<usize>,
    #[arg(long)]
    #[serde(rename = "train.learning_rate")]
    learning_rate: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long, value_parser = parse_activation)]
    activation: Option<Activation>,
    #[arg(long, value_parser = parse_structure)]
    structure: Option<Structure>,
    #[arg(long)]
    head_norm: Option<f64>,
}

pub fn parse_activation(s: &str) -> Result<Activation, String> {
    s.parse().map_err(|e: softood::Error| e.to_string())
}

pub fn parse_structure(s: &str) -> Result<Structure, String> {
    s.parse().map_err(|e: softood::Error| e.to_string())
}

#[derive(Serialize)]
struct TrainSummary {
    train_accuracy: f64,
    test_accuracy: f64,
    final_loss: f64,
    head_frozen: bool,
    feature_dim: usize,
}

pub fn run(cfg: &TrainToyConfig, out: &Output) -> Result<()> {
    let k = cfg
        .task
        .classes()
        .ok_or_else(|| config_error("train-toy needs a labelled task"))?;
    let h = *cfg
        .hidden
        .last()
        .ok_or_else(|| config_error("`hidden` needs at least one layer"))?;
    let (x, y) = cfg.task.generate()?;
    let y = y.ok_or_else(|| config_error("task produced no labels"))?;
    let (xt, yt) = cfg
        .task
        .with_seed(cfg.task.seed().wrapping_add(1))
        .with_count(cfg.test_per_class)
        .generate()?;
    let yt = yt.ok_or_else(|| config_error("task produced no labels"))?;
    let mut widths = vec![cfg.task.input_dim()];
    widths.extend(&cfg.hidden);
    let spec = MlpSpec::new(widths, cfg.activation, k)?;
    let mut train_cfg = cfg.train.clone();
    if train_cfg.frozen_head.is_none() {
        train_cfg.frozen_head = cfg.structure.head(k, h, cfg.head_norm, train_cfg.seed)?;
    }
    let model = train(&x, &y, &spec, &train_cfg)?;
    out.text("model.json", &model.to_json()?)?;
    save_head(&out.path("head.csv"), &model.head())?;
    let loss: Vec<Vec<String>> = model
        .loss_history
        .iter()
        .enumerate()
        .map(|(e, l)| vec![e.to_string(), num(*l)])
        .collect();
    out.csv("loss.csv", &header(&["epoch", "loss"]), &loss)?;
    save_features(
        &out.path("train_features.csv"),
        FeatureFormat::Csv,
        &model.features_batch(&x)?,
        Some(&y),
    )?;
    save_features(
        &out.path("test_features.csv"),
        FeatureFormat::Csv,
        &model.features_batch(&xt)?,
        Some(&yt),
    )?;
    if let Some(ood) = &cfg.ood {
        let (xo, _) = ood.generate()?;
        save_features(
            &out.path("ood_features.csv"),
            FeatureFormat::Csv,
            &model.features_batch(&xo)?,
            None,
        )?;
    }
    out.json(
        "train_summary.json",
        &TrainSummary {
            train_accuracy: model.accuracy(&x, &y)?,
            test_accuracy: model.accuracy(&xt, &yt)?,
            final_loss: *model.loss_history.last().unwrap_or(&f64::NAN),
            head_frozen: model.head_frozen,
            feature_dim: h,
        },
    )?;
    Ok(())
}
