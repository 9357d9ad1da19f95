//! `counterfactual`: train with frozen heads of each structure and report
//! accuracy, OOD AUROC and cross-entropy over seeds.

use anyhow::Result;
use clap::Args;
use serde::{Deserialize, Serialize};
use softood::refnet::{run_counterfactual, CounterfactualConfig, Structure};

use crate::config::{header, num, opt_num, Format, Output};
use crate::verbs::train_toy::parse_structure;

/// The experiment settings plus the output format.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterfactualRunConfig {
    pub experiment: CounterfactualConfig,
    pub format: Format,
}

#[derive(Debug, Args, Serialize)]
pub struct CounterfactualFlags {
    /// Comma-separated structures.
    #[arg(long, value_delimiter = ',', value_parser = parse_structure)]
    #[serde(rename = "experiment.structures")]
    structures: Option<Vec<Structure>>,
    /// Number of seeds, used as `0..n`.
    #[arg(long)]
    #[serde(skip)]
    pub seeds: Option<u64>,
    #[arg(long)]
    #[serde(rename = "experiment.train.epochs")]
    epochs: Option<usize>,
    #[arg(long)]
    #[serde(rename = "experiment.head_norm")]
    head_norm: Option<f64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

pub fn apply_seed_count(cfg: &mut CounterfactualRunConfig, flags: &CounterfactualFlags) {
    if let Some(n) = flags.seeds {
        cfg.experiment.seeds = (0..n).collect();
    }
}

pub fn run(cfg: &CounterfactualRunConfig, out: &Output) -> Result<()> {
    let report = run_counterfactual(&cfg.experiment)?;
    match cfg.format {
        Format::Json => {
            out.json("counterfactual.json", &report)?;
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.structure.to_string(),
                        num(r.accuracy_mean),
                        num(r.accuracy_se),
                        num(r.auroc_mean),
                        num(r.auroc_se),
                        num(r.train_xent_mean),
                        num(r.train_xent_se),
                        opt_num(r.cluster_xent_mean),
                    ]
                })
                .collect();
            out.csv(
                "counterfactual.csv",
                &header(&[
                    "structure",
                    "accuracy_mean",
                    "accuracy_se",
                    "auroc_mean",
                    "auroc_se",
                    "train_xent_mean",
                    "train_xent_se",
                    "cluster_xent_mean",
                ]),
                &rows,
            )?;
        }
    }
    Ok(())
}
