//! `depth-study`: OOD AUROC and accuracy as a function of hidden depth.

use anyhow::Result;
use clap::Args;
use serde::{Deserialize, Serialize};
use softood::refnet::{depth_study, DepthStudyConfig};

use crate::config::{header, num, Format, Output};

/// The experiment settings plus the output format.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepthStudyRunConfig {
    pub experiment: DepthStudyConfig,
    pub format: Format,
}

#[derive(Debug, Args, Serialize)]
pub struct DepthFlags {
    /// Comma-separated depths (number of hidden layers).
    #[arg(long, value_delimiter = ',')]
    #[serde(rename = "experiment.depths")]
    depths: Option<Vec<usize>>,
    /// Number of seeds, used as `0..n`.
    #[arg(long)]
    #[serde(skip)]
    pub seeds: Option<u64>,
    #[arg(long)]
    #[serde(rename = "experiment.hidden_width")]
    hidden_width: Option<usize>,
    #[arg(long)]
    #[serde(rename = "experiment.train.epochs")]
    epochs: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

pub fn apply_seed_count(cfg: &mut DepthStudyRunConfig, flags: &DepthFlags) {
    if let Some(n) = flags.seeds {
        cfg.experiment.seeds = (0..n).collect();
    }
}

pub fn run(cfg: &DepthStudyRunConfig, out: &Output) -> Result<()> {
    let table = depth_study(&cfg.experiment)?;
    match cfg.format {
        Format::Json => {
            out.json("depth_study.json", &table)?;
        }
        Format::Csv => {
            let mut names = header(&[
                "depth",
                "accuracy_mean",
                "accuracy_se",
                "auroc_mean",
                "auroc_se",
            ]);
            names.extend(table.seeds.iter().map(|s| format!("auroc_seed{s}")));
            let rows: Vec<Vec<String>> = table
                .rows
                .iter()
                .map(|r| {
                    let mut row = vec![
                        r.depth.to_string(),
                        num(r.accuracy_mean),
                        num(r.accuracy_se),
                        num(r.auroc_mean),
                        num(r.auroc_se),
                    ];
                    row.extend(r.auroc.iter().map(|v| num(*v)));
                    row
                })
                .collect();
            out.csv("depth_study.csv", &names, &rows)?;
        }
    }
    Ok(())
}
