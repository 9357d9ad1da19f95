//! `sweep`: stream inputs through a trained model and keep the most
//! confident ones per predicted class.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde::{Deserialize, Serialize};
use softood::refnet::{confidence_sweep, Model, SyntheticTask};

use crate::config::{header, num, require, Format, Output};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub model: Option<PathBuf>,
    /// Input distribution; its seed drives the stream.
    pub sampler: SyntheticTask,
    pub n_samples: usize,
    pub top_m: usize,
    pub format: Format,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            model: None,
            sampler: SyntheticTask::UniformHypercubeOod {
                n: 1,
                dim: 2,
                lo: -20.0,
                hi: 20.0,
                seed: 0,
            },
            n_samples: 100_000,
            top_m: 10,
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SweepFlags {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    top_m: Option<usize>,
    #[arg(long)]
    #[serde(rename = "sampler.seed")]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

pub fn run(cfg: &SweepConfig, out: &Output) -> Result<()> {
    let model = Model::load(require(&cfg.model, "model")?)?;
    let result = confidence_sweep(&model, &cfg.sampler, cfg.n_samples, cfg.top_m)?;
    match cfg.format {
        Format::Json => {
            out.json("sweep.json", &result)?;
        }
        Format::Csv => {
            let dim = cfg.sampler.input_dim();
            let mut names = header(&["class", "rank", "confidence"]);
            names.extend((0..dim).map(|j| format!("x{j}")));
            let rows: Vec<Vec<String>> = result
                .per_class
                .iter()
                .enumerate()
                .flat_map(|(c, kept)| {
                    kept.iter().enumerate().map(move |(rank, s)| {
                        let mut row = vec![c.to_string(), rank.to_string(), num(s.confidence)];
                        row.extend(s.input.iter().map(|v| num(*v)));
                        row
                    })
                })
                .collect();
            out.csv("sweep.csv", &names, &rows)?;
            out.json(
                "sweep_summary.json",
                &serde_json::json!({
                    "n_samples": result.n_samples,
                    "top_m": result.top_m,
                    "mean_confidence_all": result.mean_confidence_all,
                    "mean_confidence_kept": result.mean_confidence_kept,
                }),
            )?;
        }
    }
    Ok(())
}
