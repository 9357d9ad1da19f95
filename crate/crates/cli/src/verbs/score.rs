//! `score`: every estimator for every feature row.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde::{Deserialize, Serialize};
use softood::estimators::{score_batch, CoolingConfig};
use softood::GaussianMixture;

use crate::config::{header, num, opt_num, require, Format, Output};
use crate::verbs::{load_features, load_gmm, load_head};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub features: Option<PathBuf>,
    pub head: Option<PathBuf>,
    /// Fitted mixture for the density score; omitted scores leave the
    /// column empty.
    pub gmm: Option<PathBuf>,
    pub cooling: CoolingConfig,
    pub format: Format,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreFlags {
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    head: Option<PathBuf>,
    #[arg(long)]
    gmm: Option<PathBuf>,
    /// Logit multiplier for the cooled entropy.
    #[arg(long)]
    #[serde(rename = "cooling.factor")]
    cool_factor: Option<f64>,
    /// Scale only `z` when cooling, leaving the bias unscaled.
    #[arg(long)]
    #[serde(rename = "cooling.scale_bias")]
    cool_scale_bias: Option<bool>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

pub fn run(cfg: &ScoreConfig, out: &Output) -> Result<()> {
    let (features, _) = load_features(require(&cfg.features, "features")?)?;
    let head = load_head(require(&cfg.head, "head")?)?;
    let gmm: Option<GaussianMixture> = cfg.gmm.as_deref().map(load_gmm).transpose()?;
    let rows = score_batch(&head, gmm.as_ref(), &features, cfg.cooling)?;
    match cfg.format {
        Format::Json => {
            out.json("scores.json", &rows)?;
        }
        Format::Csv => {
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.sample_index.to_string(),
                        num(r.u_max),
                        num(r.u_entropy),
                        num(r.u_cool),
                        opt_num(r.u_density),
                        num(r.z_norm),
                        num(r.max_cos),
                        r.argmax_class.to_string(),
                    ]
                })
                .collect();
            out.csv(
                "scores.csv",
                &header(&[
                    "sample_index",
                    "u_max",
                    "u_entropy",
                    "u_cool",
                    "u_density",
                    "z_norm",
                    "max_cos",
                    "argmax_class",
                ]),
                &cells,
            )?;
        }
    }
    Ok(())
}
