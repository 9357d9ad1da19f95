//! `pca`: project features onto their leading principal components.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde::{Deserialize, Serialize};
use softood::metrics::pca_project;

use crate::config::{num, require, Format, Output};
use crate::verbs::load_features;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaConfig {
    pub features: Option<PathBuf>,
    /// Further features projected with the same components, such as OOD
    /// features next to the training features.
    pub extra: Option<PathBuf>,
    pub dims: usize,
    pub format: Format,
}

impl Default for PcaConfig {
    fn default() -> Self {
        Self {
            features: None,
            extra: None,
            dims: 2,
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct PcaFlags {
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    extra: Option<PathBuf>,
    #[arg(long)]
    dims: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

pub fn run(cfg: &PcaConfig, out: &Output) -> Result<()> {
    let (features, labels) = load_features(require(&cfg.features, "features")?)?;
    let proj = pca_project(&features, cfg.dims)?;
    let mut rows: Vec<Vec<String>> = (0..features.n())
        .map(|i| {
            let mut row = vec![
                "features".to_string(),
                i.to_string(),
                labels
                    .as_ref()
                    .map(|l| l.as_slice()[i].to_string())
                    .unwrap_or_default(),
            ];
            row.extend(proj.point(i).iter().map(|v| num(*v)));
            row
        })
        .collect();
    if let Some(path) = &cfg.extra {
        let (extra, extra_labels) = load_features(path)?;
        let flat = proj.transform(&extra)?;
        for (i, p) in flat.chunks(cfg.dims).enumerate() {
            let mut row = vec![
                "extra".to_string(),
                i.to_string(),
                extra_labels
                    .as_ref()
                    .map(|l| l.as_slice()[i].to_string())
                    .unwrap_or_default(),
            ];
            row.extend(p.iter().map(|v| num(*v)));
            rows.push(row);
        }
    }
    let mut names = vec![
        "source".to_string(),
        "index".to_string(),
        "label".to_string(),
    ];
    names.extend((0..cfg.dims).map(|d| format!("pc{d}")));
    match cfg.format {
        Format::Csv => {
            out.csv("pca.csv", &names, &rows)?;
        }
        Format::Json => {
            out.json("pca_points.json", &rows)?;
        }
    }
    out.json(
        "pca_model.json",
        &serde_json::json!({
            "dims": proj.dims,
            "mean": proj.mean,
            "components": proj.components,
            "variances": proj.variances,
            "explained_variance_ratio": proj.explained_variance_ratio,
        }),
    )?;
    Ok(())
}
