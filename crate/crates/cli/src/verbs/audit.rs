//! `audit-head`: how far a head is from the optimal structure, and the
//! norm and angle profile of features under it.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde::{Deserialize, Serialize};
use softood::structure::{angle_stats, audit_head};

use crate::config::{header, num, require, Format, Output};
use crate::verbs::{load_features, load_head};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditHeadConfig {
    pub head: Option<PathBuf>,
    /// Optional features for the `‖z‖` and `max cos θ` profile.
    pub features: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Args, Serialize)]
pub struct AuditHeadFlags {
    #[arg(long)]
    head: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

pub fn run(cfg: &AuditHeadConfig, out: &Output) -> Result<()> {
    let head = load_head(require(&cfg.head, "head")?)?;
    let report = audit_head(&head)?;
    out.json("audit.json", &report)?;
    let angles = match &cfg.features {
        Some(path) => {
            let (features, _) = load_features(path)?;
            Some(angle_stats(&features, &head)?)
        }
        None => None,
    };
    match cfg.format {
        Format::Json => {
            if let Some(a) = &angles {
                out.json("angles.json", a)?;
            }
        }
        Format::Csv => {
            let k = report.k;
            let mut rows = Vec::new();
            let mut idx = 0;
            for i in 0..k {
                for j in i + 1..k {
                    rows.push(vec![
                        i.to_string(),
                        j.to_string(),
                        num(report.pairwise_cos[idx]),
                        num(report.pairwise_cos[idx] - report.target_cos),
                    ]);
                    idx += 1;
                }
            }
            out.csv(
                "pairwise_cos.csv",
                &header(&["i", "j", "cos", "deviation"]),
                &rows,
            )?;
            if let Some(a) = &angles {
                let rows: Vec<Vec<String>> = a
                    .z_norm
                    .iter()
                    .zip(&a.max_cos)
                    .enumerate()
                    .map(|(i, (n, c))| vec![i.to_string(), num(*n), num(*c)])
                    .collect();
                out.csv(
                    "angles.csv",
                    &header(&["sample_index", "z_norm", "max_cos"]),
                    &rows,
                )?;
            }
        }
    }
    Ok(())
}
