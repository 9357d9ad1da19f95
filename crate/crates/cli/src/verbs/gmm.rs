//! `fit-gmm`: EM on a feature file.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde::{Deserialize, Serialize};
use softood::gmm::{fit_em_traced, FeatureTransform, InitMethod};
use softood::EmConfig;

use crate::config::{header, num, require, Format, Output};
use crate::verbs::load_features;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitGmmConfig {
    pub features: Option<PathBuf>,
    /// Use the label column (when present) for initialization and K.
    pub use_labels: bool,
    pub em: EmConfig,
    pub format: Format,
}

impl Default for FitGmmConfig {
    fn default() -> Self {
        Self {
            features: None,
            use_labels: true,
            em: EmConfig::default(),
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum InitFlag {
    Labels,
    KmeansPp,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum TransformFlag {
    Identity,
    SignedLog,
}

#[derive(Debug, Args, Serialize)]
pub struct FitGmmFlags {
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    use_labels: Option<bool>,
    #[arg(long)]
    #[serde(rename = "em.k_components")]
    components: Option<usize>,
    #[arg(long)]
    #[serde(rename = "em.max_iter")]
    max_iter: Option<usize>,
    #[arg(long)]
    #[serde(rename = "em.rel_tol")]
    rel_tol: Option<f64>,
    #[arg(long)]
    #[serde(rename = "em.reg")]
    reg: Option<f64>,
    #[arg(long)]
    #[serde(rename = "em.seed")]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    #[serde(rename = "em.init")]
    init: Option<InitFlag>,
    #[arg(long, value_enum)]
    #[serde(rename = "em.transform")]
    transform: Option<TransformFlag>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Serialize)]
struct FitSummary {
    components: usize,
    dim: usize,
    iterations: usize,
    converged: bool,
    reinitializations: usize,
    init: InitMethod,
    transform: FeatureTransform,
    final_log_likelihood: f64,
    log_likelihood: Vec<f64>,
}

pub fn run(cfg: &FitGmmConfig, out: &Output) -> Result<()> {
    let (features, labels) = load_features(require(&cfg.features, "features")?)?;
    let labels = if cfg.use_labels { labels } else { None };
    let fit = fit_em_traced(&features, labels.as_ref(), &cfg.em)?;
    out.text("gmm.json", &fit.mixture.to_json()?)?;
    let init = cfg.em.init.unwrap_or(if labels.is_some() {
        InitMethod::Labels
    } else {
        InitMethod::KmeansPp
    });
    let summary = FitSummary {
        components: fit.mixture.k(),
        dim: fit.mixture.h(),
        iterations: fit.iterations,
        converged: fit.converged,
        reinitializations: fit.reinitializations,
        init,
        transform: cfg.em.transform,
        final_log_likelihood: *fit.log_likelihood.last().unwrap_or(&f64::NAN),
        log_likelihood: fit.log_likelihood.clone(),
    };
    match cfg.format {
        Format::Json => {
            out.json("fit_trace.json", &summary)?;
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = fit
                .log_likelihood
                .iter()
                .enumerate()
                .map(|(i, ll)| vec![i.to_string(), num(*ll)])
                .collect();
            out.csv(
                "fit_trace.csv",
                &header(&["iteration", "log_likelihood"]),
                &rows,
            )?;
        }
    }
    Ok(())
}
