//! `attribute`: AUROCs of the four estimators and the three failure
//! causes, from direct values or from scenario files aggregated over
//! seeds as mean ± standard error.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use softood::metrics::{attribute, auroc, balance, mean_se, AttributionReport};

use crate::config::{config_error, num, Format, Output};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttributeConfig {
    /// Scenario file; when absent all four AUROCs must be given directly.
    pub scenarios: Option<PathBuf>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub d: Option<f64>,
    /// Seed for balancing in- and out-of-distribution score sets.
    pub seed: u64,
    pub format: Format,
}

#[derive(Debug, Args, Serialize)]
pub struct AttributeFlags {
    #[arg(long)]
    scenarios: Option<PathBuf>,
    /// AUROC of the max-probability score.
    #[arg(long)]
    a: Option<f64>,
    /// AUROC of the entropy score.
    #[arg(long)]
    b: Option<f64>,
    /// AUROC of the cooled-entropy score.
    #[arg(long)]
    c: Option<f64>,
    /// AUROC of the density score.
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

/// A list of named rows, each holding one run per seed.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub rows: Vec<Scenario>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub runs: Vec<ScenarioRun>,
}

/// Either the four AUROCs or two score CSVs as written by `score`. Score
/// paths are relative to the scenario file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRun {
    Aurocs {
        a: f64,
        b: f64,
        c: f64,
        d: f64,
    },
    Scores {
        in_scores: PathBuf,
        out_scores: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldStat {
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregatedRow {
    pub name: String,
    pub runs: Vec<AttributionReport>,
    pub auroc_max: FieldStat,
    pub auroc_entropy: FieldStat,
    pub auroc_cool: FieldStat,
    pub auroc_density: FieldStat,
    pub cause1: FieldStat,
    pub cause2: FieldStat,
    pub cause3: FieldStat,
    /// `cause1 + cause2 + cause3 − (1 − B)` on the means.
    pub identity_residual: f64,
}

const SCORE_COLUMNS: [&str; 4] = ["u_max", "u_entropy", "u_cool", "u_density"];

fn read_score_columns(path: &Path) -> Result<[Vec<f64>; 4]> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("reading scores {}", path.display()))?;
    let head = reader.headers()?.clone();
    let idx: Vec<usize> = SCORE_COLUMNS
        .iter()
        .map(|c| {
            head.iter()
                .position(|h| h == *c)
                .ok_or_else(|| config_error(format!("{} lacks column {c}", path.display())))
        })
        .collect::<Result<_>>()?;
    let mut cols: [Vec<f64>; 4] = Default::default();
    for record in reader.records() {
        let record = record?;
        for (col, &i) in cols.iter_mut().zip(&idx) {
            let cell = record.get(i).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| {
                config_error(format!("{}: cannot parse score {cell:?}", path.display()))
            })?;
            col.push(v);
        }
    }
    Ok(cols)
}

fn run_report(run: &ScenarioRun, base: &Path, seed: u64) -> Result<AttributionReport> {
    match run {
        ScenarioRun::Aurocs { a, b, c, d } => Ok(attribute(*a, *b, *c, *d)),
        ScenarioRun::Scores {
            in_scores,
            out_scores,
        } => {
            let s_in = read_score_columns(&base.join(in_scores))?;
            let s_out = read_score_columns(&base.join(out_scores))?;
            let (i_in, i_out) = balance(s_in[0].len(), s_out[0].len(), seed)?;
            let mut values = [0.0; 4];
            for (v, (a, b)) in values.iter_mut().zip(s_in.iter().zip(&s_out)) {
                let a: Vec<f64> = i_in.iter().map(|&i| a[i]).collect();
                let b: Vec<f64> = i_out.iter().map(|&i| b[i]).collect();
                *v = auroc(&a, &b)?;
            }
            Ok(attribute(values[0], values[1], values[2], values[3]))
        }
    }
}

fn stat(values: impl Iterator<Item = f64>) -> Result<FieldStat> {
    let v: Vec<f64> = values.collect();
    let (mean, se) = mean_se(&v)?;
    Ok(FieldStat { mean, se })
}

fn aggregate(name: &str, runs: Vec<AttributionReport>) -> Result<AggregatedRow> {
    let auroc_entropy = stat(runs.iter().map(|r| r.auroc_entropy))?;
    let cause1 = stat(runs.iter().map(|r| r.cause1))?;
    let cause2 = stat(runs.iter().map(|r| r.cause2))?;
    let cause3 = stat(runs.iter().map(|r| r.cause3))?;
    let identity_residual = cause1.mean + cause2.mean + cause3.mean - (1.0 - auroc_entropy.mean);
    Ok(AggregatedRow {
        name: name.to_string(),
        auroc_max: stat(runs.iter().map(|r| r.auroc_max))?,
        auroc_entropy,
        auroc_cool: stat(runs.iter().map(|r| r.auroc_cool))?,
        auroc_density: stat(runs.iter().map(|r| r.auroc_density))?,
        cause1,
        cause2,
        cause3,
        identity_residual,
        runs,
    })
}

pub fn run(cfg: &AttributeConfig, out: &Output) -> Result<()> {
    let rows = match &cfg.scenarios {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading scenarios {}", path.display()))?;
            let file: ScenarioFile = serde_json::from_str(&text)
                .map_err(|e| config_error(format!("scenarios {}: {e}", path.display())))?;
            let base = path.parent().unwrap_or(Path::new("."));
            file.rows
                .iter()
                .map(|s| {
                    if s.runs.is_empty() {
                        return Err(config_error(format!("scenario {} has no runs", s.name)));
                    }
                    let reports = s
                        .runs
                        .iter()
                        .enumerate()
                        .map(|(i, r)| run_report(r, base, cfg.seed.wrapping_add(i as u64)))
                        .collect::<Result<Vec<_>>>()?;
                    aggregate(&s.name, reports)
                })
                .collect::<Result<Vec<_>>>()?
        }
        None => match (cfg.a, cfg.b, cfg.c, cfg.d) {
            (Some(a), Some(b), Some(c), Some(d)) => {
                vec![aggregate("direct", vec![attribute(a, b, c, d)])?]
            }
            _ => {
                return Err(config_error(
                    "give either `scenarios` or all of `a`, `b`, `c`, `d`",
                ))
            }
        },
    };
    match cfg.format {
        Format::Json => {
            out.json("attribution.json", &rows)?;
        }
        Format::Csv => {
            let mut names = vec!["name".to_string()];
            for f in [
                "auroc_max",
                "auroc_entropy",
                "auroc_cool",
                "auroc_density",
                "cause1",
                "cause2",
                "cause3",
            ] {
                names.push(format!("{f}_mean"));
                names.push(format!("{f}_se"));
            }
            names.push("runs".into());
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let mut row = vec![r.name.clone()];
                    for s in [
                        &r.auroc_max,
                        &r.auroc_entropy,
                        &r.auroc_cool,
                        &r.auroc_density,
                        &r.cause1,
                        &r.cause2,
                        &r.cause3,
                    ] {
                        row.push(num(s.mean));
                        row.push(num(s.se));
                    }
                    row.push(r.runs.len().to_string());
                    row
                })
                .collect();
            out.csv("attribution.csv", &names, &cells)?;
        }
    }
    Ok(())
}
