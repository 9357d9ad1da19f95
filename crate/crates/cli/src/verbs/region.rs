//! `region fit|sample|export`: regions a head or density flags as
//! uncertain, their Monte-Carlo mass and a flat export.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};
use softood::geometry::{
    density_region, fit_linear_region, mc_region_mass, solve_alpha_exact_k2, BoxSampler,
    GaussianClassModel, MixtureSampler, Region, RegionExport, Sampler, DEFAULT_MC_SAMPLES,
    DEFAULT_MC_SEED,
};
use softood::rng;

use crate::config::{config_error, header, num, require, Format, Output};
use crate::verbs::{load_features, load_gmm, load_head};

#[derive(Debug, Subcommand)]
pub enum RegionCommand {
    /// Fit a region from a head, training features or a mixture.
    Fit(RegionFitFlags),
    /// Estimate a region's mass and emit sampled points with inside flags.
    Sample(RegionSampleFlags),
    /// Flatten a fitted region into CSV rows.
    Export(RegionExportFlags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    /// Exact two-class slab under a per-class Gaussian model.
    Slab,
    /// Pairwise-slab approximation for any head.
    #[default]
    Linear,
    /// Per-component Mahalanobis shells of a mixture.
    Density,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionFitConfig {
    pub kind: RegionKind,
    pub head: Option<PathBuf>,
    /// Training features; labelled for the slab.
    pub features: Option<PathBuf>,
    pub gmm: Option<PathBuf>,
    pub epsilon: f64,
    /// Diagonal regularization of the per-class covariances for the slab.
    pub class_reg: f64,
}

impl Default for RegionFitConfig {
    fn default() -> Self {
        Self {
            kind: RegionKind::Linear,
            head: None,
            features: None,
            gmm: None,
            epsilon: 0.05,
            class_reg: default_class_reg(),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct RegionFitFlags {
    #[arg(long, value_enum)]
    kind: Option<RegionKind>,
    #[arg(long)]
    head: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    gmm: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    class_reg: Option<f64>,
}

fn default_class_reg() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    /// Uniform on `[lo, hi]^H`.
    Box { lo: f64, hi: f64 },
    /// Per-class Gaussians fitted to labelled features.
    ClassModel {
        features: PathBuf,
        #[serde(default = "default_class_reg")]
        reg: f64,
    },
    /// A fitted mixture on raw features.
    Gmm { gmm: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionSampleConfig {
    pub region: Option<PathBuf>,
    pub sampler: SamplerSpec,
    pub n: usize,
    pub seed: u64,
    /// Number of sampled points written with their inside flag.
    pub points: usize,
}

impl Default for RegionSampleConfig {
    fn default() -> Self {
        Self {
            region: None,
            sampler: SamplerSpec::Box {
                lo: -10.0,
                hi: 10.0,
            },
            n: DEFAULT_MC_SAMPLES,
            seed: DEFAULT_MC_SEED,
            points: 1000,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct RegionSampleFlags {
    #[arg(long)]
    region: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionExportConfig {
    pub region: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Args, Serialize)]
pub struct RegionExportFlags {
    #[arg(long)]
    region: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn region_dim(r: &RegionExport) -> usize {
    match r {
        RegionExport::Slab(s) => s.normal.len(),
        RegionExport::Linear(l) => l.head.h(),
        RegionExport::Density(d) => d.gmm.h(),
    }
}

fn load_region(path: &Path) -> Result<RegionExport> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading region {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing region {}", path.display()))
}

pub fn run_fit(cfg: &RegionFitConfig, out: &Output) -> Result<()> {
    let (region, summary) = match cfg.kind {
        RegionKind::Slab => {
            let head = load_head(require(&cfg.head, "head")?)?;
            let (features, labels) = load_features(require(&cfg.features, "features")?)?;
            let labels = labels.ok_or_else(|| config_error("the slab needs labelled features"))?;
            let model = GaussianClassModel::from_labeled(&features, &labels, cfg.class_reg)?;
            let exact = solve_alpha_exact_k2(&model, &head, cfg.epsilon)?;
            let summary = serde_json::json!({
                "kind": "slab",
                "epsilon": cfg.epsilon,
                "alpha": exact.alpha,
                "crossing_mass": exact.crossing_mass,
                "separable": exact.separable,
            });
            (RegionExport::Slab(exact.slab), summary)
        }
        RegionKind::Linear => {
            let head = load_head(require(&cfg.head, "head")?)?;
            let (features, _) = load_features(require(&cfg.features, "features")?)?;
            let region = fit_linear_region(&head, &features, cfg.epsilon)?;
            let pairs: Vec<_> = region
                .pairs
                .iter()
                .map(|p| serde_json::json!({"i": p.i, "j": p.j, "alpha_i": p.alpha_i(), "alpha_j": p.alpha_j(), "margin": p.margin}))
                .collect();
            let summary = serde_json::json!({
                "kind": "linear",
                "epsilon": cfg.epsilon,
                "u_star": region.spec.u_star,
                "pairs": pairs,
            });
            (RegionExport::Linear(region), summary)
        }
        RegionKind::Density => {
            let gmm = load_gmm(require(&cfg.gmm, "gmm")?)?;
            let region = density_region(&gmm, cfg.epsilon)?;
            let summary = serde_json::json!({
                "kind": "density",
                "epsilon": cfg.epsilon,
                "thresholds": region.thresholds,
            });
            (RegionExport::Density(region), summary)
        }
    };
    out.json("region.json", &region)?;
    out.json("region_summary.json", &summary)?;
    Ok(())
}

fn build_sampler(spec: &SamplerSpec, dim: usize) -> Result<Box<dyn Sampler>> {
    Ok(match spec {
        SamplerSpec::Box { lo, hi } => {
            if !(hi > lo) {
                return Err(config_error("box sampler needs lo < hi"));
            }
            Box::new(BoxSampler::cube(dim, *lo, *hi))
        }
        SamplerSpec::ClassModel { features, reg } => {
            let (f, l) = load_features(features)?;
            let l = l.ok_or_else(|| config_error("class_model sampler needs labelled features"))?;
            Box::new(GaussianClassModel::from_labeled(&f, &l, *reg)?.sampler()?)
        }
        SamplerSpec::Gmm { gmm } => Box::new(MixtureSampler::from_mixture(&load_gmm(gmm)?)?),
    })
}

pub fn run_sample(cfg: &RegionSampleConfig, out: &Output) -> Result<()> {
    let region = load_region(require(&cfg.region, "region")?)?;
    let dim = region_dim(&region);
    let sampler = build_sampler(&cfg.sampler, dim)?;
    if sampler.dim() != dim {
        return Err(config_error(format!(
            "sampler dimension {} does not match region dimension {dim}",
            sampler.dim()
        )));
    }
    let mass = mc_region_mass(&region, sampler.as_ref(), cfg.n, cfg.seed)?;
    let std_error = (mass * (1.0 - mass) / cfg.n as f64).sqrt();
    out.json(
        "region_mass.json",
        &serde_json::json!({"n": cfg.n, "seed": cfg.seed, "mass": mass, "std_error": std_error}),
    )?;
    let mut r = rng::substream(cfg.seed, u64::MAX - 1);
    let mut z = vec![0.0; dim];
    let rows: Vec<Vec<String>> = (0..cfg.points.min(cfg.n))
        .map(|_| {
            sampler.sample_into(&mut r, &mut z);
            let mut row: Vec<String> = z.iter().map(|v| num(*v)).collect();
            row.push(u8::from(region.contains(&z)).to_string());
            row
        })
        .collect();
    let mut names: Vec<String> = (0..dim).map(|j| format!("z{j}")).collect();
    names.push("inside".into());
    out.csv("region_samples.csv", &names, &rows)?;
    Ok(())
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" ")
}

pub fn run_export(cfg: &RegionExportConfig, out: &Output) -> Result<()> {
    let region = load_region(require(&cfg.region, "region")?)?;
    let mut rows: Vec<Vec<String>> = Vec::new();
    match &region {
        RegionExport::Slab(s) => rows.push(vec![
            "slab".into(),
            "0".into(),
            "1".into(),
            num(s.alpha_lo),
            num(s.alpha_hi),
            String::new(),
            join(&s.normal),
            join(&s.anchor),
        ]),
        RegionExport::Linear(l) => {
            for p in &l.pairs {
                rows.push(vec![
                    "pair".into(),
                    p.i.to_string(),
                    p.j.to_string(),
                    num(p.slab.alpha_lo),
                    num(p.slab.alpha_hi),
                    num(l.spec.u_star),
                    join(&p.slab.normal),
                    join(&p.slab.anchor),
                ]);
            }
        }
        RegionExport::Density(d) => {
            for (c, t) in d.thresholds.iter().enumerate() {
                rows.push(vec![
                    "component".into(),
                    c.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    num(*t),
                    join(&d.gmm.means()[c]),
                    String::new(),
                ]);
            }
        }
    }
    let names = header(&[
        "kind",
        "i",
        "j",
        "alpha_lo",
        "alpha_hi",
        "threshold",
        "normal_or_mean",
        "anchor",
    ]);
    match cfg.format {
        Format::Csv => {
            out.csv("region_export.csv", &names, &rows)?;
        }
        Format::Json => {
            let objs: Vec<serde_json::Map<String, serde_json::Value>> = rows
                .iter()
                .map(|r| {
                    names
                        .iter()
                        .cloned()
                        .zip(r.iter().map(|c| serde_json::Value::String(c.clone())))
                        .collect()
                })
                .collect();
            out.json("region_export.json", &objs)?;
        }
    }
    Ok(())
}
