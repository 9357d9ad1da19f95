//! `gen-head`: optimal or counterfactual head weights.

use anyhow::Result;
use clap::Args;
use serde::{Deserialize, Serialize};
use softood::features::save_head;
use softood::structure::{
    gen_counterfactual_head, gen_optimal_head, CounterfactualKind, OptimalStructureSpec,
};

use crate::config::Output;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    #[default]
    Optimal,
    Sandwich,
    Stack,
    Lopsided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenHeadConfig {
    pub kind: HeadKind,
    pub k: usize,
    pub h: usize,
    /// Common weight norm (optimal) or scale `c` (counterfactuals).
    pub norm: f64,
    pub seed: u64,
}

impl Default for GenHeadConfig {
    fn default() -> Self {
        Self {
            kind: HeadKind::Optimal,
            k: 3,
            h: 16,
            norm: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GenHeadFlags {
    #[arg(long, value_enum)]
    kind: Option<HeadKind>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    norm: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

pub fn run(cfg: &GenHeadConfig, out: &Output) -> Result<()> {
    let counterfactual = match cfg.kind {
        HeadKind::Optimal => None,
        HeadKind::Sandwich => Some(CounterfactualKind::Sandwich),
        HeadKind::Stack => Some(CounterfactualKind::Stack),
        HeadKind::Lopsided => Some(CounterfactualKind::Lopsided),
    };
    let head = match counterfactual {
        None => {
            let spec = OptimalStructureSpec {
                c1: cfg.norm,
                ..OptimalStructureSpec::new(cfg.k, cfg.h)
            };
            let head = gen_optimal_head(&spec, cfg.seed)?;
            out.json("head_metadata.json", &spec)?;
            head
        }
        Some(kind) => {
            let generated = gen_counterfactual_head(kind, cfg.k, cfg.h, cfg.norm, cfg.seed)?;
            out.json("head_metadata.json", &generated.metadata)?;
            generated.head
        }
    };
    save_head(&out.path("head.csv"), &head)?;
    Ok(())
}
