//! `softood`: command-line driver for scoring, density fitting, uncertain
//! regions, head structure and the reference-network experiments.
//!
//! Every verb reads an optional JSON config (`--config`), overlays its
//! flags, echoes the result to `effective_config.json` in the output
//! directory and writes its artifacts next to it.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod verbs;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use config::{resolve, ConfigError, Output};
use softood::ErrorKind;
use verbs::region::RegionCommand;

#[derive(Debug, Parser)]
#[command(
    name = "softood",
    version,
    about = "Softmax-confidence OOD analysis toolkit"
)]
struct Cli {
    /// JSON config for the verb; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts and the effective config.
    #[arg(
        long,
        global = true,
        env = "SOFTOOD_OUT_DIR",
        default_value = "softood-out"
    )]
    out_dir: PathBuf,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Score features with every uncertainty estimator.
    Score(verbs::score::ScoreFlags),
    /// Fit a Gaussian mixture to features with EM.
    FitGmm(verbs::gmm::FitGmmFlags),
    /// Fit, sample or export uncertain regions.
    #[command(subcommand)]
    Region(RegionCommand),
    /// Compare a head against the optimal structure.
    AuditHead(verbs::audit::AuditHeadFlags),
    /// Generate an optimal or counterfactual head.
    GenHead(verbs::gen_head::GenHeadFlags),
    /// Attribute detection failures to their three causes.
    Attribute(verbs::attribute::AttributeFlags),
    /// Train the reference network on a synthetic task.
    TrainToy(verbs::train_toy::TrainToyFlags),
    /// Frozen-head structure experiment over seeds.
    Counterfactual(verbs::counterfactual::CounterfactualFlags),
    /// Keep the most confident inputs of a trained model per class.
    Sweep(verbs::sweep::SweepFlags),
    /// OOD detection as a function of network depth.
    DepthStudy(verbs::depth::DepthFlags),
    /// Principal-component projection of features.
    Pca(verbs::pca::PcaFlags),
}

/// Resolve, echo and run one verb.
fn execute<C, F>(
    file: Option<&Path>,
    flags: &F,
    out: &Output,
    adjust: impl FnOnce(&mut C),
    run: impl FnOnce(&C, &Output) -> Result<()>,
) -> Result<()>
where
    C: DeserializeOwned + Serialize + Default,
    F: Serialize,
{
    let mut cfg: C = resolve(file, flags)?;
    adjust(&mut cfg);
    out.effective_config(&cfg)?;
    run(&cfg, out)
}

fn dispatch(cli: &Cli) -> Result<()> {
    let out = Output::new(&cli.out_dir)?;
    let file = cli.config.as_deref();
    match &cli.verb {
        Verb::Score(f) => execute(file, f, &out, |_| {}, verbs::score::run),
        Verb::FitGmm(f) => execute(file, f, &out, |_| {}, verbs::gmm::run),
        Verb::Region(RegionCommand::Fit(f)) => {
            execute(file, f, &out, |_| {}, verbs::region::run_fit)
        }
        Verb::Region(RegionCommand::Sample(f)) => {
            execute(file, f, &out, |_| {}, verbs::region::run_sample)
        }
        Verb::Region(RegionCommand::Export(f)) => {
            execute(file, f, &out, |_| {}, verbs::region::run_export)
        }
        Verb::AuditHead(f) => execute(file, f, &out, |_| {}, verbs::audit::run),
        Verb::GenHead(f) => execute(file, f, &out, |_| {}, verbs::gen_head::run),
        Verb::Attribute(f) => execute(file, f, &out, |_| {}, verbs::attribute::run),
        Verb::TrainToy(f) => execute(file, f, &out, |_| {}, verbs::train_toy::run),
        Verb::Counterfactual(f) => execute(
            file,
            f,
            &out,
            |c| verbs::counterfactual::apply_seed_count(c, f),
            verbs::counterfactual::run,
        ),
        Verb::Sweep(f) => execute(file, f, &out, |_| {}, verbs::sweep::run),
        Verb::DepthStudy(f) => execute(
            file,
            f,
            &out,
            |c| verbs::depth::apply_seed_count(c, f),
            verbs::depth::run,
        ),
        Verb::Pca(f) => execute(file, f, &out, |_| {}, verbs::pca::run),
    }
}

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

/// Config and input problems, IO and format failures, and numerical
/// failures get distinct codes; anything else exits with 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<softood::Error>() {
            return match e.kind() {
                ErrorKind::Input => EXIT_CONFIG,
                ErrorKind::Io => EXIT_IO,
                ErrorKind::Numerical => EXIT_NUMERICAL,
            };
        }
        if cause.is::<std::io::Error>()
            || cause.is::<csv::Error>()
            || cause.is::<serde_json::Error>()
        {
            return EXIT_IO;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
