//! Small dense networks and synthetic tasks for end-to-end experiments.

pub mod counterfactual;
pub mod depth;
pub mod mlp;
pub mod sweep;
pub mod tasks;
pub mod train;

pub use counterfactual::{
    run_counterfactual, CounterfactualConfig, CounterfactualReport, Structure, StructureRow,
};
pub use depth::{depth_run, depth_study, DepthRow, DepthStudyConfig, DepthTable};
pub use mlp::{Activation, Mlp, MlpSpec};
pub use sweep::{confidence_sweep, sweep_inputs, SweepResult, SweptSample};
pub use tasks::SyntheticTask;
pub use train::{train, Model, TrainConfig};
