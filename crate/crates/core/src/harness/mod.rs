//! Experiment orchestration: configuration, per-model runs, artifact
//! directories and (N, α) sweeps.

mod config;
mod output;
mod run;
mod sweep;

pub use config::{
    ChainBlock, DualBlock, ExperimentConfig, ModelKind, OracleBlock, SsepBlock, SweepSpec, ThermoBlock,
    ZeroRangeBlock,
};
pub use output::{Manifest, ManifestFile};
pub use run::{estimated_work, run_experiment, ExperimentSummary, Provenance, StatRow};
pub use sweep::{run_sweep, ConvergenceRow, ConvergenceTable, FittedRate};
