//! Experiment configurations, the registry of named experiments and the staged pipeline.

pub mod config;
pub mod pipeline;
pub mod registry;

pub use config::{ExperimentConfig, Family, MeshConfig, NetworkConfig, ParamSet, Scale, SnapshotSource};
pub use pipeline::{
    compare_modes, load_train_report, run_experiment, Artifacts, Comparison, FailureRecord, Manifest, Pipeline, Stage,
    StageStatus, TimingRow,
};
pub use registry::{Experiment, ExperimentRegistry};
