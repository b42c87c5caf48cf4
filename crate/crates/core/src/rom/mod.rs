//! Online stage: learned-basis evaluation, projected steps and the run loop.

pub mod basis;
pub mod projection;
pub mod run;
pub mod strategy;
pub mod system;

pub use basis::{basis_shift_deviation, evaluate_basis, predict_learning, BasisMatrix, BasisProvider, SystemBasis};
pub use projection::{
    online_step_explicit, online_step_galerkin, online_step_minres, project_full_solution, ProjectedBasis,
    ProjectionOptions, StepOutcome,
};
pub use run::{run_rom, RomRunResult, RunRequest, TimingLedger};
pub use strategy::{BasisKind, Projector, RomStrategy, StepContext, StrategyRegistry};
pub use system::{ExplicitEulerSystem, ImplicitSystem, OnlineSystem};
