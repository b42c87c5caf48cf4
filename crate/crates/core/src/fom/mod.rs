//! Full-order solvers: implicit conservative schemes, moving meshes and WENO5 for the Euler system.

pub mod euler;
pub mod flux;
pub mod implicit;
pub mod mesh;
pub mod problem;
pub mod run;
pub mod snapshot;

pub use euler::{max_wave_speed, ssp_rk3_step, weno5_euler_rhs, weno5_reconstruct, weno5_weights, EulerState};
pub use flux::{flux_lf_burgers, flux_upwind, flux_upwind_biased, FluxRule};
pub use implicit::{implicit_step, ImplicitOperator, StepOperator, TimeScheme};
pub use mesh::{interpolate, moving_mesh_nodes, remap_solution, Mesh1D, MovingBandRule};
pub use problem::{exact_advection, Boundary, FomProblem, InitialCondition, Law};
pub use run::{run_euler, run_euler_with_stops, run_fom, step_count, DtRule, EulerStepper, EulerTrajectory, MeshSpec, Stepper};
pub use snapshot::{sidecar_path, SnapshotSet};
