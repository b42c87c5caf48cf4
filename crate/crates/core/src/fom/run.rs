use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fom::euler::{max_wave_speed, ssp_rk3_step, weno5_euler_rhs_flat, EulerState};
use crate::fom::flux::FluxRule;
use crate::fom::implicit::{ImplicitOperator, TimeScheme};
use crate::fom::mesh::{remap_solution, Mesh1D, MovingBandRule};
use crate::fom::problem::{FomProblem, Law};
use crate::fom::snapshot::SnapshotSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshSpec {
    Fixed { mesh: Mesh1D },
    MovingBand { rule: MovingBandRule },
}

impl MeshSpec {
    pub fn at(&self, t: f64) -> Result<Mesh1D> {
        match self {
            MeshSpec::Fixed { mesh } => Ok(mesh.clone()),
            MeshSpec::MovingBand { rule } => rule.mesh_at(t),
        }
    }

    pub fn is_moving(&self) -> bool {
        matches!(self, MeshSpec::MovingBand { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stepper {
    Implicit { scheme: TimeScheme, flux: FluxRule },
    WenoRk3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DtRule {
    Fixed { dt: f64 },
    /// `Δt = ratio · Δx` with `Δx` the smallest spacing of the initial mesh.
    MeshRatio { ratio: f64 },
    /// `Δt = cfl · Δx / max(|u| + c)`, recomputed every step.
    Cfl { cfl: f64 },
}

impl DtRule {
    pub fn fixed_dt(&self, mesh: &Mesh1D) -> Result<f64> {
        match *self {
            DtRule::Fixed { dt } => Ok(dt),
            DtRule::MeshRatio { ratio } => Ok(ratio * mesh.min_spacing()),
            DtRule::Cfl { .. } => Err(Error::InvalidInput("CFL time step needs an explicit stepper".into())),
        }
    }
}

/// Number of uniform steps of size `dt` that fit in `[0, t_end]`.
pub fn step_count(t_end: f64, dt: f64) -> usize {
    (t_end / dt + 1e-9).floor() as usize
}

/// Scalar full-order run from the initial condition; records every `record_every`-th step.
pub fn run_fom(
    problem: &FomProblem,
    mesh: &MeshSpec,
    stepper: Stepper,
    dt_rule: DtRule,
    t_end: f64,
    record_every: usize,
    mu: &[f64],
) -> Result<SnapshotSet> {
    problem.validate()?;
    if problem.law.is_system() {
        return Err(Error::InvalidInput("use run_euler for systems".into()));
    }
    let Stepper::Implicit { scheme, flux } = stepper else {
        return Err(Error::InvalidInput("scalar laws use an implicit stepper".into()));
    };
    let every = record_every.max(1);
    let mesh0 = mesh.at(0.0)?;
    let dt = dt_rule.fixed_dt(&mesh0)?;
    let steps = step_count(t_end, dt);
    let mut u = problem.initial_state(mesh0.nodes());
    let mut times = vec![0.0];
    let mut meshes = vec![mesh0.clone()];
    let mut values = u.clone();

    let mut current = mesh0;
    let mut op = ImplicitOperator::new(problem, &current, dt, scheme, flux)?;
    for n in 0..steps {
        let t_next = (n + 1) as f64 * dt;
        if mesh.is_moving() {
            let next = mesh.at(t_next)?;
            u = remap_solution(&current, &next, &u)?;
            op = ImplicitOperator::new(problem, &next, dt, scheme, flux)?;
            current = next;
        }
        u = op.step(&u).map_err(|e| e.at_step(n + 1, t_next))?;
        if (n + 1) % every == 0 {
            times.push(t_next);
            values.extend_from_slice(&u);
            if mesh.is_moving() {
                meshes.push(current.clone());
            }
        }
    }
    let mu = vec![mu.to_vec()];
    if mesh.is_moving() {
        SnapshotSet::with_meshes(&meshes, times, mu, values)
    } else {
        SnapshotSet::new(&meshes[0], times, mu, values)
    }
}

/// Euler trajectory, one snapshot set per conserved variable.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerTrajectory {
    pub rho: SnapshotSet,
    pub mom: SnapshotSet,
    pub energy: SnapshotSet,
}

impl EulerTrajectory {
    pub fn components(&self) -> [&SnapshotSet; 3] {
        [&self.rho, &self.mom, &self.energy]
    }

    pub fn state(&self, k: usize, j: usize) -> EulerState {
        EulerState::new(self.rho.snapshot(k, j), self.mom.snapshot(k, j), self.energy.snapshot(k, j))
            .expect("components share a mesh")
    }
}

/// The explicit Euler map `u ↦ SSP-RK3(u)` on a fixed mesh.
#[derive(Debug, Clone)]
pub struct EulerStepper {
    pub n: usize,
    pub dx: f64,
    pub gamma: f64,
    pub boundary: crate::fom::problem::Boundary,
}

impl EulerStepper {
    pub fn new(problem: &FomProblem, mesh: &Mesh1D) -> Result<Self> {
        let Law::Euler { gamma } = problem.law else {
            return Err(Error::InvalidInput("Euler stepper requires the Euler law".into()));
        };
        Ok(Self {
            n: mesh.len(),
            dx: mesh.min_spacing(),
            gamma,
            boundary: problem.boundary,
        })
    }

    /// One SSP-RK3 step of the flat `(ρ, ρu, E)` vector.
    pub fn step(&self, u: &[f64], dt: f64) -> Result<Vec<f64>> {
        ssp_rk3_step(|v| weno5_euler_rhs_flat(v, self.n, self.dx, self.gamma, self.boundary), u, dt)
    }

    pub fn cfl_dt(&self, u: &[f64], cfl: f64) -> Result<f64> {
        let s = EulerState::from_flat(u.to_vec())?;
        s.check_physical(self.gamma)?;
        Ok(cfl * self.dx / max_wave_speed(&s, self.gamma))
    }
}

/// WENO5 + SSP-RK3 run with CFL-limited steps, the last step clipped to `t_end`.
pub fn run_euler(problem: &FomProblem, mesh: &Mesh1D, cfl: f64, t_end: f64, mu: &[f64]) -> Result<EulerTrajectory> {
    run_euler_with_stops(problem, mesh, cfl, &[t_end], mu)
}

/// As [`run_euler`], clipping steps so that every time in `stops` (increasing) is hit exactly.
pub fn run_euler_with_stops(
    problem: &FomProblem,
    mesh: &Mesh1D,
    cfl: f64,
    stops: &[f64],
    mu: &[f64],
) -> Result<EulerTrajectory> {
    problem.validate()?;
    if stops.is_empty() || stops.windows(2).any(|w| w[1] <= w[0]) || stops[0] <= 0.0 {
        return Err(Error::InvalidInput(format!("bad stop times {stops:?}")));
    }
    let stepper = EulerStepper::new(problem, mesh)?;
    let mut u = EulerState::from_primitive(&problem.initial_condition, mesh.nodes(), stepper.gamma).into_flat();
    let mut times = vec![0.0];
    let mut values = vec![u.clone()];
    let mut t = 0.0;
    let mut n = 0;
    for &stop in stops {
        while t < stop - 1e-14 {
            let mut dt = stepper.cfl_dt(&u, cfl).map_err(|e| e.at_step(n, t))?;
            if t + dt > stop {
                dt = stop - t;
            }
            u = stepper.step(&u, dt).map_err(|e| e.at_step(n + 1, t + dt))?;
            t = if (t + dt - stop).abs() <= 1e-14 { stop } else { t + dt };
            n += 1;
            times.push(t);
            values.push(u.clone());
        }
    }
    let n_nodes = mesh.len();
    let component = |c: usize| -> Result<SnapshotSet> {
        let vals: Vec<f64> = values.iter().flat_map(|v| v[c * n_nodes..(c + 1) * n_nodes].iter().copied()).collect();
        SnapshotSet::new(mesh, times.clone(), vec![mu.to_vec()], vals)
    };
    Ok(EulerTrajectory {
        rho: component(0)?,
        mom: component(1)?,
        energy: component(2)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::problem::{Boundary, InitialCondition};

    #[test]
    fn zero_initial_condition_stays_zero() {
        let p = FomProblem {
            law: Law::LinearAdvection { c: 1.0 },
            initial_condition: InitialCondition::Zero,
            boundary: Boundary::ZeroInflow,
        };
        let mesh = MeshSpec::Fixed {
            mesh: Mesh1D::uniform(0.0, 1.0, 20).unwrap(),
        };
        let s = run_fom(
            &p,
            &mesh,
            Stepper::Implicit {
                scheme: TimeScheme::BackwardEuler,
                flux: FluxRule::Upwind,
            },
            DtRule::MeshRatio { ratio: 1.0 },
            0.5,
            1,
            &[],
        )
        .unwrap();
        assert_eq!(s.n_times(), 11);
        assert!(s.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_count_floors() {
        assert_eq!(step_count(0.25, 0.02), 12);
        assert_eq!(step_count(0.5, 0.02), 25);
        assert_eq!(step_count(1.1, 0.25 * 2.0 / 400.0), 880);
    }

    #[test]
    fn moving_mesh_run_records_meshes() {
        let p = FomProblem {
            law: Law::LinearAdvection { c: 1.0 },
            initial_condition: InitialCondition::Box {
                left: 0.6,
                right: 1.4,
                height: 2.0,
                inclusive: false,
            },
            boundary: Boundary::ZeroInflow,
        };
        let rule = MovingBandRule::default();
        let s = run_fom(
            &p,
            &MeshSpec::MovingBand { rule },
            Stepper::Implicit {
                scheme: TimeScheme::BackwardEuler,
                flux: FluxRule::Upwind,
            },
            DtRule::Fixed { dt: rule.h_coarse() },
            0.04,
            1,
            &[],
        )
        .unwrap();
        assert_eq!(s.n_times(), 6);
        assert!(s.has_per_snapshot_meshes());
        assert_ne!(s.nodes(0), s.nodes(5));
    }
}
