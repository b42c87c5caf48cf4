use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::fom::flux::FluxRule;
use crate::fom::implicit::{ImplicitOperator, StepOperator, TimeScheme};
use crate::fom::mesh::{remap_solution, Mesh1D};
use crate::fom::problem::FomProblem;
use crate::fom::run::{EulerStepper, MeshSpec};
use crate::linalg::{GmresOptions, NewtonOptions};

/// Full-order machinery the online stage borrows: meshes, transfers and one-step maps.
#[derive(Debug, Clone)]
pub enum OnlineSystem {
    Implicit(ImplicitSystem),
    Explicit(ExplicitEulerSystem),
}

impl OnlineSystem {
    pub fn times(&self) -> &[f64] {
        match self {
            OnlineSystem::Implicit(s) => &s.times,
            OnlineSystem::Explicit(s) => &s.times,
        }
    }

    pub fn components(&self) -> usize {
        match self {
            OnlineSystem::Implicit(_) => 1,
            OnlineSystem::Explicit(_) => 3,
        }
    }

    pub fn is_explicit(&self) -> bool {
        matches!(self, OnlineSystem::Explicit(_))
    }

    pub fn mesh(&self, n: usize) -> Result<Mesh1D> {
        match self {
            OnlineSystem::Implicit(s) => s.mesh.at(s.times[n]),
            OnlineSystem::Explicit(s) => Ok(s.mesh.clone()),
        }
    }

    pub fn is_moving(&self) -> bool {
        matches!(self, OnlineSystem::Implicit(s) if s.mesh.is_moving())
    }

    /// Carries a state from the mesh at `times[n]` to the mesh at `times[n+1]`.
    pub fn transfer(&self, n: usize, u: &[f64]) -> Result<Vec<f64>> {
        if !self.is_moving() {
            return Ok(u.to_vec());
        }
        remap_solution(&self.mesh(n)?, &self.mesh(n + 1)?, u)
    }
}

#[derive(Debug, Clone)]
pub struct ImplicitSystem {
    pub problem: FomProblem,
    pub mesh: MeshSpec,
    pub scheme: TimeScheme,
    pub flux: FluxRule,
    pub dt: f64,
    pub times: Vec<f64>,
    pub gmres: GmresOptions,
    pub newton: NewtonOptions,
    fixed: Option<ImplicitOperator>,
}

impl ImplicitSystem {
    /// Steps `n_start..n_end` of size `dt`.
    pub fn new(
        problem: FomProblem,
        mesh: MeshSpec,
        scheme: TimeScheme,
        flux: FluxRule,
        dt: f64,
        n_start: usize,
        n_end: usize,
    ) -> Result<Self> {
        if n_end <= n_start {
            return Err(Error::InvalidInput(format!("empty step range {n_start}..{n_end}")));
        }
        let times = (n_start..=n_end).map(|k| k as f64 * dt).collect();
        let fixed = match &mesh {
            MeshSpec::Fixed { mesh } => Some(ImplicitOperator::new(&problem, mesh, dt, scheme, flux)?),
            MeshSpec::MovingBand { .. } => None,
        };
        Ok(Self {
            problem,
            mesh,
            scheme,
            flux,
            dt,
            times,
            gmres: GmresOptions::default(),
            newton: NewtonOptions::default(),
            fixed,
        })
    }

    /// The operator of the step ending at `times[n]`.
    pub fn operator(&self, n: usize) -> Result<Cow<'_, ImplicitOperator>> {
        let mut op = match &self.fixed {
            Some(op) => Cow::Borrowed(op),
            None => Cow::Owned(ImplicitOperator::new(
                &self.problem,
                &self.mesh.at(self.times[n])?,
                self.dt,
                self.scheme,
                self.flux,
            )?),
        };
        if op.gmres != self.gmres || op.newton != self.newton {
            let o = op.to_mut();
            o.gmres = self.gmres;
            o.newton = self.newton;
        }
        Ok(op)
    }

    /// Full-order step `times[n] → times[n+1]` from a state on mesh `n`.
    pub fn full_step(&self, n: usize, u: &[f64]) -> Result<Vec<f64>> {
        let u = if self.mesh.is_moving() {
            remap_solution(&self.mesh.at(self.times[n])?, &self.mesh.at(self.times[n + 1])?, u)?
        } else {
            u.to_vec()
        };
        let op = self.operator(n + 1)?;
        op.solve(&op.rhs(&u), &u)
    }

    pub fn len(&self) -> Result<usize> {
        Ok(self.operator(0)?.len())
    }
}

#[derive(Debug, Clone)]
pub struct ExplicitEulerSystem {
    pub stepper: EulerStepper,
    pub mesh: Mesh1D,
    /// Follows the reference trajectory's CFL-driven stamps.
    pub times: Vec<f64>,
}

impl ExplicitEulerSystem {
    pub fn new(problem: &FomProblem, mesh: Mesh1D, times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidInput("explicit run needs at least two time stamps".into()));
        }
        Ok(Self {
            stepper: EulerStepper::new(problem, &mesh)?,
            mesh,
            times,
        })
    }

    pub fn update(&self, n: usize, u: &[f64]) -> Result<Vec<f64>> {
        self.stepper.step(u, self.times[n + 1] - self.times[n])
    }
}
