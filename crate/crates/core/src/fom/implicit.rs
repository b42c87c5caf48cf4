use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fom::flux::{flux_lf_burgers, flux_lf_burgers_derivative, FluxRule};
use crate::fom::mesh::Mesh1D;
use crate::fom::problem::{Boundary, FomProblem, Law};
use crate::linalg::{gmres_from, newton_solve, GmresOptions, NewtonOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    BackwardEuler,
    CrankNicolson,
}

impl TimeScheme {
    pub fn theta(self) -> f64 {
        match self {
            TimeScheme::BackwardEuler => 1.0,
            TimeScheme::CrankNicolson => 0.5,
        }
    }
}

/// One-step full-order map `F(u^{n+1}) = b^n`.
pub trait StepOperator: Sync {
    fn len(&self) -> usize;
    fn apply(&self, u: &[f64]) -> Vec<f64>;
    /// `J_F(u) v`.
    fn jacobian_apply(&self, u: &[f64], v: &[f64]) -> Vec<f64>;
    fn is_linear(&self) -> bool;
    fn rhs(&self, u_n: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy)]
enum Src {
    Node(usize),
    Zero,
}

impl Src {
    #[inline]
    fn get(self, u: &[f64]) -> f64 {
        match self {
            Src::Node(i) => u[i],
            Src::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Interface {
    left: Src,
    right: Src,
    /// Linear flux coefficients `f = a_l u_l + a_r u_r`.
    a_l: f64,
    a_r: f64,
    dx: f64,
}

#[derive(Debug, Clone)]
enum FluxKind {
    Linear,
    Burgers { dt: f64 },
}

/// Conservative flux-difference operator `D(u)_j = (f_{j+½} − f_{j−½}) / h_j` wrapped in a θ-scheme.
#[derive(Debug, Clone)]
pub struct ImplicitOperator {
    interfaces: Vec<Interface>,
    inv_widths: Vec<f64>,
    kind: FluxKind,
    theta_dt: f64,
    explicit_dt: f64,
    pub gmres: GmresOptions,
    pub newton: NewtonOptions,
}

impl ImplicitOperator {
    pub fn new(problem: &FomProblem, mesh: &Mesh1D, dt: f64, scheme: TimeScheme, flux: FluxRule) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
        }
        let n = mesh.len();
        let x = mesh.nodes();
        let periodic = mesh.is_periodic();
        if periodic != (problem.boundary == Boundary::Periodic) {
            return Err(Error::InvalidInput(
                "periodic boundary requires a periodic mesh and vice versa".into(),
            ));
        }
        let ghost = |inside: usize| match problem.boundary {
            Boundary::ZeroInflow => Src::Zero,
            Boundary::Outflow => Src::Node(inside),
            Boundary::Periodic => unreachable!(),
        };
        let kind = match (&problem.law, flux) {
            (Law::Burgers, FluxRule::LaxFriedrichs) => FluxKind::Burgers { dt },
            (Law::LinearAdvection { .. } | Law::VariableAdvection { .. }, FluxRule::Upwind | FluxRule::UpwindBiased) => {
                FluxKind::Linear
            }
            (law, rule) => {
                return Err(Error::InvalidInput(format!(
                    "flux rule {rule:?} is not available for {law:?}"
                )))
            }
        };
        let speed = |xv: f64| problem.law.speed(xv);
        let coeffs = |xl: f64, xr: f64| -> (f64, f64) {
            let (cl, cr) = (speed(xl), speed(xr));
            match flux {
                FluxRule::Upwind => (cl.max(0.0), cr.min(0.0)),
                FluxRule::UpwindBiased => (0.75 * cl, 0.25 * cr),
                FluxRule::LaxFriedrichs => (0.0, 0.0),
            }
        };
        // interface k sits between node k-1 and node k
        let mut interfaces = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let (left, right, xl, xr) = if periodic {
                let l = (k + n - 1) % n;
                let r = k % n;
                let xl = if k == 0 { x[n - 1] - mesh.period().unwrap() } else { x[l] };
                let xr = if k == n { x[0] + mesh.period().unwrap() } else { x[r] };
                (Src::Node(l), Src::Node(r), xl, xr)
            } else if k == 0 {
                let h = x[1] - x[0];
                (ghost(0), Src::Node(0), x[0] - h, x[0])
            } else if k == n {
                let h = x[n - 1] - x[n - 2];
                (Src::Node(n - 1), ghost(n - 1), x[n - 1], x[n - 1] + h)
            } else {
                (Src::Node(k - 1), Src::Node(k), x[k - 1], x[k])
            };
            let (a_l, a_r) = coeffs(xl, xr);
            interfaces.push(Interface {
                left,
                right,
                a_l,
                a_r,
                dx: xr - xl,
            });
        }
        let theta = scheme.theta();
        Ok(Self {
            interfaces,
            inv_widths: mesh.widths().iter().map(|h| 1.0 / h).collect(),
            kind,
            theta_dt: theta * dt,
            explicit_dt: (1.0 - theta) * dt,
            gmres: GmresOptions::default(),
            newton: NewtonOptions::default(),
        })
    }

    fn fluxes(&self, u: &[f64]) -> Vec<f64> {
        match self.kind {
            FluxKind::Linear => self
                .interfaces
                .iter()
                .map(|f| f.a_l * f.left.get(u) + f.a_r * f.right.get(u))
                .collect(),
            FluxKind::Burgers { dt } => self
                .interfaces
                .iter()
                .map(|f| flux_lf_burgers(f.left.get(u), f.right.get(u), f.dx, dt))
                .collect(),
        }
    }

    fn flux_jvp(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        match self.kind {
            FluxKind::Linear => self.fluxes(v),
            FluxKind::Burgers { dt } => self
                .interfaces
                .iter()
                .map(|f| {
                    let (dl, dr) = flux_lf_burgers_derivative(f.left.get(u), f.right.get(u), f.dx, dt);
                    dl * f.left.get(v) + dr * f.right.get(v)
                })
                .collect(),
        }
    }

    fn difference(&self, f: &[f64]) -> Vec<f64> {
        self.inv_widths
            .iter()
            .enumerate()
            .map(|(j, ih)| (f[j + 1] - f[j]) * ih)
            .collect()
    }

    /// `D(u)`.
    pub fn divergence(&self, u: &[f64]) -> Vec<f64> {
        self.difference(&self.fluxes(u))
    }

    /// Full-order solve of `F(u) = b`, starting from `guess`.
    pub fn solve(&self, b: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
        if self.is_linear() {
            Ok(gmres_from(|v| self.apply(v), b, Some(guess), &self.gmres)?.x)
        } else {
            let sol = newton_solve(
                |u| {
                    let mut r = self.apply(u);
                    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri -= bi);
                    r
                },
                |u, v| self.jacobian_apply(u, v),
                guess,
                &self.newton,
            )?;
            Ok(sol.x)
        }
    }

    /// `u^{n+1}` from `u^n`.
    pub fn step(&self, u_n: &[f64]) -> Result<Vec<f64>> {
        if u_n.len() != self.len() {
            return Err(Error::dim("implicit step state", self.len(), u_n.len()));
        }
        self.solve(&self.rhs(u_n), u_n)
    }
}

impl StepOperator for ImplicitOperator {
    fn len(&self) -> usize {
        self.inv_widths.len()
    }

    fn apply(&self, u: &[f64]) -> Vec<f64> {
        let d = self.divergence(u);
        u.iter().zip(d).map(|(ui, di)| ui + self.theta_dt * di).collect()
    }

    fn jacobian_apply(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let d = self.difference(&self.flux_jvp(u, v));
        v.iter().zip(d).map(|(vi, di)| vi + self.theta_dt * di).collect()
    }

    fn is_linear(&self) -> bool {
        matches!(self.kind, FluxKind::Linear)
    }

    fn rhs(&self, u_n: &[f64]) -> Vec<f64> {
        if self.explicit_dt == 0.0 {
            return u_n.to_vec();
        }
        let d = self.divergence(u_n);
        u_n.iter().zip(d).map(|(ui, di)| ui - self.explicit_dt * di).collect()
    }
}

/// Advances `u_n` by one θ-scheme step.
pub fn implicit_step(
    problem: &FomProblem,
    mesh: &Mesh1D,
    u_n: &[f64],
    dt: f64,
    scheme: TimeScheme,
    flux: FluxRule,
) -> Result<Vec<f64>> {
    if u_n.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite state passed to implicit step".into()));
    }
    ImplicitOperator::new(problem, mesh, dt, scheme, flux)?.step(u_n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::problem::InitialCondition;
    use crate::linalg::{lu_solve, DenseMatrix};

    fn advection(boundary: Boundary) -> FomProblem {
        FomProblem {
            law: Law::LinearAdvection { c: 1.0 },
            initial_condition: InitialCondition::Zero,
            boundary,
        }
    }

    fn burgers(boundary: Boundary) -> FomProblem {
        FomProblem {
            law: Law::Burgers,
            initial_condition: InitialCondition::Zero,
            boundary,
        }
    }

    #[test]
    fn constant_periodic_state_is_steady() {
        let mesh = Mesh1D::uniform_periodic(0.0, 1.0, 50).unwrap();
        let u = vec![0.7; 50];
        for (p, f) in [(advection(Boundary::Periodic), FluxRule::Upwind), (burgers(Boundary::Periodic), FluxRule::LaxFriedrichs)] {
            let v = implicit_step(&p, &mesh, &u, 0.02, TimeScheme::BackwardEuler, f).unwrap();
            for x in v {
                assert!((x - 0.7).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn periodic_mass_is_conserved() {
        let mesh = Mesh1D::uniform_periodic(-1.0, 1.0, 80).unwrap();
        let h = 2.0 / 80.0;
        let u: Vec<f64> = mesh.nodes().iter().map(|x| 0.25 + 0.5 * (std::f64::consts::PI * x).sin()).collect();
        let m0: f64 = u.iter().sum::<f64>() * h;
        for scheme in [TimeScheme::BackwardEuler, TimeScheme::CrankNicolson] {
            let v = implicit_step(&advection(Boundary::Periodic), &mesh, &u, h, scheme, FluxRule::Upwind).unwrap();
            assert!((v.iter().sum::<f64>() * h - m0).abs() < 1e-12);
        }
        let v = implicit_step(&burgers(Boundary::Periodic), &mesh, &u, h, TimeScheme::BackwardEuler, FluxRule::LaxFriedrichs)
            .unwrap();
        assert!((v.iter().sum::<f64>() * h - m0).abs() < 1e-12);
    }

    #[test]
    fn linear_step_matches_dense_solve() {
        let mesh = Mesh1D::uniform(0.0, 2.5, 40).unwrap();
        let problem = FomProblem {
            law: Law::VariableAdvection {
                base: 1.25,
                amplitude: 0.4,
                frequency: 3.0,
            },
            initial_condition: InitialCondition::CosineBump {
                center: 0.25,
                half_width: 0.2,
            },
            boundary: Boundary::ZeroInflow,
        };
        let u = problem.initial_state(mesh.nodes());
        let dt = 2.0 * 2.5 / 40.0;
        let op = ImplicitOperator::new(&problem, &mesh, dt, TimeScheme::CrankNicolson, FluxRule::UpwindBiased).unwrap();
        let n = u.len();
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                op.apply(&e)
            })
            .collect();
        let a = DenseMatrix::from_columns(&cols).unwrap();
        let direct = lu_solve(&a, &op.rhs(&u)).unwrap();
        let iterative = op.step(&u).unwrap();
        for (a, b) in direct.iter().zip(&iterative) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn burgers_jacobian_matches_finite_differences() {
        let mesh = Mesh1D::uniform(0.0, 1.0, 12).unwrap();
        let op = ImplicitOperator::new(&burgers(Boundary::Outflow), &mesh, 0.05, TimeScheme::BackwardEuler, FluxRule::LaxFriedrichs)
            .unwrap();
        let u: Vec<f64> = (0..13).map(|i| (i as f64 * 0.7).sin()).collect();
        let v: Vec<f64> = (0..13).map(|i| (i as f64 * 1.3).cos()).collect();
        let jv = op.jacobian_apply(&u, &v);
        let h = 1e-6;
        let up: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let um: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let (fp, fm) = (op.apply(&up), op.apply(&um));
        for i in 0..13 {
            let fd = (fp[i] - fm[i]) / (2.0 * h);
            assert!((fd - jv[i]).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn zero_state_is_fixed_point() {
        let mesh = Mesh1D::uniform(0.0, 1.0, 20).unwrap();
        for (p, f) in [
            (advection(Boundary::ZeroInflow), FluxRule::Upwind),
            (advection(Boundary::ZeroInflow), FluxRule::UpwindBiased),
            (burgers(Boundary::Outflow), FluxRule::LaxFriedrichs),
        ] {
            let v = implicit_step(&p, &mesh, &vec![0.0; 21], 0.05, TimeScheme::BackwardEuler, f).unwrap();
            assert!(v.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn upwind_creates_no_new_extrema() {
        let mesh = Mesh1D::uniform(0.0, 5.0, 500).unwrap();
        let problem = FomProblem {
            law: Law::LinearAdvection { c: 1.0 },
            initial_condition: InitialCondition::Box {
                left: 0.5,
                right: 1.5,
                height: 2.0,
                inclusive: true,
            },
            boundary: Boundary::ZeroInflow,
        };
        let op = ImplicitOperator::new(&problem, &mesh, 0.01, TimeScheme::BackwardEuler, FluxRule::Upwind).unwrap();
        let mut u = problem.initial_state(mesh.nodes());
        for _ in 0..20 {
            let (mx, mn) = (u.iter().cloned().fold(f64::MIN, f64::max), u.iter().cloned().fold(f64::MAX, f64::min));
            u = op.step(&u).unwrap();
            assert!(u.iter().cloned().fold(f64::MIN, f64::max) <= mx + 1e-10);
            assert!(u.iter().cloned().fold(f64::MAX, f64::min) >= mn - 1e-10);
        }
    }

    #[test]
    fn mismatched_flux_is_rejected() {
        let mesh = Mesh1D::uniform(0.0, 1.0, 10).unwrap();
        assert!(ImplicitOperator::new(&burgers(Boundary::Outflow), &mesh, 0.1, TimeScheme::BackwardEuler, FluxRule::Upwind).is_err());
        assert!(ImplicitOperator::new(&advection(Boundary::Periodic), &mesh, 0.1, TimeScheme::BackwardEuler, FluxRule::Upwind).is_err());
    }
}
