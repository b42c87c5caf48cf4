use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fom::problem::{Boundary, InitialCondition};

/// Conserved variables `(ρ, ρu, E)` stored as three contiguous blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerState {
    n: usize,
    data: Vec<f64>,
}

impl EulerState {
    pub fn new(rho: &[f64], mom: &[f64], energy: &[f64]) -> Result<Self> {
        let n = rho.len();
        if mom.len() != n || energy.len() != n {
            return Err(Error::dim("Euler state components", n, mom.len().min(energy.len())));
        }
        let mut data = Vec::with_capacity(3 * n);
        data.extend_from_slice(rho);
        data.extend_from_slice(mom);
        data.extend_from_slice(energy);
        Ok(Self { n, data })
    }

    pub fn from_flat(data: Vec<f64>) -> Result<Self> {
        if data.len() % 3 != 0 {
            return Err(Error::InvalidInput("flat Euler state length must be divisible by 3".into()));
        }
        Ok(Self {
            n: data.len() / 3,
            data,
        })
    }

    pub fn from_primitive(ic: &InitialCondition, nodes: &[f64], gamma: f64) -> Self {
        let n = nodes.len();
        let mut data = vec![0.0; 3 * n];
        for (i, &x) in nodes.iter().enumerate() {
            let [rho, u, p] = ic.primitive(x);
            data[i] = rho;
            data[n + i] = rho * u;
            data[2 * n + i] = p / (gamma - 1.0) + 0.5 * rho * u * u;
        }
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    pub fn rho(&self) -> &[f64] {
        &self.data[..self.n]
    }

    pub fn mom(&self) -> &[f64] {
        &self.data[self.n..2 * self.n]
    }

    pub fn energy(&self) -> &[f64] {
        &self.data[2 * self.n..]
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.data[c * self.n..(c + 1) * self.n]
    }

    pub fn pressure(&self, gamma: f64) -> Vec<f64> {
        (0..self.n)
            .map(|i| pressure(self.data[i], self.data[self.n + i], self.data[2 * self.n + i], gamma))
            .collect()
    }

    pub fn velocity(&self) -> Vec<f64> {
        self.rho().iter().zip(self.mom()).map(|(r, m)| m / r).collect()
    }

    /// Fails on the first node with non-positive density or pressure.
    pub fn check_physical(&self, gamma: f64) -> Result<()> {
        check_physical(&self.data, self.n, gamma)
    }
}

#[inline]
fn pressure(rho: f64, mom: f64, e: f64, gamma: f64) -> f64 {
    (gamma - 1.0) * (e - 0.5 * mom * mom / rho)
}

fn check_physical(data: &[f64], n: usize, gamma: f64) -> Result<()> {
    for i in 0..n {
        let rho = data[i];
        if !(rho > 0.0) {
            return Err(Error::NonPhysical {
                node: i,
                quantity: "density",
                value: rho,
            });
        }
        let p = pressure(rho, data[n + i], data[2 * n + i], gamma);
        if !(p > 0.0) {
            return Err(Error::NonPhysical {
                node: i,
                quantity: "pressure",
                value: p,
            });
        }
    }
    Ok(())
}

pub const WENO_EPSILON: f64 = 1e-6;
const LINEAR_WEIGHTS: [f64; 3] = [0.1, 0.6, 0.3];

fn smoothness(v: &[f64; 5]) -> [f64; 3] {
    let [a, b, c, d, e] = *v;
    [
        13.0 / 12.0 * (a - 2.0 * b + c).powi(2) + 0.25 * (a - 4.0 * b + 3.0 * c).powi(2),
        13.0 / 12.0 * (b - 2.0 * c + d).powi(2) + 0.25 * (b - d).powi(2),
        13.0 / 12.0 * (c - 2.0 * d + e).powi(2) + 0.25 * (3.0 * c - 4.0 * d + e).powi(2),
    ]
}

/// Nonlinear weights for the left-biased reconstruction at `i+½` from `v_{i-2..=i+2}`.
pub fn weno5_weights(v: &[f64; 5]) -> [f64; 3] {
    let beta = smoothness(v);
    let mut alpha = [0.0; 3];
    for k in 0..3 {
        alpha[k] = LINEAR_WEIGHTS[k] / (WENO_EPSILON + beta[k]).powi(2);
    }
    let s: f64 = alpha.iter().sum();
    [alpha[0] / s, alpha[1] / s, alpha[2] / s]
}

/// Left-biased WENO5-JS value at `i+½`.
pub fn weno5_reconstruct(v: &[f64; 5]) -> f64 {
    let [a, b, c, d, e] = *v;
    let q = [
        (2.0 * a - 7.0 * b + 11.0 * c) / 6.0,
        (-b + 5.0 * c + 2.0 * d) / 6.0,
        (2.0 * c + 5.0 * d - e) / 6.0,
    ];
    let w = weno5_weights(v);
    w[0] * q[0] + w[1] * q[1] + w[2] * q[2]
}

const GHOSTS: usize = 3;

/// `−∂f/∂x` for the Euler system with global Lax–Friedrichs splitting and componentwise WENO5.
pub fn weno5_euler_rhs(state: &EulerState, dx: f64, gamma: f64, boundary: Boundary) -> Result<EulerState> {
    Ok(EulerState {
        n: state.n,
        data: weno5_euler_rhs_flat(&state.data, state.n, dx, gamma, boundary)?,
    })
}

pub(crate) fn weno5_euler_rhs_flat(data: &[f64], n: usize, dx: f64, gamma: f64, boundary: Boundary) -> Result<Vec<f64>> {
    check_physical(data, n, gamma)?;
    if n < 2 * GHOSTS && boundary == Boundary::Periodic {
        return Err(Error::InvalidInput("periodic WENO5 needs at least 6 nodes".into()));
    }
    let m = n + 2 * GHOSTS;
    let index = |k: usize| -> Option<usize> {
        // extended index k ↦ interior node, None for zero ghosts
        let i = k as isize - GHOSTS as isize;
        match boundary {
            Boundary::Periodic => Some(i.rem_euclid(n as isize) as usize),
            Boundary::Outflow => Some(i.clamp(0, n as isize - 1) as usize),
            Boundary::ZeroInflow => {
                if i < 0 || i >= n as isize {
                    None
                } else {
                    Some(i as usize)
                }
            }
        }
    };
    let mut cons = vec![[0.0; 3]; m];
    let mut flux = vec![[0.0; 3]; m];
    let mut alpha: f64 = 0.0;
    for k in 0..m {
        let Some(i) = index(k) else {
            continue;
        };
        let (rho, mom, e) = (data[i], data[n + i], data[2 * n + i]);
        let u = mom / rho;
        let p = pressure(rho, mom, e, gamma);
        cons[k] = [rho, mom, e];
        flux[k] = [mom, mom * u + p, u * (e + p)];
        alpha = alpha.max(u.abs() + (gamma * p / rho).sqrt());
    }
    // interface fluxes at j+½ for extended j = GHOSTS-1 ..= GHOSTS+n-1
    let mut fhat = vec![[0.0; 3]; n + 1];
    for (slot, j) in (GHOSTS - 1..GHOSTS + n).enumerate() {
        for c in 0..3 {
            let plus = |k: usize| 0.5 * (flux[k][c] + alpha * cons[k][c]);
            let minus = |k: usize| 0.5 * (flux[k][c] - alpha * cons[k][c]);
            let vp = [plus(j - 2), plus(j - 1), plus(j), plus(j + 1), plus(j + 2)];
            let vm = [minus(j + 3), minus(j + 2), minus(j + 1), minus(j), minus(j - 1)];
            fhat[slot][c] = weno5_reconstruct(&vp) + weno5_reconstruct(&vm);
        }
    }
    let mut out = vec![0.0; 3 * n];
    for c in 0..3 {
        for i in 0..n {
            out[c * n + i] = -(fhat[i + 1][c] - fhat[i][c]) / dx;
        }
    }
    Ok(out)
}

/// Largest characteristic speed `|u| + √(γp/ρ)`.
pub fn max_wave_speed(state: &EulerState, gamma: f64) -> f64 {
    let p = state.pressure(gamma);
    (0..state.n)
        .map(|i| {
            let rho = state.data[i];
            (state.data[state.n + i] / rho).abs() + (gamma * p[i] / rho).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Shu–Osher three-stage SSP Runge–Kutta step.
pub fn ssp_rk3_step(rhs: impl Fn(&[f64]) -> Result<Vec<f64>>, u: &[f64], dt: f64) -> Result<Vec<f64>> {
    let l0 = rhs(u)?;
    let u1: Vec<f64> = u.iter().zip(&l0).map(|(a, l)| a + dt * l).collect();
    let l1 = rhs(&u1)?;
    let u2: Vec<f64> = u
        .iter()
        .zip(&u1)
        .zip(&l1)
        .map(|((a, b), l)| 0.75 * a + 0.25 * (b + dt * l))
        .collect();
    let l2 = rhs(&u2)?;
    Ok(u
        .iter()
        .zip(&u2)
        .zip(&l2)
        .map(|((a, b), l)| a / 3.0 + 2.0 / 3.0 * (b + dt * l))
        .collect())
}
