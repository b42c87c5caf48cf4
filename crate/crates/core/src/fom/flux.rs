use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxRule {
    /// `f = c_j u_j` for positive speeds.
    Upwind,
    /// `f = ¾ c_j u_j + ¼ c_{j+1} u_{j+1}`.
    UpwindBiased,
    /// Lax–Friedrichs-type flux for Burgers.
    LaxFriedrichs,
}

/// Upwind flux; takes `u_{j+1}` when the speed is negative.
pub fn flux_upwind(c_j: f64, c_j1: f64, u_j: f64, u_j1: f64) -> f64 {
    c_j.max(0.0) * u_j + c_j1.min(0.0) * u_j1
}

pub fn flux_upwind_biased(c_j: f64, c_j1: f64, u_j: f64, u_j1: f64) -> f64 {
    0.75 * c_j * u_j + 0.25 * c_j1 * u_j1
}

/// `½(f(u_{j+1}) + f(u_j)) − (Δx/2Δt)(u_{j+1} − u_j)` with `f(u) = u²/2`.
pub fn flux_lf_burgers(u_j: f64, u_j1: f64, dx: f64, dt: f64) -> f64 {
    0.25 * (u_j1 * u_j1 + u_j * u_j) - 0.5 * dx / dt * (u_j1 - u_j)
}

/// Partial derivatives of [`flux_lf_burgers`] with respect to `u_j` and `u_{j+1}`.
pub fn flux_lf_burgers_derivative(u_j: f64, u_j1: f64, dx: f64, dt: f64) -> (f64, f64) {
    let lam = 0.5 * dx / dt;
    (0.5 * u_j + lam, 0.5 * u_j1 - lam)
}
