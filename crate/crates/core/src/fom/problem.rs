use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Conservation law `u_t + f(u)_x = 0` (or the Euler system).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Law {
    /// `f = c u`.
    LinearAdvection { c: f64 },
    /// `f = c(x) u` with `c(x) = base + amplitude·sin(frequency·π·x)`.
    VariableAdvection { base: f64, amplitude: f64, frequency: f64 },
    /// `f = u²/2`.
    Burgers,
    Euler { gamma: f64 },
}

impl Law {
    pub fn speed(&self, x: f64) -> f64 {
        match *self {
            Law::LinearAdvection { c } => c,
            Law::VariableAdvection {
                base,
                amplitude,
                frequency,
            } => base + amplitude * (frequency * std::f64::consts::PI * x).sin(),
            Law::Burgers | Law::Euler { .. } => f64::NAN,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Law::LinearAdvection { .. } | Law::VariableAdvection { .. })
    }

    pub fn is_system(&self) -> bool {
        matches!(self, Law::Euler { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    Zero,
    /// `height` on `[left, right]` (open interval when `inclusive` is false), 0 elsewhere.
    Box {
        left: f64,
        right: f64,
        height: f64,
        inclusive: bool,
    },
    /// `½ + ½cos(π(x − center)/half_width)` on `|x − center| ≤ half_width`, 0 elsewhere.
    CosineBump { center: f64, half_width: f64 },
    /// `offset + amplitude·sin(wavenumber·π·x)`.
    Sine {
        offset: f64,
        amplitude: f64,
        wavenumber: f64,
    },
    /// Primitive Euler states `(ρ, u, p)` left and right of `split` (the right state applies at `x ≥ split`).
    EulerRiemann {
        split: f64,
        left: [f64; 3],
        right: [f64; 3],
    },
    /// `ρ = 1 + amplitude·sin(π x)`, constant velocity and pressure.
    EulerDensityWave {
        amplitude: f64,
        velocity: f64,
        pressure: f64,
    },
}

impl InitialCondition {
    /// Scalar initial value; Euler variants return the density.
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InitialCondition::Zero => 0.0,
            InitialCondition::Box {
                left,
                right,
                height,
                inclusive,
            } => {
                let inside = if inclusive {
                    x >= left && x <= right
                } else {
                    x > left && x < right
                };
                if inside {
                    height
                } else {
                    0.0
                }
            }
            InitialCondition::CosineBump { center, half_width } => {
                if (x - center).abs() <= half_width {
                    0.5 + 0.5 * (std::f64::consts::PI * (x - center) / half_width).cos()
                } else {
                    0.0
                }
            }
            InitialCondition::Sine {
                offset,
                amplitude,
                wavenumber,
            } => offset + amplitude * (wavenumber * std::f64::consts::PI * x).sin(),
            InitialCondition::EulerRiemann { .. } | InitialCondition::EulerDensityWave { .. } => {
                self.primitive(x)[0]
            }
        }
    }

    /// Primitive `(ρ, u, p)` for Euler initial conditions.
    pub fn primitive(&self, x: f64) -> [f64; 3] {
        match *self {
            InitialCondition::EulerRiemann { split, left, right } => {
                if x < split {
                    left
                } else {
                    right
                }
            }
            InitialCondition::EulerDensityWave {
                amplitude,
                velocity,
                pressure,
            } => [1.0 + amplitude * (std::f64::consts::PI * x).sin(), velocity, pressure],
            _ => [self.eval(x), 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Zero ghost states.
    ZeroInflow,
    Periodic,
    /// Ghost states copy the boundary node.
    Outflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FomProblem {
    pub law: Law,
    pub initial_condition: InitialCondition,
    pub boundary: Boundary,
}

impl FomProblem {
    pub fn validate(&self) -> Result<()> {
        if let Law::Euler { gamma } = self.law {
            if !(gamma > 1.0) {
                return Err(Error::InvalidInput(format!("Euler requires gamma > 1, got {gamma}")));
            }
        }
        Ok(())
    }

    pub fn initial_state(&self, nodes: &[f64]) -> Vec<f64> {
        nodes.iter().map(|&x| self.initial_condition.eval(x)).collect()
    }
}

/// `u₀(x − c t)`, optionally wrapped into `[left, left + period)`.
pub fn exact_advection(u0: &InitialCondition, x: f64, t: f64, c: f64, periodic: Option<(f64, f64)>) -> f64 {
    let mut s = x - c * t;
    if let Some((left, period)) = periodic {
        s = left + (s - left).rem_euclid(period);
    }
    u0.eval(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variable_speed_is_positive_in_parameter_box() {
        for m1 in [0.0, 0.25, 0.5] {
            for m2 in [2.0, 3.0, 4.0] {
                let law = Law::VariableAdvection {
                    base: 1.25,
                    amplitude: m1,
                    frequency: m2,
                };
                for i in 0..=250 {
                    assert!(law.speed(i as f64 * 0.01) >= 0.75 - 1e-15);
                }
            }
        }
    }

    #[test]
    fn exact_box_shift() {
        let ic = InitialCondition::Box {
            left: 0.5,
            right: 1.5,
            height: 2.0,
            inclusive: true,
        };
        assert_eq!(exact_advection(&ic, 0.7, 0.0, 1.0, None), 2.0);
        assert_eq!(exact_advection(&ic, 0.7, 0.25, 1.0, None), 0.0);
        assert_eq!(exact_advection(&ic, 0.75, 0.25, 1.0, None), 2.0);
        assert_eq!(exact_advection(&ic, 1.75, 0.25, 1.0, None), 2.0);
        assert_eq!(exact_advection(&ic, 1.76, 0.25, 1.0, None), 0.0);
    }

    #[test]
    fn periodic_exact_wraps() {
        let ic = InitialCondition::Sine {
            offset: 0.25,
            amplitude: 0.5,
            wavenumber: 1.0,
        };
        let a = exact_advection(&ic, 0.3, 0.0, 1.0, Some((-1.0, 2.0)));
        let b = exact_advection(&ic, 0.3, 2.0, 1.0, Some((-1.0, 2.0)));
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn sod_energy_at_rest() {
        let ic = InitialCondition::EulerRiemann {
            split: 0.0,
            left: [1.0, 0.0, 1.0],
            right: [0.125, 0.0, 0.1],
        };
        assert_eq!(ic.primitive(-0.1), [1.0, 0.0, 1.0]);
        assert_eq!(ic.primitive(0.0), [0.125, 0.0, 0.1]);
    }
}
