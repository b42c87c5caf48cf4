use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fom::mesh::{Mesh1D, MovingBandRule};
use crate::fom::problem::{Boundary, FomProblem, InitialCondition, Law};
use crate::fom::run::{DtRule, MeshSpec, Stepper};
use crate::nn::{Architecture, TrainConfig};
use crate::rom::ProjectionOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Paper,
    Desk,
}

impl std::str::FromStr for Scale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Scale::Paper),
            "desk" => Ok(Scale::Desk),
            other => Err(Error::Config(format!("unknown scale '{other}' (paper|desk)"))),
        }
    }
}

/// How the problem depends on the parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    /// `u_t + c u_x = 0`, no parameters.
    Advection {
        c: f64,
        initial_condition: InitialCondition,
        boundary: Boundary,
    },
    /// `c(x; μ) = base + μ₁ sin(μ₂ π x)`, zero inflow.
    InhomogeneousAdvection {
        base: f64,
        initial_condition: InitialCondition,
    },
    /// Burgers with `u₀ = height + μ` on `[left, right]`, zero elsewhere.
    BurgersRiemann { left: f64, right: f64, height: f64 },
    Burgers {
        initial_condition: InitialCondition,
        boundary: Boundary,
    },
    Euler {
        gamma: f64,
        initial_condition: InitialCondition,
        boundary: Boundary,
    },
}

impl Family {
    pub fn param_dim(&self) -> usize {
        match self {
            Family::InhomogeneousAdvection { .. } => 2,
            Family::BurgersRiemann { .. } => 1,
            _ => 0,
        }
    }

    pub fn components(&self) -> usize {
        match self {
            Family::Euler { .. } => 3,
            _ => 1,
        }
    }

    pub fn problem(&self, mu: &[f64]) -> Result<FomProblem> {
        if mu.len() != self.param_dim() {
            return Err(Error::dim("parameter vector", self.param_dim(), mu.len()));
        }
        Ok(match self {
            Family::Advection {
                c,
                initial_condition,
                boundary,
            } => FomProblem {
                law: Law::LinearAdvection { c: *c },
                initial_condition: initial_condition.clone(),
                boundary: *boundary,
            },
            Family::InhomogeneousAdvection {
                base,
                initial_condition,
            } => FomProblem {
                law: Law::VariableAdvection {
                    base: *base,
                    amplitude: mu[0],
                    frequency: mu[1],
                },
                initial_condition: initial_condition.clone(),
                boundary: Boundary::ZeroInflow,
            },
            Family::BurgersRiemann { left, right, height } => FomProblem {
                law: Law::Burgers,
                initial_condition: InitialCondition::Box {
                    left: *left,
                    right: *right,
                    height: height + mu[0],
                    inclusive: true,
                },
                boundary: Boundary::Outflow,
            },
            Family::Burgers {
                initial_condition,
                boundary,
            } => FomProblem {
                law: Law::Burgers,
                initial_condition: initial_condition.clone(),
                boundary: *boundary,
            },
            Family::Euler {
                gamma,
                initial_condition,
                boundary,
            } => FomProblem {
                law: Law::Euler { gamma: *gamma },
                initial_condition: initial_condition.clone(),
                boundary: *boundary,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshConfig {
    Uniform { left: f64, right: f64, cells: usize },
    Periodic { left: f64, right: f64, cells: usize },
    MovingBand { rule: MovingBandRule },
}

impl MeshConfig {
    /// The mesh with `cells` replaced when given (fixed meshes only).
    pub fn spec(&self, cells: Option<usize>) -> Result<MeshSpec> {
        Ok(match *self {
            MeshConfig::Uniform { left, right, cells: c } => MeshSpec::Fixed {
                mesh: Mesh1D::uniform(left, right, cells.unwrap_or(c))?,
            },
            MeshConfig::Periodic { left, right, cells: c } => MeshSpec::Fixed {
                mesh: Mesh1D::uniform_periodic(left, right, cells.unwrap_or(c))?,
            },
            MeshConfig::MovingBand { rule } => {
                if cells.is_some_and(|c| c != rule.cells) {
                    return Err(Error::Config("moving meshes cannot be resized online".into()));
                }
                MeshSpec::MovingBand { rule }
            }
        })
    }

    pub fn cells(&self) -> usize {
        match *self {
            MeshConfig::Uniform { cells, .. } | MeshConfig::Periodic { cells, .. } => cells,
            MeshConfig::MovingBand { rule } => rule.cells,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamSet {
    /// The single empty parameter.
    Empty,
    List { points: Vec<Vec<f64>> },
    /// Cartesian product, first axis slowest.
    Grid { axes: Vec<Vec<f64>> },
    Uniform { lo: Vec<f64>, hi: Vec<f64>, count: usize, seed: u64 },
}

impl ParamSet {
    pub fn points(&self) -> Vec<Vec<f64>> {
        match self {
            ParamSet::Empty => vec![vec![]],
            ParamSet::List { points } => points.clone(),
            ParamSet::Grid { axes } => {
                let mut out: Vec<Vec<f64>> = vec![vec![]];
                for axis in axes {
                    out = out
                        .into_iter()
                        .flat_map(|p| {
                            axis.iter().map(move |&v| {
                                let mut q = p.clone();
                                q.push(v);
                                q
                            })
                        })
                        .collect();
                }
                out
            }
            ParamSet::Uniform { lo, hi, count, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..*count)
                    .map(|_| lo.iter().zip(hi).map(|(a, b)| rng.gen_range(*a..=*b)).collect())
                    .collect()
            }
        }
    }
}

/// Where training snapshots come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotSource {
    FullOrder,
    /// The exact translated initial profile (constant-speed advection only).
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub basis_hidden: Vec<usize>,
    pub coeff_hidden: Vec<usize>,
    pub train: TrainConfig,
    /// Independent initializations per model; the lowest final training loss is kept.
    #[serde(default = "one")]
    pub restarts: usize,
}

impl NetworkConfig {
    pub fn architecture(&self) -> Architecture {
        Architecture {
            basis_hidden: self.basis_hidden.clone(),
            coeff_hidden: self.coeff_hidden.clone(),
        }
    }
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let a = Architecture::default();
        Self {
            basis_hidden: a.basis_hidden,
            coeff_hidden: a.coeff_hidden,
            train: TrainConfig::default(),
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: String,
    pub description: String,
    pub scale: Scale,
    pub seed: u64,
    pub family: Family,
    pub mesh: MeshConfig,
    pub stepper: Stepper,
    pub dt: DtRule,
    pub snapshots: SnapshotSource,
    /// Keep every `record_every`-th full-order step as a training snapshot.
    #[serde(default = "one")]
    pub record_every: usize,
    pub t_train: f64,
    /// Online window `[t_start, t_end]`.
    pub t_start: f64,
    pub t_end: f64,
    pub train_params: ParamSet,
    pub test_params: ParamSet,
    /// Parameter box `[lo, hi]` per dimension.
    pub param_box: Vec<[f64; 2]>,
    pub orders: Vec<usize>,
    pub modes: Vec<String>,
    pub network: NetworkConfig,
    /// Online mesh size when it differs from the offline one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub online_cells: Option<usize>,
    #[serde(default)]
    pub projection: ProjectionOptions,
    /// Stamps at which reconstructions are written.
    #[serde(default)]
    pub output_times: Vec<f64>,
    /// Online meshes for the CPU-time study; empty skips it.
    #[serde(default)]
    pub timing_cells: Vec<usize>,
    #[serde(default)]
    pub timing_steps: usize,
    /// Reduced order of the timing study; the first entry of `orders` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_order: Option<usize>,
    /// Times at which learned-basis drift is measured; empty skips it.
    #[serde(default)]
    pub shift_times: Vec<f64>,
    /// Error window for `E_average`; the whole online window when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_window: Option<[f64; 2]>,
    /// Reuse `models/` and `pod/` from another artifact directory instead of training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub models_from: Option<PathBuf>,
    pub out_dir: PathBuf,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("{}: {m}", self.id)));
        if !(self.t_train > 0.0 && self.t_train <= self.t_end) {
            return bad(format!("need 0 < t_train <= t_end, got {} and {}", self.t_train, self.t_end));
        }
        if !(self.t_start >= 0.0 && self.t_start < self.t_end) {
            return bad(format!("need 0 <= t_start < t_end, got {}", self.t_start));
        }
        if self.orders.is_empty() || self.orders.contains(&0) {
            return bad("orders must be nonempty and positive".into());
        }
        if self.param_box.len() != self.family.param_dim() {
            return bad(format!(
                "parameter box has {} dimensions, family needs {}",
                self.param_box.len(),
                self.family.param_dim()
            ));
        }
        for (name, set) in [("train", &self.train_params), ("test", &self.test_params)] {
            for p in set.points() {
                if p.len() != self.family.param_dim() {
                    return bad(format!("{name} parameter {p:?} has the wrong dimension"));
                }
                if p.iter().zip(&self.param_box).any(|(v, [lo, hi])| v < lo || v > hi) {
                    return bad(format!("{name} parameter {p:?} outside the parameter box"));
                }
            }
        }
        let registry = crate::rom::StrategyRegistry::standard();
        for m in &self.modes {
            registry.get(m)?;
        }
        if self.snapshots == SnapshotSource::Exact && !matches!(self.family, Family::Advection { .. }) {
            return bad("exact snapshots need constant-speed advection".into());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Seed of the model for order `r` and component `c`.
    pub fn model_seed(&self, r: usize, c: usize) -> u64 {
        self.seed
            .wrapping_mul(1_000_003)
            .wrapping_add(r as u64 * 101 + c as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_first_axis_major() {
        let g = ParamSet::Grid {
            axes: vec![vec![0.0, 1.0], vec![2.0, 3.0, 4.0]],
        };
        let p = g.points();
        assert_eq!(p.len(), 6);
        assert_eq!(p[1], vec![0.0, 3.0]);
        assert_eq!(p[3], vec![1.0, 2.0]);
    }

    #[test]
    fn uniform_sample_is_seeded() {
        let s = ParamSet::Uniform {
            lo: vec![0.0, 2.0],
            hi: vec![0.5, 4.0],
            count: 20,
            seed: 11,
        };
        assert_eq!(s.points(), s.points());
        assert!(s.points().iter().all(|p| p[0] <= 0.5 && p[1] >= 2.0));
    }
}
