use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::experiment::config::{
    ExperimentConfig, Family, MeshConfig, NetworkConfig, ParamSet, Scale, SnapshotSource,
};
use crate::fom::flux::FluxRule;
use crate::fom::implicit::TimeScheme;
use crate::fom::mesh::MovingBandRule;
use crate::fom::problem::{Boundary, InitialCondition};
use crate::fom::run::{DtRule, Stepper};
use crate::nn::TrainConfig;

/// A named builder for one experiment at either scale.
pub trait Experiment: Send + Sync {
    fn id(&self) -> &'static str;
    /// Which part of the source study the entry reproduces.
    fn summary(&self) -> &'static str;
    fn config(&self, scale: Scale) -> ExperimentConfig;
}

pub struct ExperimentRegistry {
    entries: Vec<Box<dyn Experiment>>,
}

impl ExperimentRegistry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(KolmogorovDemo));
        r.register(Box::new(AdvectionBasis));
        r.register(Box::new(AdvectionMovingMesh));
        r.register(Box::new(InhomogeneousAdvection));
        r.register(Box::new(BurgersRiemann));
        r.register(Box::new(BurgersSmooth));
        r.register(Box::new(EulerSod));
        r
    }

    pub fn register(&mut self, e: Box<dyn Experiment>) {
        self.entries.retain(|x| x.id() != e.id());
        self.entries.push(e);
    }

    pub fn get(&self, id: &str) -> Result<&dyn Experiment> {
        self.entries
            .iter()
            .find(|e| e.id() == id)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::Config(format!("unknown experiment '{id}', known: {}", self.ids().join(", "))))
    }

    pub fn ids(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.id()).collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = &dyn Experiment> {
        self.entries.iter().map(|b| b.as_ref())
    }
}

impl Default for ExperimentRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

fn network(epochs: usize) -> NetworkConfig {
    NetworkConfig {
        train: TrainConfig {
            epochs,
            ..TrainConfig::default()
        },
        ..NetworkConfig::default()
    }
}

fn implicit(scheme: TimeScheme, flux: FluxRule) -> Stepper {
    Stepper::Implicit { scheme, flux }
}

fn base(id: &str, description: &str, scale: Scale, family: Family, mesh: MeshConfig) -> ExperimentConfig {
    ExperimentConfig {
        id: id.into(),
        description: description.into(),
        scale,
        seed: 2024,
        family,
        mesh,
        stepper: implicit(TimeScheme::BackwardEuler, FluxRule::Upwind),
        dt: DtRule::MeshRatio { ratio: 1.0 },
        snapshots: SnapshotSource::FullOrder,
        record_every: 1,
        t_train: 1.0,
        t_start: 0.0,
        t_end: 1.0,
        train_params: ParamSet::Empty,
        test_params: ParamSet::Empty,
        param_box: Vec::new(),
        orders: vec![10],
        modes: vec!["lp-galerkin".into()],
        network: network(30),
        online_cells: None,
        projection: Default::default(),
        output_times: Vec::new(),
        timing_cells: Vec::new(),
        timing_steps: 0,
        timing_order: None,
        shift_times: Vec::new(),
        error_window: None,
        models_from: None,
        out_dir: PathBuf::from("runs").join(id),
    }
}

fn range(lo: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| lo + i as f64 * step).collect()
}

struct KolmogorovDemo;
struct AdvectionBasis;
struct AdvectionMovingMesh;
struct InhomogeneousAdvection;
struct BurgersRiemann;
struct BurgersSmooth;
struct EulerSod;

impl Experiment for KolmogorovDemo {
    fn id(&self) -> &'static str {
        "kolmogorov-demo"
    }
    fn summary(&self) -> &'static str {
        "singular values of a translating box profile before and after undoing the translation"
    }
    fn config(&self, scale: Scale) -> ExperimentConfig {
        // cheap at any scale; both profiles coincide
        let mut c = base(
            self.id(),
            self.summary(),
            scale,
            Family::Advection {
                c: 1.0,
                initial_condition: InitialCondition::Box {
                    left: 0.25,
                    right: 0.5,
                    height: 1.0,
                    inclusive: true,
                },
                boundary: Boundary::ZeroInflow,
            },
            MeshConfig::Uniform {
                left: 0.0,
                right: 2.0,
                cells: 200,
            },
        );
        c.dt = DtRule::Fixed { dt: 0.01 };
        c.snapshots = SnapshotSource::Exact;
        c.orders = vec![1];
        c.modes = Vec::new();
        c
    }
}

impl Experiment for AdvectionBasis {
    fn id(&self) -> &'static str {
        "adv1d-basis"
    }
    fn summary(&self) -> &'static str {
        "learned basis of constant-speed advection trained on exact snapshots"
    }
    fn config(&self, scale: Scale) -> ExperimentConfig {
        let mut c = base(
            self.id(),
            self.summary(),
            scale,
            Family::Advection {
                c: 1.0,
                initial_condition: InitialCondition::Box {
                    left: 0.5,
                    right: 1.5,
                    height: 2.0,
                    inclusive: true,
                },
                boundary: Boundary::ZeroInflow,
            },
            MeshConfig::Uniform {
                left: 0.0,
                right: 5.0,
                cells: 500,
            },
        );
        c.snapshots = SnapshotSource::Exact;
        c.t_train = 0.75;
        c.t_end = 0.75;
        c.orders = vec![3];
        c.modes = Vec::new();
        c.network.restarts = 3;
        c.shift_times = vec![0.0, 0.15, 0.3, 0.45, 0.6, 0.75];
        if scale == Scale::Desk {
            c.network.train.epochs = 60;
        }
        c
    }
}

impl Experiment for AdvectionMovingMesh {
    fn id(&self) -> &'static str {
        "adv1d-moving-mesh"
    }
    fn summary(&self) -> &'static str {
        "advection on a band-refined mesh that moves with the wave"
    }
    fn config(&self, scale: Scale) -> ExperimentConfig {
        let rule = MovingBandRule::default();
        let mut c = base(
            self.id(),
            self.summary(),
            scale,
            Family::Advection {
                c: 1.0,
                initial_condition: InitialCondition::Box {
                    left: 0.6,
                    right: 1.4,
                    height: 2.0,
                    inclusive: false,
                },
                boundary: Boundary::ZeroInflow,
            },
            MeshConfig::MovingBand { rule },
        );
        c.dt = DtRule::Fixed { dt: rule.h_coarse() };
        // 95 snapshots at Δt = 1/125 end at 94Δt
        c.t_train = 94.0 * rule.h_coarse();
        c.t_start = c.t_train;
        c.t_end = 188.0 * rule.h_coarse();
        c.modes = vec!["lp-galerkin".into(), "learning".into()];
        c.network.restarts = 3;
        c.output_times = vec![c.t_end];
        match scale {
            Scale::Paper => c.orders = vec![5, 10, 15, 20, 25],
            Scale::Desk => {
                c.orders = vec![5, 15];
                c.network.train.epochs = 20;
            }
        }
        c
    }
}

impl Experiment for InhomogeneousAdvection {
    fn id(&self) -> &'static str {
        "adv1d-inhomogeneous"
    }
    fn summary(&self) -> &'static str {
        "advection with a two-parameter space-dependent speed"
    }
    fn config(&self, scale: Scale) -> ExperimentConfig {
        let mut c = base(
            self.id(),
            self.summary(),
            scale,
            Family::InhomogeneousAdvection {
                base: 1.25,
                initial_condition: InitialCondition::CosineBump {
                    center: 0.25,
                    half_width: 0.2,
                },
            },
            MeshConfig::Uniform {
                left: 0.0,
                right: 2.5,
                cells: 500,
            },
        );
        c.stepper = implicit(TimeScheme::CrankNicolson, FluxRule::UpwindBiased);
        c.dt = DtRule::MeshRatio { ratio: 2.0 };
        c.param_box = vec![[0.0, 0.5], [2.0, 4.0]];
        c.modes = vec!["lp-galerkin".into(), "learning".into(), "pod".into()];
        match scale {
            Scale::Paper => {
                c.train_params = ParamSet::Grid {
                    axes: vec![range(0.0, 0.05, 11), range(2.0, 0.1, 21)],
                };
                c.test_params = ParamSet::Uniform {
                    lo: vec![0.0, 2.0],
                    hi: vec![0.5, 4.0],
                    count: 20,
                    seed: 44,
                };
                c.orders = vec![5, 10, 15, 20, 25];
                c.timing_cells = vec![500, 2500, 10000];
                c.timing_steps = 20;
                c.timing_order = Some(20);
            }
            Scale::Desk => {
                c.mesh = MeshConfig::Uniform {
                    left: 0.0,
                    right: 2.5,
                    cells: 200,
                };
                c.train_params = ParamSet::Grid {
                    axes: vec![range(0.0, 0.25, 3), range(2.0, 0.5, 5)],
                };
                c.test_params = ParamSet::Uniform {
                    lo: vec![0.0, 2.0],
                    hi: vec![0.5, 4.0],
                    count: 4,
                    seed: 44,
                };
                c.orders = vec![20, 25];
                c.timing_cells = vec![500, 2500, 10000];
                c.timing_steps = 10;
                c.timing_order = Some(20);
            }
        }
        c
    }
}

impl Experiment for BurgersRiemann {
    fn id(&self) -> &'static str {
        "burgers-riemann"
    }
    fn summary(&self) -> &'static str {
        "Burgers Riemann problem with a parameter-dependent state, predicted past the training window"
    }
    fn config(&self, scale: Scale) -> ExperimentConfig {
        let mut c = base(
            self.id(),
            self.summary(),
            scale,
            Family::BurgersRiemann {
                left: 0.5,
                right: 0.75,
                height: 1.0,
            },
            MeshConfig::Uniform {
                left: 0.0,
                right: 8.0,
                cells: 400,
            },
        );
        c.stepper = implicit(TimeScheme::BackwardEuler, FluxRule::LaxFriedrichs);
        c.t_train = 0.25;
        c.t_end = 0.5;
        c.param_box = vec![[0.0, 1.0]];
        c.train_params = ParamSet::Grid {
            axes: vec![range(0.0, 0.1, 11)],
        };
        c.modes = vec!["lp-galerkin".into(), "learning".into(), "pod".into()];
        c.network = network(150);
        c.output_times = vec![0.25, 0.5];
        match scale {
            Scale::Paper => {
                let test: Vec<Vec<f64>> = (0..10)
                    .flat_map(|i| {
                        let m = 0.05 + 0.1 * i as f64;
                        [vec![m - 0.01], vec![m + 0.01]]
                    })
                    .collect();
                c.test_params = ParamSet::List { points: test };
                c.orders = vec![5, 10, 15, 20, 25];
            }
            Scale::Desk => {
                c.test_params = ParamSet::List {
                    points: vec![vec![0.16], vec![0.44], vec![0.76]],
                };
                c.orders = vec![15, 25];
            }
        }
        c
    }
}

impl Experiment for BurgersSmooth {
    fn id(&self) -> &'static str {
        "burgers-smooth"
    }
    fn summary(&self) -> &'static str {
        "periodic Burgers from a smooth profile through shock formation"
    }
    fn config(&self, scale: Scale) -> ExperimentConfig {
        let mut c = base(
            self.id(),
            self.summary(),
            scale,
            Family::Burgers {
                initial_condition: InitialCondition::Sine {
                    offset: 0.25,
                    amplitude: 0.5,
                    wavenumber: 1.0,
                },
                boundary: Boundary::Periodic,
            },
            MeshConfig::Periodic {
                left: -1.0,
                right: 1.0,
                cells: 400,
            },
        );
        c.stepper = implicit(TimeScheme::BackwardEuler, FluxRule::LaxFriedrichs);
        c.dt = DtRule::MeshRatio { ratio: 0.25 };
        c.t_train = 1.1;
        c.t_start = 1.1;
        c.t_end = 1.6;
        c.modes = vec!["lp-galerkin".into(), "learning".into(), "pod".into()];
        c.network = network(100);
        c.output_times = vec![1.6];
        match scale {
            Scale::Paper => c.orders = vec![10, 20, 30],
            Scale::Desk => {
                c.mesh = MeshConfig::Periodic {
                    left: -1.0,
                    right: 1.0,
                    cells: 200,
                };
                c.orders = vec![10, 20];
                c.network.train.epochs = 30;
            }
        }
        c
    }
}

impl Experiment for EulerSod {
    fn id(&self) -> &'static str {
        "euler-sod"
    }
    fn summary(&self) -> &'static str {
        "Sod shock tube for the Euler equations with one learned basis per conserved variable"
    }
    fn config(&self, scale: Scale) -> ExperimentConfig {
        let mut c = base(
            self.id(),
            self.summary(),
            scale,
            Family::Euler {
                gamma: 3.0,
                initial_condition: InitialCondition::EulerRiemann {
                    split: 0.0,
                    left: [1.0, 0.0, 1.0],
                    right: [0.125, 0.0, 0.1],
                },
                boundary: Boundary::Outflow,
            },
            MeshConfig::Uniform {
                left: -1.5,
                right: 1.5,
                cells: 1500,
            },
        );
        c.stepper = Stepper::WenoRk3;
        c.dt = DtRule::Cfl { cfl: 0.6 };
        c.t_train = 0.2;
        c.t_start = 0.2;
        c.t_end = 0.25;
        c.modes = vec!["lp-explicit".into(), "learning".into(), "pod".into()];
        c.network = network(100);
        c.output_times = vec![0.25];
        match scale {
            Scale::Paper => c.orders = vec![20, 30],
            Scale::Desk => {
                c.mesh = MeshConfig::Uniform {
                    left: -1.5,
                    right: 1.5,
                    cells: 300,
                };
                c.orders = vec![20];
                c.network.train.epochs = 30;
            }
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_validates_and_round_trips() {
        let reg = ExperimentRegistry::standard();
        assert_eq!(reg.ids().len(), 7);
        for e in reg.entries() {
            for scale in [Scale::Paper, Scale::Desk] {
                let c = e.config(scale);
                c.validate().unwrap_or_else(|err| panic!("{}: {err}", e.id()));
                let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
                assert_eq!(back, c);
            }
        }
    }

    #[test]
    fn unknown_id_lists_registry() {
        let err = ExperimentRegistry::standard().get("nope").err().unwrap().to_string();
        assert!(err.contains("burgers-riemann") && err.contains("euler-sod"));
    }

    #[test]
    fn inhomogeneous_defaults() {
        let c = InhomogeneousAdvection.config(Scale::Paper);
        let train = c.train_params.points();
        assert_eq!(train.len(), 231);
        assert!((train[230][0] - 0.5).abs() < 1e-15 && (train[230][1] - 4.0).abs() < 1e-12);
        assert_eq!(c.test_params.points().len(), 20);
        assert_eq!(c.mesh.cells(), 500);
    }
}
