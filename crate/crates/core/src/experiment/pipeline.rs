use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::config::{ExperimentConfig, Family, SnapshotSource};
use crate::fom::implicit::StepOperator;
use crate::fom::mesh::Mesh1D;
use crate::fom::problem::exact_advection;
use crate::fom::run::{run_euler_with_stops, run_fom, step_count, DtRule, MeshSpec, Stepper};
use crate::fom::snapshot::SnapshotSet;
use crate::metrics::{
    singular_spectrum, write_history_csv, write_order_table_csv, write_spectrum_csv, ErrorReport, OrderRow,
    ParamErrors,
};
use crate::nn::{train_offline, LpModel, TrainReport};
use crate::pod::{assemble_snapshot_matrix, pod_basis, transformed_snapshot_matrix, PodBasis};
use crate::rom::{
    basis_shift_deviation, run_rom, BasisKind, BasisProvider, ExplicitEulerSystem, ImplicitSystem, OnlineSystem,
    RomRunResult, RunRequest, StrategyRegistry, SystemBasis,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Snapshots,
    Train,
    Pod,
    Rom,
    Compare,
    Spectrum,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Snapshots,
        Stage::Train,
        Stage::Pod,
        Stage::Rom,
        Stage::Compare,
        Stage::Spectrum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Snapshots => "snapshots",
            Stage::Train => "train",
            Stage::Pod => "pod",
            Stage::Rom => "rom",
            Stage::Compare => "compare",
            Stage::Spectrum => "spectrum",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub stage: String,
    pub item: String,
    pub error: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Partial,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSeed {
    pub order: usize,
    pub component: usize,
    pub seed: u64,
    /// Seed of the initialization that was kept, once trained.
    #[serde(default)]
    pub trained_seed: Option<u64>,
}

/// Seed of restart `k`; restart 0 uses the model seed itself.
pub fn restart_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add(k as u64 * 7919)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: String,
    pub config_hash: String,
    pub seed: u64,
    pub model_seeds: Vec<ModelSeed>,
    pub train_params: Vec<Vec<f64>>,
    pub test_params: Vec<Vec<f64>>,
    pub stages: BTreeMap<Stage, StageStatus>,
    pub failures: Vec<FailureRecord>,
}

impl Manifest {
    fn fresh(cfg: &ExperimentConfig) -> Result<Self> {
        let comps = cfg.family.components();
        Ok(Self {
            id: cfg.id.clone(),
            config_hash: cfg.hash()?,
            seed: cfg.seed,
            model_seeds: cfg
                .orders
                .iter()
                .flat_map(|&r| {
                    (0..comps).map(move |c| ModelSeed {
                        order: r,
                        component: c,
                        seed: cfg.model_seed(r, c),
                        trained_seed: None,
                    })
                })
                .collect(),
            train_params: cfg.train_params.points(),
            test_params: cfg.test_params.points(),
            stages: BTreeMap::new(),
            failures: Vec::new(),
        })
    }

    /// The stored manifest when it belongs to the same configuration.
    fn open(cfg: &ExperimentConfig, path: &Path) -> Result<Self> {
        let fresh = Self::fresh(cfg)?;
        if let Ok(text) = std::fs::read_to_string(path) {
            if let Ok(old) = serde_json::from_str::<Manifest>(&text) {
                if old.config_hash == fresh.config_hash {
                    return Ok(old);
                }
            }
        }
        Ok(fresh)
    }
}

/// File layout of one artifact directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub root: PathBuf,
}

impl Artifacts {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    fn dir(&self, name: &str) -> Result<PathBuf> {
        let d = self.root.join(name);
        std::fs::create_dir_all(&d)?;
        Ok(d)
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn train_snapshots(&self, c: usize) -> PathBuf {
        self.root.join("snapshots").join(format!("train_c{c}.bin"))
    }

    pub fn test_snapshots(&self, c: usize) -> PathBuf {
        self.root.join("snapshots").join(format!("test_c{c}.bin"))
    }

    pub fn model(&self, r: usize, c: usize) -> PathBuf {
        self.root.join("models").join(format!("lp_r{r}_c{c}.json"))
    }

    pub fn pod(&self, r: usize, c: usize) -> PathBuf {
        self.root.join("pod").join(format!("pod_r{r}_c{c}.bin"))
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("rom").join("reports.json")
    }

    pub fn run_dir(&self, mode: &str, r: usize) -> PathBuf {
        self.root.join("rom").join(format!("{mode}_r{r}"))
    }
}

/// Output of the online timing study for one mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub cells: usize,
    pub order: usize,
    pub steps: usize,
    pub basis_eval_s: f64,
    pub projection_solve_s: f64,
    /// Reduced assembly and solve only, without refactoring the basis.
    pub reduced_solve_s: f64,
    /// Inverting the assembled `r × r` system.
    pub linear_solve_s: f64,
    pub fom_solve_s: f64,
}

impl TimingRow {
    pub fn basis_over_projection(&self) -> f64 {
        self.basis_eval_s / self.projection_solve_s
    }

    pub fn projection_over_fom(&self) -> f64 {
        self.projection_solve_s / self.fom_solve_s
    }

    pub fn reduced_solve_over_fom(&self) -> f64 {
        self.reduced_solve_s / self.fom_solve_s
    }

    pub fn linear_solve_over_fom(&self) -> f64 {
        self.linear_solve_s / self.fom_solve_s
    }
}

/// Per-order, per-mode comparison of a set of reports sharing one reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<OrderRow>,
    /// Modes ordered from smallest to largest `E_average`, per order.
    pub ranking: Vec<(usize, Vec<String>)>,
}

pub fn compare_modes(reports: &[ErrorReport]) -> Result<Comparison> {
    let first = reports.first().ok_or_else(|| Error::InvalidInput("nothing to compare".into()))?;
    for r in reports {
        let same_window = (r.window.0 - first.window.0).abs() <= 1e-12 && (r.window.1 - first.window.1).abs() <= 1e-12;
        if !same_window {
            return Err(Error::InvalidInput(format!(
                "window mismatch: {} r={} has {:?}, {} r={} has {:?}",
                r.mode, r.order, r.window, first.mode, first.order, first.window
            )));
        }
        let mus: Vec<&Vec<f64>> = r.per_param.iter().map(|p| &p.mu).collect();
        let first_mus: Vec<&Vec<f64>> = first.per_param.iter().map(|p| &p.mu).collect();
        if mus != first_mus {
            return Err(Error::InvalidInput(format!("{} r={} uses different test parameters", r.mode, r.order)));
        }
    }
    let mut rows: Vec<OrderRow> = reports
        .iter()
        .map(|r| OrderRow {
            order: r.order,
            mode: r.mode.clone(),
            average: r.average,
        })
        .collect();
    rows.sort_by(|a, b| a.order.cmp(&b.order).then_with(|| a.mode.cmp(&b.mode)));
    let mut ranking: Vec<(usize, Vec<String>)> = Vec::new();
    let mut orders: Vec<usize> = rows.iter().map(|r| r.order).collect();
    orders.dedup();
    for r in orders {
        let mut at: Vec<&OrderRow> = rows.iter().filter(|x| x.order == r).collect();
        at.sort_by(|a, b| a.average.total_cmp(&b.average));
        ranking.push((r, at.iter().map(|x| x.mode.clone()).collect()));
    }
    Ok(Comparison { rows, ranking })
}

/// Restricts an error history to stamps inside `[t0, t1]`.
fn windowed(p: &ParamErrors, (t0, t1): (f64, f64)) -> Result<ParamErrors> {
    let tol = 1e-9;
    let keep: Vec<usize> = (0..p.times.len())
        .filter(|&n| p.times[n] >= t0 - tol && p.times[n] <= t1 + tol)
        .collect();
    if keep.is_empty() {
        return Err(Error::InvalidInput(format!("no stamps inside the window [{t0}, {t1}]")));
    }
    Ok(ParamErrors {
        mu: p.mu.clone(),
        times: keep.iter().map(|&n| p.times[n]).collect(),
        l2: keep.iter().map(|&n| p.l2[n]).collect(),
        relative: keep.iter().map(|&n| p.relative[n]).collect(),
    })
}

/// Drives the stages of one experiment.
pub struct Pipeline {
    pub config: ExperimentConfig,
    pub artifacts: Artifacts,
    manifest: Manifest,
}

impl Pipeline {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let artifacts = Artifacts::new(config.out_dir.clone());
        std::fs::create_dir_all(&artifacts.root)?;
        std::fs::write(artifacts.root.join("config.toml"), config.to_toml()?)?;
        let manifest = Manifest::open(&config, &artifacts.manifest())?;
        Ok(Self {
            config,
            artifacts,
            manifest,
        })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn save_manifest(&self) -> Result<()> {
        std::fs::write(self.artifacts.manifest(), serde_json::to_string_pretty(&self.manifest)?)?;
        Ok(())
    }

    /// Runs `stages` in order; stops at the first stage that fails outright.
    pub fn run(&mut self, stages: &[Stage]) -> Result<&Manifest> {
        for &stage in stages {
            self.run_stage(stage)?;
        }
        Ok(&self.manifest)
    }

    pub fn run_stage(&mut self, stage: Stage) -> Result<StageStatus> {
        log::info!("{}: stage {}", self.config.id, stage.name());
        self.manifest.failures.retain(|f| f.stage != stage.name());
        let mut failures = Vec::new();
        let outcome = match stage {
            Stage::Snapshots => self.snapshots(),
            Stage::Train => self.train(),
            Stage::Pod => self.pod(&mut failures),
            Stage::Rom => self.rom(&mut failures),
            Stage::Compare => self.compare(),
            Stage::Spectrum => self.spectrum(),
        };
        let status = match &outcome {
            Err(e) => {
                failures.push(record(stage, "stage", e));
                StageStatus::Failed
            }
            Ok(()) if failures.is_empty() => StageStatus::Ok,
            Ok(()) => StageStatus::Partial,
        };
        for f in &failures {
            log::warn!("{}: {} failed: {}", f.stage, f.item, f.error);
        }
        self.manifest.failures.extend(failures);
        self.manifest.stages.insert(stage, status);
        self.save_manifest()?;
        outcome.map(|()| status)
    }

    fn online_mesh(&self) -> Result<MeshSpec> {
        self.config.mesh.spec(self.config.online_cells)
    }

    fn problem(&self, mu: &[f64]) -> Result<crate::fom::problem::FomProblem> {
        self.config.family.problem(mu)
    }

    /// Trajectories of one parameter on `mesh` up to `t_end`, one set per component.
    fn trajectory(&self, mesh: &MeshSpec, mu: &[f64], t_end: f64, every: usize) -> Result<Vec<SnapshotSet>> {
        let cfg = &self.config;
        let problem = self.problem(mu)?;
        match (cfg.snapshots, cfg.stepper) {
            (SnapshotSource::Exact, _) => {
                let Family::Advection { c, .. } = cfg.family else {
                    return Err(Error::Config("exact snapshots need constant-speed advection".into()));
                };
                let m = mesh.at(0.0)?;
                let dt = cfg.dt.fixed_dt(&m)?;
                let times: Vec<f64> = (0..=step_count(t_end, dt)).step_by(every.max(1)).map(|k| k as f64 * dt).collect();
                let periodic = m.period().map(|p| (m.left(), p));
                let mut values = Vec::with_capacity(times.len() * m.len());
                for &t in &times {
                    values.extend(
                        m.nodes()
                            .iter()
                            .map(|&x| exact_advection(&problem.initial_condition, x, t, c, periodic)),
                    );
                }
                Ok(vec![SnapshotSet::new(&m, times, vec![mu.to_vec()], values)?])
            }
            (SnapshotSource::FullOrder, Stepper::WenoRk3) => {
                let DtRule::Cfl { cfl } = cfg.dt else {
                    return Err(Error::Config("explicit stepper needs a CFL time-step rule".into()));
                };
                let m = mesh.at(0.0)?;
                let mut stops = vec![cfg.t_train.min(t_end)];
                for t in [cfg.t_start, t_end] {
                    if t > *stops.last().unwrap() + 1e-12 {
                        stops.push(t);
                    }
                }
                stops.retain(|&t| t <= t_end + 1e-12);
                let traj = run_euler_with_stops(&problem, &m, cfl, &stops, mu)?;
                Ok(vec![traj.rho, traj.mom, traj.energy])
            }
            (SnapshotSource::FullOrder, stepper) => {
                Ok(vec![run_fom(&problem, mesh, stepper, cfg.dt, t_end, every, mu)?])
            }
        }
    }

    fn parameter_sweep(
        &self,
        mesh: &MeshSpec,
        params: &[Vec<f64>],
        t_end: f64,
        every: usize,
        keep: impl Fn(f64) -> bool + Sync,
    ) -> Result<Vec<SnapshotSet>> {
        let per_mu: Vec<Vec<SnapshotSet>> = params
            .par_iter()
            .map(|mu| {
                self.trajectory(mesh, mu, t_end, every)?
                    .into_iter()
                    .map(|s| s.select_times(|_, t| keep(t)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        (0..self.config.family.components())
            .map(|c| SnapshotSet::concat_params(&per_mu.iter().map(|v| v[c].clone()).collect::<Vec<_>>()))
            .collect()
    }

    fn snapshots(&mut self) -> Result<()> {
        let cfg = &self.config;
        self.artifacts.dir("snapshots")?;
        let offline = cfg.mesh.spec(None)?;
        let t_train = cfg.t_train;
        let train = self.parameter_sweep(
            &offline,
            &cfg.train_params.points(),
            t_train,
            cfg.record_every,
            |t| t <= t_train + 1e-9,
        )?;
        for (c, s) in train.iter().enumerate() {
            s.write(&self.artifacts.train_snapshots(c))?;
        }
        let test = self.parameter_sweep(&self.online_mesh()?, &cfg.test_params.points(), cfg.t_end, 1, |_| true)?;
        for (c, s) in test.iter().enumerate() {
            s.write(&self.artifacts.test_snapshots(c))?;
        }
        Ok(())
    }

    fn read_sets(&self, path: impl Fn(usize) -> PathBuf) -> Result<Vec<SnapshotSet>> {
        (0..self.config.family.components())
            .map(|c| {
                SnapshotSet::read(&path(c)).map_err(|e| match e {
                    Error::Io(io) => Error::Config(format!("{}: {io} (run the snapshots stage first)", path(c).display())),
                    other => other,
                })
            })
            .collect()
    }

    fn train(&mut self) -> Result<()> {
        let cfg = &self.config;
        if let Some(src) = &cfg.models_from {
            log::info!("train: using models from {}", src.display());
            return Ok(());
        }
        self.artifacts.dir("models")?;
        let sets = self.read_sets(|c| self.artifacts.train_snapshots(c))?;
        let arch = cfg.network.architecture();
        let mut kept = Vec::new();
        for (c, set) in sets.iter().enumerate() {
            let norm = set.normalization();
            let data = set.training_set(&norm)?;
            for &r in &cfg.orders {
                let mut best: Option<(LpModel, TrainReport, u64)> = None;
                for k in 0..cfg.network.restarts.max(1) {
                    let seed = restart_seed(cfg.model_seed(r, c), k);
                    let mut model = LpModel::new(&arch, r, norm.clone(), seed)?;
                    let train_cfg = crate::nn::TrainConfig {
                        seed,
                        ..cfg.network.train.clone()
                    };
                    let clock = Instant::now();
                    let report = train_offline(&mut model, &data, &train_cfg)?;
                    log::info!(
                        "trained r={r} c={c} seed {seed}: loss {:.3e} -> {:.3e} in {:.1}s",
                        report.initial_loss,
                        report.final_loss,
                        clock.elapsed().as_secs_f64()
                    );
                    if best.as_ref().map_or(true, |b| report.final_loss < b.1.final_loss) {
                        best = Some((model, report, seed));
                    }
                }
                let (model, report, seed) = best.expect("at least one restart");
                model.save(&self.artifacts.model(r, c))?;
                write_json(&self.artifacts.model(r, c).with_extension("report.json"), &report)?;
                kept.push((r, c, seed));
            }
        }
        for (r, c, seed) in kept {
            if let Some(m) = self.manifest.model_seeds.iter_mut().find(|m| m.order == r && m.component == c) {
                m.trained_seed = Some(seed);
            }
        }
        Ok(())
    }

    fn pod(&mut self, failures: &mut Vec<FailureRecord>) -> Result<()> {
        let cfg = &self.config;
        self.artifacts.dir("pod")?;
        let sets = self.read_sets(|c| self.artifacts.train_snapshots(c))?;
        let wanted = cfg.modes.iter().any(|m| m == "pod");
        if !wanted && sets.iter().any(SnapshotSet::has_per_snapshot_meshes) {
            log::info!("pod: skipped, snapshots live on moving meshes and no pod mode is requested");
            return Ok(());
        }
        for (c, set) in sets.iter().enumerate() {
            let m = match assemble_snapshot_matrix(set) {
                Ok(m) => m,
                Err(e) => {
                    failures.push(record(Stage::Pod, &format!("component {c}"), &e));
                    continue;
                }
            };
            write_spectrum_csv(&self.artifacts.root.join("pod").join(format!("spectrum_c{c}.csv")), &singular_spectrum(&m))?;
            for &r in &cfg.orders {
                match pod_basis(&m, set.nodes(0), set.period(), r) {
                    Ok(b) => b.save(&self.artifacts.pod(r, c))?,
                    Err(e) => failures.push(record(Stage::Pod, &format!("r={r} component {c}"), &e)),
                }
            }
        }
        Ok(())
    }

    fn source(&self) -> Artifacts {
        Artifacts::new(self.config.models_from.clone().unwrap_or_else(|| self.artifacts.root.clone()))
    }

    fn learned_basis(&self, r: usize) -> Result<Box<dyn BasisProvider>> {
        let src = self.source();
        let comps = self.config.family.components();
        let models = (0..comps)
            .map(|c| LpModel::load(&src.model(r, c)))
            .collect::<Result<Vec<_>>>()?;
        Ok(if comps == 1 {
            Box::new(models.into_iter().next().unwrap())
        } else {
            Box::new(SystemBasis { blocks: models })
        })
    }

    fn pod_provider(&self, r: usize) -> Result<Box<dyn BasisProvider>> {
        let src = self.source();
        let comps = self.config.family.components();
        let bases = (0..comps)
            .map(|c| PodBasis::load(&src.pod(r, c)))
            .collect::<Result<Vec<_>>>()?;
        Ok(if comps == 1 {
            Box::new(bases.into_iter().next().unwrap())
        } else {
            Box::new(SystemBasis { blocks: bases })
        })
    }

    /// The online system for parameter `mu`, following `reference`'s stamps for explicit runs.
    pub fn online_system(&self, mu: &[f64], mesh: &MeshSpec, reference: &SnapshotSet) -> Result<OnlineSystem> {
        let cfg = &self.config;
        let problem = self.problem(mu)?;
        match cfg.stepper {
            Stepper::Implicit { scheme, flux } => {
                let dt = cfg.dt.fixed_dt(&mesh.at(0.0)?)?;
                let n_start = (cfg.t_start / dt).round() as usize;
                if (n_start as f64 * dt - cfg.t_start).abs() > 1e-9 * cfg.t_start.max(1.0) {
                    return Err(Error::Config(format!(
                        "t_start = {} is not a multiple of dt = {dt}",
                        cfg.t_start
                    )));
                }
                Ok(OnlineSystem::Implicit(ImplicitSystem::new(
                    problem,
                    mesh.clone(),
                    scheme,
                    flux,
                    dt,
                    n_start,
                    step_count(cfg.t_end, dt),
                )?))
            }
            Stepper::WenoRk3 => {
                let times: Vec<f64> = reference
                    .times()
                    .iter()
                    .copied()
                    .filter(|&t| t >= cfg.t_start - 1e-12 && t <= cfg.t_end + 1e-12)
                    .collect();
                Ok(OnlineSystem::Explicit(ExplicitEulerSystem::new(&problem, mesh.at(0.0)?, times)?))
            }
        }
    }

    fn window(&self) -> (f64, f64) {
        match self.config.error_window {
            Some([a, b]) => (a, b),
            None => (self.config.t_start, self.config.t_end),
        }
    }

    fn rom(&mut self, failures: &mut Vec<FailureRecord>) -> Result<()> {
        self.artifacts.dir("rom")?;
        if !self.config.shift_times.is_empty() {
            self.shift_study()?;
        }
        if !self.config.timing_cells.is_empty() {
            if let Err(e) = self.timing_study() {
                failures.push(record(Stage::Rom, "timing study", &e));
            }
        }
        if self.config.modes.is_empty() {
            return write_json(&self.artifacts.reports(), &Vec::<ErrorReport>::new());
        }
        let tests = self.read_sets(|c| self.artifacts.test_snapshots(c))?;
        let params = self.config.test_params.points();
        if tests[0].n_params() != params.len() {
            return Err(Error::Config("test snapshots do not match the configured test parameters".into()));
        }
        let mesh = self.online_mesh()?;
        let registry = StrategyRegistry::standard();
        let window = self.window();
        let mut reports = Vec::new();
        for mode in &self.config.modes {
            let strategy = registry.get(mode)?;
            for &r in &self.config.orders {
                let item = format!("{mode} r={r}");
                let basis = match strategy.basis_kind() {
                    BasisKind::Learned => self.learned_basis(r),
                    BasisKind::Pod => self.pod_provider(r),
                };
                let basis = match basis {
                    Ok(b) => b,
                    Err(e) => {
                        failures.push(record(Stage::Rom, &item, &e));
                        continue;
                    }
                };
                let dir = self.artifacts.run_dir(mode, r);
                std::fs::create_dir_all(&dir)?;
                let refs: Vec<&SnapshotSet> = tests.iter().collect();
                let runs: Vec<Result<RomRunResult>> = params
                    .par_iter()
                    .enumerate()
                    .map(|(k, mu)| {
                        let system = self.online_system(mu, &mesh, refs[0])?;
                        let result = run_rom(&RunRequest {
                            system: &system,
                            basis: basis.as_ref(),
                            strategy,
                            mu,
                            reference: &refs,
                            param_index: k,
                            options: self.config.projection.clone(),
                            keep_solutions: !self.config.output_times.is_empty(),
                        })?;
                        result.write_error_csv(&dir.join(format!("mu{k}_errors.csv")))?;
                        result.write_timing_json(&dir.join(format!("mu{k}_timing.json")))?;
                        if !self.config.output_times.is_empty() {
                            result.write_solutions_csv(&dir.join(format!("mu{k}_solution.csv")), &self.config.output_times)?;
                        }
                        Ok(result)
                    })
                    .collect();
                let mut per_param = Vec::new();
                let mut n_nodes = 0;
                for (k, run) in runs.into_iter().enumerate() {
                    match run.and_then(|res| {
                        n_nodes = res.nodes_at(res.times.len() - 1).len();
                        windowed(&res.param_errors(), window)
                    }) {
                        Ok(p) => per_param.push(p),
                        Err(e) => failures.push(record(Stage::Rom, &format!("{item} mu={:?}", params[k]), &e)),
                    }
                }
                if per_param.len() == params.len() {
                    reports.push(ErrorReport::new(mode, r, n_nodes, per_param)?);
                } else {
                    log::warn!("{item}: no report, {} of {} parameters failed", params.len() - per_param.len(), params.len());
                }
            }
        }
        write_json(&self.artifacts.reports(), &reports)
    }

    /// Deviation of each learned basis function from the transported initial one.
    fn shift_study(&self) -> Result<()> {
        let Family::Advection { c, .. } = self.config.family else {
            return Err(Error::Config("basis shift study needs constant-speed advection".into()));
        };
        let nodes = self.config.mesh.spec(None)?.at(0.0)?.nodes().to_vec();
        for &r in &self.config.orders {
            let model = LpModel::load(&self.source().model(r, 0))?;
            let mut w = std::io::BufWriter::new(std::fs::File::create(
                self.artifacts.root.join("rom").join(format!("basis_shift_r{r}.csv")),
            )?);
            let cols: Vec<String> = (1..=r).map(|i| format!("phi{i}")).collect();
            writeln!(w, "t,{}", cols.join(","))?;
            for &t in &self.config.shift_times {
                let dev = basis_shift_deviation(&model, c, t, &nodes, &[])?;
                let vals: Vec<String> = dev.iter().map(|d| format!("{d:.17e}")).collect();
                writeln!(w, "{t:.17e},{}", vals.join(","))?;
            }
            w.flush()?;
        }
        Ok(())
    }

    /// Per-step cost of basis evaluation, reduced solve and full-order solve on growing online meshes.
    pub fn timing_study(&self) -> Result<Vec<TimingRow>> {
        let cfg = &self.config;
        let Stepper::Implicit { .. } = cfg.stepper else {
            return Err(Error::Config("the timing study needs an implicit stepper".into()));
        };
        let (left, right) = match cfg.mesh {
            crate::experiment::config::MeshConfig::Uniform { left, right, .. } => (left, right),
            _ => return Err(Error::Config("the timing study needs a uniform mesh".into())),
        };
        let r = cfg.timing_order.unwrap_or(cfg.orders[0]);
        let basis = self.learned_basis(r)?;
        let registry = StrategyRegistry::standard();
        let strategy = registry.get("lp-galerkin")?;
        let mu = cfg.test_params.points().into_iter().next().unwrap_or_default();
        let steps = cfg.timing_steps.max(1);
        let mut rows = Vec::new();
        for &cells in &cfg.timing_cells {
            let mesh = Mesh1D::uniform(left, right, cells)?;
            let spec = MeshSpec::Fixed { mesh: mesh.clone() };
            let Stepper::Implicit { scheme, flux } = cfg.stepper else { unreachable!() };
            let dt = cfg.dt.fixed_dt(&mesh)?;
            let sys = ImplicitSystem::new(self.problem(&mu)?, spec, scheme, flux, dt, 0, steps)?;
            let mut u = sys.problem.initial_state(mesh.nodes());
            let mut values = u.clone();
            let mut fom_s = 0.0;
            for n in 0..steps {
                let op = sys.operator(n + 1)?;
                let b = op.rhs(&u);
                let clock = Instant::now();
                u = op.solve(&b, &u)?;
                fom_s += clock.elapsed().as_secs_f64();
                values.extend_from_slice(&u);
            }
            let reference = SnapshotSet::new(&mesh, sys.times.clone(), vec![mu.clone()], values)?;
            let system = OnlineSystem::Implicit(sys);
            let res = run_rom(&RunRequest {
                system: &system,
                basis: basis.as_ref(),
                strategy,
                mu: &mu,
                reference: &[&reference],
                param_index: 0,
                options: cfg.projection.clone(),
                keep_solutions: false,
            })?;
            let (be, ps) = res.timing.per_step();
            rows.push(TimingRow {
                cells,
                order: r,
                steps,
                basis_eval_s: be,
                projection_solve_s: ps,
                reduced_solve_s: res.timing.reduced_solve_per_step(),
                linear_solve_s: res.timing.linear_solve_per_step(),
                fom_solve_s: fom_s / steps as f64,
            });
        }
        let dir = self.artifacts.dir("timing")?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("timing.csv"))?);
        writeln!(w, "cells,r,steps,basis_eval_s,projection_solve_s,reduced_solve_s,linear_solve_s,fom_solve_s")?;
        for row in &rows {
            writeln!(
                w,
                "{},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}",
                row.cells,
                row.order,
                row.steps,
                row.basis_eval_s,
                row.projection_solve_s,
                row.reduced_solve_s,
                row.linear_solve_s,
                row.fom_solve_s
            )?;
        }
        w.flush()?;
        write_json(&dir.join("timing.json"), &rows)?;
        Ok(rows)
    }

    fn compare(&mut self) -> Result<()> {
        let text = std::fs::read_to_string(self.artifacts.reports())
            .map_err(|e| Error::Config(format!("{}: {e} (run the rom stage first)", self.artifacts.reports().display())))?;
        let reports: Vec<ErrorReport> = serde_json::from_str(&text)?;
        let dir = self.artifacts.dir("compare")?;
        if reports.is_empty() {
            return Ok(());
        }
        let cmp = compare_modes(&reports)?;
        write_order_table_csv(&dir.join("order_table.csv"), &cmp.rows)?;
        let absolute: Vec<OrderRow> = reports
            .iter()
            .map(|r| OrderRow {
                order: r.order,
                mode: r.mode.clone(),
                average: r.average_absolute(),
            })
            .collect();
        write_order_table_csv(&dir.join("order_table_absolute.csv"), &absolute)?;
        for rep in &reports {
            let times = &rep.per_param[0].times;
            let mean: Vec<f64> = (0..times.len())
                .map(|n| rep.per_param.iter().map(|p| p.relative[n]).sum::<f64>() / rep.per_param.len() as f64)
                .collect();
            write_history_csv(&dir.join(format!("history_{}_r{}.csv", rep.mode, rep.order)), times, &mean)?;
        }
        write_json(&dir.join("comparison.json"), &cmp)
    }

    fn spectrum(&mut self) -> Result<()> {
        let dir = self.artifacts.dir("spectrum")?;
        let sets = self.read_sets(|c| self.artifacts.train_snapshots(c))?;
        if sets[0].has_per_snapshot_meshes() {
            log::info!("spectrum: skipped, snapshots live on moving meshes");
            return Ok(());
        }
        let m = assemble_snapshot_matrix(&sets[0])?;
        write_spectrum_csv(&dir.join("original.csv"), &singular_spectrum(&m))?;
        if let Family::Advection { initial_condition, .. } = &self.config.family {
            let mesh = sets[0].mesh(0);
            let t = transformed_snapshot_matrix(|x| initial_condition.eval(x), &mesh, sets[0].times());
            write_spectrum_csv(&dir.join("transformed.csv"), &singular_spectrum(&t))?;
        }
        Ok(())
    }
}

fn record(stage: Stage, item: &str, e: &Error) -> FailureRecord {
    FailureRecord {
        stage: stage.name().into(),
        item: item.into(),
        error: e.to_string(),
        exit_code: e.exit_code(),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Runs every stage of `config`.
pub fn run_experiment(config: ExperimentConfig) -> Result<Manifest> {
    let mut p = Pipeline::new(config)?;
    p.run(&Stage::ALL)?;
    Ok(p.manifest.clone())
}

/// Kept for callers that only need the training summary of a stored model.
pub fn load_train_report(artifacts: &Artifacts, r: usize, c: usize) -> Result<TrainReport> {
    let text = std::fs::read_to_string(artifacts.model(r, c).with_extension("report.json"))?;
    Ok(serde_json::from_str(&text)?)
}
