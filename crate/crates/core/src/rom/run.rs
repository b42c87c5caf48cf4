use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fom::implicit::StepOperator;
use crate::fom::mesh::{interpolate, Mesh1D};
use crate::fom::snapshot::SnapshotSet;
use crate::linalg::DenseMatrix;
use crate::metrics::{finer_mesh_error, l2_error, l2_norm, ParamErrors};
use crate::rom::basis::BasisProvider;
use crate::rom::projection::{ProjectedBasis, ProjectionOptions};
use crate::rom::strategy::{Projector, RomStrategy, StepContext};
use crate::rom::system::OnlineSystem;

/// Seconds spent in the two online phases, summed over the run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingLedger {
    pub basis_eval_s: f64,
    /// QR factorization of the basis plus the reduced solve.
    pub projection_solve_s: f64,
    /// The QR part of `projection_solve_s`.
    pub factor_s: f64,
    /// Assembling and solving the reduced system for an already factored basis.
    pub reduced_solve_s: f64,
    /// The solve alone, without assembly.
    #[serde(default)]
    pub linear_solve_s: f64,
    pub total_s: f64,
    pub steps: usize,
}

impl TimingLedger {
    pub fn per_step(&self) -> (f64, f64) {
        let s = self.steps.max(1) as f64;
        (self.basis_eval_s / s, self.projection_solve_s / s)
    }

    pub fn reduced_solve_per_step(&self) -> f64 {
        self.reduced_solve_s / self.steps.max(1) as f64
    }

    pub fn linear_solve_per_step(&self) -> f64 {
        self.linear_solve_s / self.steps.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RomRunResult {
    pub mode: String,
    pub mu: Vec<f64>,
    pub block_orders: Vec<usize>,
    pub times: Vec<f64>,
    pub alphas: Vec<Vec<f64>>,
    /// `Φ^n α^n`, stacked over components.
    pub solutions: Vec<Vec<f64>>,
    /// Mesh nodes per step (one entry when the mesh is fixed).
    pub nodes: Vec<Vec<f64>>,
    /// Errors of the first component, which is the whole state for scalar laws.
    pub l2_errors: Vec<f64>,
    pub relative_errors: Vec<f64>,
    /// `[component][step]` relative errors.
    pub component_relative: Vec<Vec<f64>>,
    pub timing: TimingLedger,
    pub max_condition: f64,
    pub iterations: Vec<usize>,
}

impl RomRunResult {
    pub fn order(&self) -> usize {
        self.block_orders.iter().sum()
    }

    pub fn nodes_at(&self, n: usize) -> &[f64] {
        if self.nodes.len() == 1 {
            &self.nodes[0]
        } else {
            &self.nodes[n]
        }
    }

    pub fn param_errors(&self) -> ParamErrors {
        ParamErrors {
            mu: self.mu.clone(),
            times: self.times.clone(),
            l2: self.l2_errors.clone(),
            relative: self.relative_errors.clone(),
        }
    }

    /// Columns `step, t, l2, relative`.
    pub fn write_error_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "step,t,l2,relative")?;
        for (n, t) in self.times.iter().enumerate() {
            writeln!(w, "{n},{t:.17e},{:.17e},{:.17e}", self.l2_errors[n], self.relative_errors[n])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reconstructions at the stamps closest to `at` (all stamps when empty); one value column per component.
    pub fn write_solutions_csv(&self, path: &Path, at: &[f64]) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let comps = self.block_orders.len();
        let names: Vec<String> = (0..comps).map(|c| format!("u{c}")).collect();
        writeln!(w, "t,x,{}", names.join(","))?;
        let steps: Vec<usize> = if at.is_empty() {
            (0..self.times.len()).collect()
        } else {
            at.iter().map(|&t| nearest(&self.times, t)).collect()
        };
        for n in steps {
            let nodes = self.nodes_at(n);
            let u = &self.solutions[n];
            let len = nodes.len();
            for (i, x) in nodes.iter().enumerate() {
                write!(w, "{:.17e},{x:.17e}", self.times[n])?;
                for c in 0..comps {
                    write!(w, ",{:.17e}", u[c * len + i])?;
                }
                writeln!(w)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_timing_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.timing)?)?;
        Ok(())
    }
}

fn nearest(times: &[f64], t: f64) -> usize {
    let mut best = 0;
    for (j, s) in times.iter().enumerate() {
        if (s - t).abs() < (times[best] - t).abs() {
            best = j;
        }
    }
    best
}

/// Inputs of one online run.
pub struct RunRequest<'a> {
    pub system: &'a OnlineSystem,
    pub basis: &'a dyn BasisProvider,
    pub strategy: &'a dyn RomStrategy,
    pub mu: &'a [f64],
    /// One set per component; must contain every time stamp of the run.
    pub reference: &'a [&'a SnapshotSet],
    pub param_index: usize,
    pub options: ProjectionOptions,
    pub keep_solutions: bool,
}

struct Reference<'a> {
    sets: &'a [&'a SnapshotSet],
    k: usize,
    index: Vec<usize>,
}

impl<'a> Reference<'a> {
    fn new(sets: &'a [&'a SnapshotSet], k: usize, times: &[f64]) -> Result<Self> {
        let first = sets.first().ok_or_else(|| Error::InvalidInput("missing reference trajectory".into()))?;
        if k >= first.n_params() {
            return Err(Error::InvalidInput(format!("reference parameter index {k} out of range")));
        }
        let ref_times = first.times();
        let mut index = Vec::with_capacity(times.len());
        let mut j = 0;
        for &t in times {
            let tol = 1e-9 * t.abs().max(1.0);
            while j < ref_times.len() && ref_times[j] < t - tol {
                j += 1;
            }
            if j == ref_times.len() || (ref_times[j] - t).abs() > tol {
                return Err(Error::InvalidInput(format!("reference has no snapshot at t = {t}")));
            }
            index.push(j);
        }
        Ok(Self { sets, k, index })
    }

    fn mesh(&self, n: usize) -> Result<Mesh1D> {
        Ok(self.sets[0].mesh(self.index[n]))
    }

    fn component(&self, c: usize, n: usize) -> &[f64] {
        self.sets[c].snapshot(self.k, self.index[n])
    }

    /// Stacked reference state interpolated onto `mesh` when the nodes differ.
    fn state_on(&self, n: usize, mesh: &Mesh1D) -> Result<Vec<f64>> {
        let ref_mesh = self.mesh(n)?;
        let mut out = Vec::with_capacity(self.sets.len() * mesh.len());
        for c in 0..self.sets.len() {
            let u = self.component(c, n);
            if ref_mesh.nodes() == mesh.nodes() {
                out.extend_from_slice(u);
            } else {
                out.extend(interpolate(&ref_mesh, u, mesh.nodes()));
            }
        }
        Ok(out)
    }
}

fn factor(blocks: Vec<DenseMatrix>, opts: &ProjectionOptions) -> Result<Projector> {
    Projector::new(
        blocks
            .into_iter()
            .map(|phi| ProjectedBasis::new(phi, opts.max_condition))
            .collect::<Result<Vec<_>>>()?,
    )
}

fn reconstruct_blocks(blocks: &[DenseMatrix], alpha: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut off = 0;
    for b in blocks {
        out.extend(b.matvec(&alpha[off..off + b.cols()]));
        off += b.cols();
    }
    out
}

/// Errors of every component at one step: `(l2 of component 0, relative per component)`.
fn step_errors(u: &[f64], mesh: &Mesh1D, reference: &Reference<'_>, n: usize) -> Result<(f64, Vec<f64>)> {
    let ref_mesh = reference.mesh(n)?;
    let len = mesh.len();
    let mut rel = Vec::with_capacity(reference.sets.len());
    let mut l2_first = 0.0;
    for c in 0..reference.sets.len() {
        let ur = &u[c * len..(c + 1) * len];
        let uf = reference.component(c, n);
        let (e, norm) = if ref_mesh.nodes() == mesh.nodes() {
            let w = mesh.widths();
            (l2_error(ur, uf, &w)?, l2_norm(uf, &w)?)
        } else {
            let fine = if ref_mesh.len() >= mesh.len() { &ref_mesh } else { mesh };
            let on_fine = if fine.len() == ref_mesh.len() {
                uf.to_vec()
            } else {
                interpolate(&ref_mesh, uf, fine.nodes())
            };
            (finer_mesh_error(ur, mesh, uf, &ref_mesh)?, l2_norm(&on_fine, &fine.widths())?)
        };
        if norm == 0.0 {
            return Err(Error::InvalidInput(format!(
                "relative error against a zero reference at step {n}"
            )));
        }
        if c == 0 {
            l2_first = e;
        }
        rel.push(e / norm);
    }
    Ok((l2_first, rel))
}

/// Runs the online stage over `system.times()`, starting from the L² projection of the reference at the first stamp.
pub fn run_rom(req: &RunRequest<'_>) -> Result<RomRunResult> {
    let start = Instant::now();
    let sys = req.system;
    let strategy = req.strategy;
    if !strategy.supports(sys.is_explicit()) {
        return Err(Error::Config(format!(
            "mode '{}' does not apply to {} systems",
            strategy.name(),
            if sys.is_explicit() { "explicit" } else { "implicit" }
        )));
    }
    if req.basis.components() != sys.components() || req.reference.len() != sys.components() {
        return Err(Error::dim("basis components", sys.components(), req.basis.components()));
    }
    let times = sys.times().to_vec();
    let reference = Reference::new(req.reference, req.param_index, &times)?;
    let opts = &req.options;
    let mut timing = TimingLedger::default();
    let reuse = req.basis.is_static() && !sys.is_moving();

    let mut mesh = sys.mesh(0)?;
    let clock = Instant::now();
    let mut blocks = req.basis.evaluate(mesh.nodes(), times[0], req.mu)?;
    let mut coeffs = if strategy.uses_learned_coefficients() {
        req.basis.coefficients(times[0], req.mu)?
    } else {
        None
    };
    timing.basis_eval_s += clock.elapsed().as_secs_f64();
    let clock = Instant::now();
    let mut projector = if strategy.needs_projection() {
        Some(factor(blocks.clone(), opts).map_err(|e| e.at_step(0, times[0]))?)
    } else {
        None
    };
    timing.projection_solve_s += clock.elapsed().as_secs_f64();
    timing.factor_s = timing.projection_solve_s;

    let mut alpha = match (&coeffs, &projector) {
        (Some(c), _) => c.clone(),
        (None, Some(p)) => p.least_squares(&reference.state_on(0, &mesh)?)?,
        (None, None) => return Err(Error::InvalidInput("no way to form the initial coefficients".into())),
    };
    let mut u = reconstruct_blocks(&blocks, &alpha);

    let mut out = RomRunResult {
        mode: strategy.name().to_string(),
        mu: req.mu.to_vec(),
        block_orders: req.basis.block_orders(),
        times: times.clone(),
        alphas: Vec::with_capacity(times.len()),
        solutions: Vec::new(),
        nodes: vec![mesh.nodes().to_vec()],
        l2_errors: Vec::with_capacity(times.len()),
        relative_errors: Vec::with_capacity(times.len()),
        component_relative: vec![Vec::with_capacity(times.len()); sys.components()],
        timing,
        max_condition: projector.as_ref().map_or(0.0, Projector::condition),
        iterations: vec![0],
    };
    let record = |out: &mut RomRunResult, n: usize, alpha: &[f64], u: &[f64], mesh: &Mesh1D| -> Result<()> {
        let (l2, rel) = step_errors(u, mesh, &reference, n)?;
        out.l2_errors.push(l2);
        out.relative_errors.push(rel[0]);
        for (c, r) in rel.into_iter().enumerate() {
            out.component_relative[c].push(r);
        }
        out.alphas.push(alpha.to_vec());
        if req.keep_solutions {
            out.solutions.push(u.to_vec());
        }
        Ok(())
    };
    record(&mut out, 0, &alpha, &u, &mesh)?;

    for n in 0..times.len() - 1 {
        let t_next = times[n + 1];
        let wrap = |e: Error| e.at_step(n + 1, t_next);
        let u_tr = sys.transfer(n, &u).map_err(wrap)?;
        let next_mesh = sys.mesh(n + 1)?;

        let (op, g_u) = match sys {
            OnlineSystem::Implicit(s) => (Some(s.operator(n + 1).map_err(wrap)?), None),
            OnlineSystem::Explicit(s) => (None, Some(s.update(n, &u_tr).map_err(wrap)?)),
        };
        let b = op.as_ref().map(|op| op.rhs(&u_tr));

        let clock = Instant::now();
        if !reuse {
            blocks = req.basis.evaluate(next_mesh.nodes(), t_next, req.mu).map_err(wrap)?;
        }
        if strategy.uses_learned_coefficients() {
            coeffs = req.basis.coefficients(t_next, req.mu)?;
        }
        out.timing.basis_eval_s += clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        if strategy.needs_projection() && !reuse {
            projector = Some(factor(blocks.clone(), opts).map_err(wrap)?);
        }
        let factor_s = clock.elapsed().as_secs_f64();
        let guess = match (&projector, &op) {
            (Some(p), Some(op)) if !op.is_linear() => p.least_squares(&u_tr).map_err(wrap)?,
            _ => alpha.clone(),
        };
        let ctx = StepContext {
            next: projector.as_ref(),
            implicit: match (&op, &b) {
                (Some(op), Some(b)) => Some((op.as_ref(), b.as_slice())),
                _ => None,
            },
            explicit_update: g_u.as_deref(),
            coefficients: coeffs.as_deref(),
            alpha_guess: &guess,
            options: opts,
        };
        let outcome = strategy.advance(&ctx).map_err(wrap)?;
        let total = clock.elapsed().as_secs_f64();
        out.timing.projection_solve_s += total;
        out.timing.factor_s += factor_s;
        out.timing.reduced_solve_s += total - factor_s;
        out.timing.linear_solve_s += outcome.solve_s;

        alpha = outcome.alpha;
        u = match &projector {
            Some(p) => p.reconstruct(&alpha),
            None => reconstruct_blocks(&blocks, &alpha),
        };
        if let Some(p) = &projector {
            out.max_condition = out.max_condition.max(p.condition());
        }
        out.iterations.push(outcome.iterations);
        mesh = next_mesh;
        if sys.is_moving() {
            out.nodes.push(mesh.nodes().to_vec());
        }
        record(&mut out, n + 1, &alpha, &u, &mesh).map_err(wrap)?;
    }
    out.timing.steps = times.len() - 1;
    out.timing.total_s = start.elapsed().as_secs_f64();
    Ok(out)
}
