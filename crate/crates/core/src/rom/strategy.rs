use std::time::Instant;

use crate::error::{Error, Result};
use crate::fom::implicit::ImplicitOperator;
use crate::rom::projection::{ProjectedBasis, ProjectionOptions, StepOutcome};

/// Which basis source a strategy expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Learned,
    Pod,
}

/// Block-diagonal collection of factored bases, one per component.
#[derive(Debug, Clone)]
pub struct Projector {
    blocks: Vec<ProjectedBasis>,
}

impl Projector {
    pub fn new(blocks: Vec<ProjectedBasis>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidInput("projector needs at least one block".into()));
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[ProjectedBasis] {
        &self.blocks
    }

    pub fn single(&self) -> Result<&ProjectedBasis> {
        match self.blocks.as_slice() {
            [b] => Ok(b),
            _ => Err(Error::InvalidInput(
                "implicit projection is defined for scalar laws only".into(),
            )),
        }
    }

    pub fn condition(&self) -> f64 {
        self.blocks.iter().map(ProjectedBasis::condition).fold(0.0, f64::max)
    }

    pub fn reconstruct(&self, alpha: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        let mut off = 0;
        for b in &self.blocks {
            out.extend(b.reconstruct(&alpha[off..off + b.order()]));
            off += b.order();
        }
        out
    }

    /// Blockwise L² projection of a stacked state.
    pub fn least_squares(&self, u: &[f64]) -> Result<Vec<f64>> {
        let total: usize = self.blocks.iter().map(ProjectedBasis::rows).sum();
        if u.len() != total {
            return Err(Error::dim("stacked state", total, u.len()));
        }
        let mut out = Vec::new();
        let mut off = 0;
        for b in &self.blocks {
            out.extend(b.least_squares(&u[off..off + b.rows()])?);
            off += b.rows();
        }
        Ok(out)
    }

    fn explicit(&self, g_u: &[f64]) -> Result<StepOutcome> {
        let clock = Instant::now();
        let alpha = self.least_squares(g_u)?;
        let solve_s = clock.elapsed().as_secs_f64();
        let rec = self.reconstruct(&alpha);
        let residual = rec.iter().zip(g_u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        Ok(StepOutcome {
            alpha,
            iterations: 0,
            residual,
            solve_s,
        })
    }
}

/// Everything one online step may use.
pub struct StepContext<'a> {
    /// Factored basis at `t_{n+1}`; absent for strategies that skip projection.
    pub next: Option<&'a Projector>,
    /// Implicit operator and right-hand side `b^n` built from the transferred reduced state.
    pub implicit: Option<(&'a ImplicitOperator, &'a [f64])>,
    /// Full-order explicit update `G(u_r^n)`.
    pub explicit_update: Option<&'a [f64]>,
    /// Learned coefficients at `t_{n+1}`.
    pub coefficients: Option<&'a [f64]>,
    pub alpha_guess: &'a [f64],
    pub options: &'a ProjectionOptions,
}

impl StepContext<'_> {
    fn projector(&self) -> Result<&Projector> {
        self.next.ok_or_else(|| Error::InvalidInput("strategy needs a factored basis".into()))
    }

    fn implicit(&self) -> Result<(&ImplicitOperator, &[f64])> {
        self.implicit
            .ok_or_else(|| Error::InvalidInput("strategy needs an implicit full-order operator".into()))
    }

    fn explicit_update(&self) -> Result<&[f64]> {
        self.explicit_update
            .ok_or_else(|| Error::InvalidInput("strategy needs an explicit full-order update".into()))
    }
}

/// One way of advancing the reduced coefficients, selected by name at run time.
pub trait RomStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn basis_kind(&self) -> BasisKind;
    /// Implicit-only, explicit-only, or either.
    fn supports(&self, explicit_system: bool) -> bool;
    fn needs_projection(&self) -> bool {
        true
    }
    fn uses_learned_coefficients(&self) -> bool {
        false
    }
    fn advance(&self, ctx: &StepContext<'_>) -> Result<StepOutcome>;
}

struct Galerkin;
struct MinRes;
struct Explicit;
struct Pod;
struct Learning;

impl RomStrategy for Galerkin {
    fn name(&self) -> &'static str {
        "lp-galerkin"
    }
    fn basis_kind(&self) -> BasisKind {
        BasisKind::Learned
    }
    fn supports(&self, explicit_system: bool) -> bool {
        !explicit_system
    }
    fn advance(&self, ctx: &StepContext<'_>) -> Result<StepOutcome> {
        let (op, b) = ctx.implicit()?;
        ctx.projector()?.single()?.galerkin(op, b, ctx.alpha_guess, ctx.options)
    }
}

impl RomStrategy for MinRes {
    fn name(&self) -> &'static str {
        "lp-minres"
    }
    fn basis_kind(&self) -> BasisKind {
        BasisKind::Learned
    }
    fn supports(&self, explicit_system: bool) -> bool {
        !explicit_system
    }
    fn advance(&self, ctx: &StepContext<'_>) -> Result<StepOutcome> {
        let (op, b) = ctx.implicit()?;
        ctx.projector()?.single()?.minres(op, b, ctx.alpha_guess, ctx.options)
    }
}

impl RomStrategy for Explicit {
    fn name(&self) -> &'static str {
        "lp-explicit"
    }
    fn basis_kind(&self) -> BasisKind {
        BasisKind::Learned
    }
    fn supports(&self, explicit_system: bool) -> bool {
        explicit_system
    }
    fn advance(&self, ctx: &StepContext<'_>) -> Result<StepOutcome> {
        ctx.projector()?.explicit(ctx.explicit_update()?)
    }
}

impl RomStrategy for Pod {
    fn name(&self) -> &'static str {
        "pod"
    }
    fn basis_kind(&self) -> BasisKind {
        BasisKind::Pod
    }
    fn supports(&self, _explicit_system: bool) -> bool {
        true
    }
    fn advance(&self, ctx: &StepContext<'_>) -> Result<StepOutcome> {
        let p = ctx.projector()?;
        match (ctx.implicit, ctx.explicit_update) {
            (Some((op, b)), _) => p.single()?.galerkin(op, b, ctx.alpha_guess, ctx.options),
            (None, Some(g)) => p.explicit(g),
            (None, None) => Err(Error::InvalidInput("POD step needs a full-order operator".into())),
        }
    }
}

impl RomStrategy for Learning {
    fn name(&self) -> &'static str {
        "learning"
    }
    fn basis_kind(&self) -> BasisKind {
        BasisKind::Learned
    }
    fn supports(&self, _explicit_system: bool) -> bool {
        true
    }
    fn needs_projection(&self) -> bool {
        false
    }
    fn uses_learned_coefficients(&self) -> bool {
        true
    }
    fn advance(&self, ctx: &StepContext<'_>) -> Result<StepOutcome> {
        let c = ctx
            .coefficients
            .ok_or_else(|| Error::InvalidInput("learning mode needs a coefficient network".into()))?;
        Ok(StepOutcome {
            alpha: c.to_vec(),
            iterations: 0,
            residual: 0.0,
            solve_s: 0.0,
        })
    }
}

/// Named strategies.
pub struct StrategyRegistry {
    entries: Vec<Box<dyn RomStrategy>>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Galerkin));
        r.register(Box::new(MinRes));
        r.register(Box::new(Explicit));
        r.register(Box::new(Pod));
        r.register(Box::new(Learning));
        r
    }

    /// Replaces any entry with the same name.
    pub fn register(&mut self, s: Box<dyn RomStrategy>) {
        self.entries.retain(|e| e.name() != s.name());
        self.entries.push(s);
    }

    pub fn get(&self, name: &str) -> Result<&dyn RomStrategy> {
        self.entries
            .iter()
            .find(|e| e.name() == name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::Config(format!("unknown ROM mode '{name}', known: {}", self.names().join(", "))))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::standard()
    }
}
