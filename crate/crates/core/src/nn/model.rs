use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::mlp::Mlp;

/// `v ↦ (v − shift) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub shift: f64,
    pub scale: f64,
}

impl AffineMap {
    pub const IDENTITY: AffineMap = AffineMap {
        shift: 0.0,
        scale: 1.0,
    };

    /// Maps `[lo, hi]` onto `[0, 1]`; a degenerate range maps to `v − lo`.
    pub fn from_range(lo: f64, hi: f64) -> Self {
        let span = hi - lo;
        Self {
            shift: lo,
            scale: if span > 0.0 { span } else { 1.0 },
        }
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        (v - self.shift) / self.scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputNormalization {
    pub x: AffineMap,
    pub t: AffineMap,
    pub mu: Vec<AffineMap>,
}

impl InputNormalization {
    pub fn identity(mu_dim: usize) -> Self {
        Self {
            x: AffineMap::IDENTITY,
            t: AffineMap::IDENTITY,
            mu: vec![AffineMap::IDENTITY; mu_dim],
        }
    }

    pub fn from_ranges(x: (f64, f64), t: (f64, f64), mu: &[(f64, f64)]) -> Self {
        Self {
            x: AffineMap::from_range(x.0, x.1),
            t: AffineMap::from_range(t.0, t.1),
            mu: mu.iter().map(|&(lo, hi)| AffineMap::from_range(lo, hi)).collect(),
        }
    }

    pub fn mu_dim(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.x, self.t].into_iter().chain(self.mu.iter().copied());
        for m in all {
            if !(m.scale > 0.0 && m.scale.is_finite() && m.shift.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "normalization map must have finite shift and positive scale, got {m:?}"
                )));
            }
        }
        Ok(())
    }

    /// Writes the normalized `(t, μ…)` into `out`.
    pub fn coeff_input(&self, t: f64, mu: &[f64], out: &mut [f64]) {
        out[0] = self.t.apply(t);
        for ((o, m), v) in out[1..].iter_mut().zip(&self.mu).zip(mu) {
            *o = m.apply(*v);
        }
    }

    /// Writes the normalized `(x, t, μ…)` into `out`.
    pub fn basis_input(&self, x: f64, t: f64, mu: &[f64], out: &mut [f64]) {
        out[0] = self.x.apply(x);
        self.coeff_input(t, mu, &mut out[1..]);
    }
}

/// One coefficient/basis network pair of width `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetPair {
    pub coeff_net: Mlp,
    pub basis_net: Mlp,
}

impl NetPair {
    pub fn width(&self) -> usize {
        self.coeff_net.output_dim()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub basis_hidden: Vec<usize>,
    pub coeff_hidden: Vec<usize>,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            basis_hidden: vec![25; 4],
            coeff_hidden: vec![25; 3],
        }
    }
}

impl Architecture {
    pub fn init_pair(&self, r: usize, mu_dim: usize, seed: u64) -> Result<NetPair> {
        let mut cdims = vec![1 + mu_dim];
        cdims.extend(&self.coeff_hidden);
        cdims.push(r);
        let mut bdims = vec![2 + mu_dim];
        bdims.extend(&self.basis_hidden);
        bdims.push(r);
        Ok(NetPair {
            coeff_net: Mlp::init(&cdims, seed)?,
            basis_net: Mlp::init(&bdims, seed.wrapping_add(0x9E37_79B9_7F4A_7C15))?,
        })
    }
}

/// `u(x,t;μ) ≈ Σ_blocks α(t,μ)·φ(x,t,μ)`; a freshly built model has one block.
#[derive(Debug, Clone, PartialEq)]
pub struct LpModel {
    blocks: Vec<NetPair>,
    normalization: InputNormalization,
}

impl LpModel {
    pub fn new(arch: &Architecture, r: usize, normalization: InputNormalization, seed: u64) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidInput("reduced order must be at least 1".into()));
        }
        let pair = arch.init_pair(r, normalization.mu_dim(), seed)?;
        Self::from_blocks(vec![pair], normalization)
    }

    pub fn from_blocks(blocks: Vec<NetPair>, normalization: InputNormalization) -> Result<Self> {
        normalization.validate()?;
        if blocks.is_empty() {
            return Err(Error::InvalidInput("model needs at least one block".into()));
        }
        let d = normalization.mu_dim();
        for (i, b) in blocks.iter().enumerate() {
            if b.coeff_net.input_dim() != 1 + d {
                return Err(Error::dim(format!("block {i} coefficient net input"), 1 + d, b.coeff_net.input_dim()));
            }
            if b.basis_net.input_dim() != 2 + d {
                return Err(Error::dim(format!("block {i} basis net input"), 2 + d, b.basis_net.input_dim()));
            }
            if b.basis_net.output_dim() != b.coeff_net.output_dim() {
                return Err(Error::dim(
                    format!("block {i} basis net output"),
                    b.coeff_net.output_dim(),
                    b.basis_net.output_dim(),
                ));
            }
        }
        Ok(Self {
            blocks,
            normalization,
        })
    }

    pub fn reduced_order(&self) -> usize {
        self.blocks.iter().map(NetPair::width).sum()
    }

    pub fn mu_dim(&self) -> usize {
        self.normalization.mu_dim()
    }

    pub fn blocks(&self) -> &[NetPair] {
        &self.blocks
    }

    pub(crate) fn blocks_mut(&mut self) -> &mut [NetPair] {
        &mut self.blocks
    }

    pub(crate) fn push_block(&mut self, pair: NetPair) {
        self.blocks.push(pair);
    }

    pub fn normalization(&self) -> &InputNormalization {
        &self.normalization
    }

    fn check_mu(&self, mu: &[f64]) -> Result<()> {
        if mu.len() != self.mu_dim() {
            return Err(Error::dim("parameter vector", self.mu_dim(), mu.len()));
        }
        Ok(())
    }

    /// `α^NN(t, μ)`, concatenated over blocks.
    pub fn coefficients(&self, t: f64, mu: &[f64]) -> Result<Vec<f64>> {
        self.check_mu(mu)?;
        let mut input = vec![0.0; 1 + self.mu_dim()];
        self.normalization.coeff_input(t, mu, &mut input);
        let mut out = Vec::with_capacity(self.reduced_order());
        for b in &self.blocks {
            out.extend(b.coeff_net.forward(&input)?);
        }
        Ok(out)
    }

    /// Reusable evaluator for many basis points.
    pub fn basis_evaluator(&self) -> BasisEvaluator<'_> {
        BasisEvaluator {
            model: self,
            tapes: self.blocks.iter().map(|b| b.basis_net.tape()).collect(),
            input: vec![0.0; 2 + self.mu_dim()],
        }
    }

    /// `φ^NN(x, t, μ)`, concatenated over blocks.
    pub fn basis(&self, x: f64, t: f64, mu: &[f64]) -> Result<Vec<f64>> {
        self.check_mu(mu)?;
        let mut out = vec![0.0; self.reduced_order()];
        self.basis_evaluator().eval(x, t, mu, &mut out);
        Ok(out)
    }

    pub fn forward(&self, x: f64, t: f64, mu: &[f64]) -> Result<f64> {
        let a = self.coefficients(t, mu)?;
        let p = self.basis(x, t, mu)?;
        Ok(a.iter().zip(&p).map(|(a, p)| a * p).sum())
    }

    /// True when any normalized input leaves `[0, 1]`.
    pub fn is_extrapolating(&self, x: f64, t: f64, mu: &[f64]) -> bool {
        let n = &self.normalization;
        let outside = |v: f64| !(-1e-12..=1.0 + 1e-12).contains(&v);
        outside(n.x.apply(x)) || outside(n.t.apply(t)) || n.mu.iter().zip(mu).any(|(m, v)| outside(m.apply(*v)))
    }
}

pub struct BasisEvaluator<'a> {
    model: &'a LpModel,
    tapes: Vec<crate::nn::mlp::Tape>,
    input: Vec<f64>,
}

impl BasisEvaluator<'_> {
    /// `out` must have length `r`; `mu` length is not rechecked.
    pub fn eval(&mut self, x: f64, t: f64, mu: &[f64], out: &mut [f64]) {
        self.model.normalization.basis_input(x, t, mu, &mut self.input);
        let mut off = 0;
        for (b, tape) in self.model.blocks.iter().zip(&mut self.tapes) {
            let w = b.width();
            b.basis_net.forward_into(&self.input, tape, &mut out[off..off + w]);
            off += w;
        }
    }
}

/// `u_NN(x, t; μ) = α^NN(t,μ) · φ^NN(x,t,μ)`.
pub fn lp_forward(model: &LpModel, x: f64, t: f64, mu: &[f64]) -> Result<f64> {
    model.forward(x, t, mu)
}
