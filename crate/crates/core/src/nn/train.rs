use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::adam::{adam_step, AdamState};
use crate::nn::mlp::Tape;
use crate::nn::model::{Architecture, InputNormalization, LpModel, NetPair};

/// Samples per parallel gradient chunk; fixed so the reduction order never depends on thread count.
const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// 0 means full batch.
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            lr: 1e-3,
            batch_size: 512,
            seed: 0,
            shuffle: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_loss: f64,
    /// Mean of the minibatch losses seen during each epoch.
    pub epoch_losses: Vec<f64>,
    pub final_loss: f64,
}

/// Training points with inputs already normalized.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    mu_dim: usize,
    basis_inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl TrainingSet {
    pub fn new(mu_dim: usize) -> Self {
        Self {
            mu_dim,
            ..Self::default()
        }
    }

    pub fn with_capacity(mu_dim: usize, n: usize) -> Self {
        Self {
            mu_dim,
            basis_inputs: Vec::with_capacity(n * (2 + mu_dim)),
            targets: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, norm: &InputNormalization, x: f64, t: f64, mu: &[f64], u: f64) {
        let w = 2 + self.mu_dim;
        let start = self.basis_inputs.len();
        self.basis_inputs.resize(start + w, 0.0);
        norm.basis_input(x, t, mu, &mut self.basis_inputs[start..]);
        self.targets.push(u);
    }

    pub fn from_samples(norm: &InputNormalization, samples: &[Sample]) -> Result<Self> {
        let mut set = Self::with_capacity(norm.mu_dim(), samples.len());
        for s in samples {
            if s.mu.len() != norm.mu_dim() {
                return Err(Error::dim("sample parameter vector", norm.mu_dim(), s.mu.len()));
            }
            set.push(norm, s.x, s.t, &s.mu, s.u);
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn mu_dim(&self) -> usize {
        self.mu_dim
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    fn basis_input(&self, i: usize) -> &[f64] {
        let w = 2 + self.mu_dim;
        &self.basis_inputs[i * w..(i + 1) * w]
    }

    fn with_targets(&self, targets: Vec<f64>) -> Self {
        Self {
            mu_dim: self.mu_dim,
            basis_inputs: self.basis_inputs.clone(),
            targets,
        }
    }
}

/// One unnormalized training point.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: f64,
    pub t: f64,
    pub mu: Vec<f64>,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient {
    pub coeff: Vec<f64>,
    pub basis: Vec<f64>,
}

impl PairGradient {
    fn zeros(pair: &NetPair) -> Self {
        Self {
            coeff: vec![0.0; pair.coeff_net.num_params()],
            basis: vec![0.0; pair.basis_net.num_params()],
        }
    }

    fn add(&mut self, other: &PairGradient) {
        for (a, b) in self.coeff.iter_mut().zip(&other.coeff) {
            *a += b;
        }
        for (a, b) in self.basis.iter_mut().zip(&other.basis) {
            *a += b;
        }
    }

    fn scale(&mut self, s: f64) {
        self.coeff.iter_mut().chain(self.basis.iter_mut()).for_each(|v| *v *= s);
    }

    pub fn norm(&self) -> f64 {
        self.coeff.iter().chain(&self.basis).map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Gradients of the batch-mean squared error, one entry per model block.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    pub blocks: Vec<PairGradient>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm().powi(2)).sum::<f64>().sqrt()
    }
}

struct Workspace {
    coeff_tapes: Vec<Tape>,
    basis_tapes: Vec<Tape>,
    alpha: Vec<Vec<f64>>,
    phi: Vec<Vec<f64>>,
    dout: Vec<f64>,
}

impl Workspace {
    fn new(pairs: &[NetPair]) -> Self {
        Self {
            coeff_tapes: pairs.iter().map(|p| p.coeff_net.tape()).collect(),
            basis_tapes: pairs.iter().map(|p| p.basis_net.tape()).collect(),
            alpha: pairs.iter().map(|p| vec![0.0; p.width()]).collect(),
            phi: pairs.iter().map(|p| vec![0.0; p.width()]).collect(),
            dout: vec![0.0; pairs.iter().map(NetPair::width).max().unwrap_or(0)],
        }
    }
}

/// Sum of squared errors over `idx`, with per-pair gradients of that sum when requested.
fn chunk_pass(
    pairs: &[NetPair],
    data: &TrainingSet,
    idx: &[usize],
    want_grad: bool,
) -> (f64, Vec<PairGradient>) {
    let mut ws = Workspace::new(pairs);
    let mut grads: Vec<PairGradient> = if want_grad {
        pairs.iter().map(PairGradient::zeros).collect()
    } else {
        Vec::new()
    };
    let mut loss = 0.0;
    for &i in idx {
        let binput = data.basis_input(i);
        let cinput = &binput[1..];
        let mut u = 0.0;
        for (b, p) in pairs.iter().enumerate() {
            p.coeff_net.forward_into(cinput, &mut ws.coeff_tapes[b], &mut ws.alpha[b]);
            p.basis_net.forward_into(binput, &mut ws.basis_tapes[b], &mut ws.phi[b]);
            u += ws.alpha[b].iter().zip(&ws.phi[b]).map(|(a, f)| a * f).sum::<f64>();
        }
        let e = u - data.targets[i];
        loss += e * e;
        if want_grad {
            let g = 2.0 * e;
            for (b, p) in pairs.iter().enumerate() {
                let w = p.width();
                for k in 0..w {
                    ws.dout[k] = g * ws.phi[b][k];
                }
                p.coeff_net.backward(&mut ws.coeff_tapes[b], &ws.dout[..w], &mut grads[b].coeff);
                for k in 0..w {
                    ws.dout[k] = g * ws.alpha[b][k];
                }
                p.basis_net.backward(&mut ws.basis_tapes[b], &ws.dout[..w], &mut grads[b].basis);
            }
        }
    }
    (loss, grads)
}

fn batch_pass(pairs: &[NetPair], data: &TrainingSet, idx: &[usize], want_grad: bool) -> (f64, Vec<PairGradient>) {
    let partials: Vec<(f64, Vec<PairGradient>)> = idx
        .par_chunks(CHUNK)
        .map(|c| chunk_pass(pairs, data, c, want_grad))
        .collect();
    let mut loss = 0.0;
    let mut total: Vec<PairGradient> = if want_grad {
        pairs.iter().map(PairGradient::zeros).collect()
    } else {
        Vec::new()
    };
    for (l, g) in &partials {
        loss += l;
        for (t, p) in total.iter_mut().zip(g) {
            t.add(p);
        }
    }
    (loss, total)
}

fn mean_loss(pairs: &[NetPair], data: &TrainingSet) -> f64 {
    let idx: Vec<usize> = (0..data.len()).collect();
    batch_pass(pairs, data, &idx, false).0 / data.len() as f64
}

/// Mean squared error of the model over a training set.
pub fn evaluate_loss(model: &LpModel, data: &TrainingSet) -> Result<f64> {
    check_data(model, data)?;
    Ok(mean_loss(model.blocks(), data))
}

fn check_data(model: &LpModel, data: &TrainingSet) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    if data.mu_dim() != model.mu_dim() {
        return Err(Error::dim("training set parameter dimension", model.mu_dim(), data.mu_dim()));
    }
    Ok(())
}

/// Gradients of the batch-mean squared error with respect to every parameter of every block.
pub fn backprop(model: &LpModel, batch: &[Sample]) -> Result<Gradients> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("batch is empty".into()));
    }
    let data = TrainingSet::from_samples(model.normalization(), batch)?;
    let idx: Vec<usize> = (0..data.len()).collect();
    let (loss, mut blocks) = batch_pass(model.blocks(), &data, &idx, true);
    let inv = 1.0 / data.len() as f64;
    blocks.iter_mut().for_each(|g| g.scale(inv));
    Ok(Gradients {
        loss: loss * inv,
        blocks,
    })
}

fn run_adam(pairs: &mut [NetPair], data: &TrainingSet, cfg: &TrainConfig) -> Result<TrainReport> {
    let n = data.len();
    let bs = if cfg.batch_size == 0 || cfg.batch_size > n {
        n
    } else {
        cfg.batch_size
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut states: Vec<(AdamState, AdamState)> = pairs
        .iter()
        .map(|p| {
            (
                AdamState::new(p.coeff_net.num_params()),
                AdamState::new(p.basis_net.num_params()),
            )
        })
        .collect();
    let initial_loss = mean_loss(pairs, data);
    if !initial_loss.is_finite() {
        return Err(Error::TrainingDiverged { epoch: 0, batch: 0 });
    }
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut sum = 0.0;
        for (bi, batch) in order.chunks(bs).enumerate() {
            let (loss, mut grads) = batch_pass(pairs, data, batch, true);
            if !loss.is_finite() || grads.iter().any(|g| !g.norm().is_finite()) {
                return Err(Error::TrainingDiverged { epoch, batch: bi });
            }
            sum += loss;
            let inv = 1.0 / batch.len() as f64;
            for ((p, g), (sc, sb)) in pairs.iter_mut().zip(&mut grads).zip(&mut states) {
                g.scale(inv);
                adam_step(p.coeff_net.params_mut(), &g.coeff, sc, cfg.lr);
                adam_step(p.basis_net.params_mut(), &g.basis, sb, cfg.lr);
            }
        }
        let mean = sum / n as f64;
        log::debug!("epoch {epoch}: loss {mean:.6e}");
        epoch_losses.push(mean);
    }
    let final_loss = mean_loss(pairs, data);
    if !final_loss.is_finite() {
        return Err(Error::TrainingDiverged {
            epoch: cfg.epochs,
            batch: 0,
        });
    }
    Ok(TrainReport {
        initial_loss,
        epoch_losses,
        final_loss,
    })
}

/// Minibatch Adam on the mean-square snapshot loss over all blocks of `model`.
pub fn train_offline(model: &mut LpModel, data: &TrainingSet, cfg: &TrainConfig) -> Result<TrainReport> {
    check_data(model, data)?;
    run_adam(model.blocks_mut(), data, cfg)
}

/// Freezes `base` and fits a new pair of width `delta_r` to the residual `u − u_base`.
pub fn train_block_incremental(
    base: &LpModel,
    delta_r: usize,
    arch: &Architecture,
    data: &TrainingSet,
    cfg: &TrainConfig,
) -> Result<(LpModel, TrainReport)> {
    check_data(base, data)?;
    let base_loss = mean_loss(base.blocks(), data);
    if delta_r == 0 {
        return Ok((
            base.clone(),
            TrainReport {
                initial_loss: base_loss,
                epoch_losses: Vec::new(),
                final_loss: base_loss,
            },
        ));
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    let offsets: Vec<f64> = idx
        .par_chunks(CHUNK)
        .flat_map_iter(|c| {
            let mut ws = Workspace::new(base.blocks());
            c.iter()
                .map(|&i| {
                    let binput = data.basis_input(i);
                    let mut u = 0.0;
                    for (b, p) in base.blocks().iter().enumerate() {
                        p.coeff_net.forward_into(&binput[1..], &mut ws.coeff_tapes[b], &mut ws.alpha[b]);
                        p.basis_net.forward_into(binput, &mut ws.basis_tapes[b], &mut ws.phi[b]);
                        u += ws.alpha[b].iter().zip(&ws.phi[b]).map(|(a, f)| a * f).sum::<f64>();
                    }
                    u
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let residual: Vec<f64> = data.targets.iter().zip(&offsets).map(|(u, o)| u - o).collect();
    let residual_set = data.with_targets(residual);
    let mut pair = [arch.init_pair(delta_r, base.mu_dim(), cfg.seed.wrapping_add(base.blocks().len() as u64 * 7919))?];
    // start the new block at zero contribution so the combined loss starts at the base loss
    {
        let (w, b) = pair[0].coeff_net.layer_mut(pair[0].coeff_net.layer_dims().len() - 2);
        let r = b.len() as f64;
        w.iter_mut().for_each(|v| *v = 0.0);
        b.iter_mut().for_each(|v| *v = -1.0 / r);
    }
    let report = run_adam(&mut pair, &residual_set, cfg)?;
    let [pair] = pair;
    let mut model = base.clone();
    model.push_block(pair);
    Ok((model, report))
}
