use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Fully connected network: `tanh` hidden layers and a `softmax(W h) + b` output layer.
///
/// Parameters live in one flat buffer; layer `l` stores its `dims[l+1] × dims[l]`
/// row-major weights followed by `dims[l+1]` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    params: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LayerView {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: usize,
    pub biases: usize,
}

fn layer_views(dims: &[usize]) -> Vec<LayerView> {
    let mut off = 0;
    dims.windows(2)
        .map(|w| {
            let v = LayerView {
                inputs: w[0],
                outputs: w[1],
                weights: off,
                biases: off + w[0] * w[1],
            };
            off += w[0] * w[1] + w[1];
            v
        })
        .collect()
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Per-sample activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// `acts[0]` is the input; `acts[l]` the output of layer `l` (softmax part for the last).
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    upstream: Vec<f64>,
}

impl Mlp {
    /// Glorot-uniform weights from a seeded ChaCha stream, zero biases.
    pub fn init(layer_dims: &[usize], seed: u64) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidInput(format!(
                "layer dims must have at least two nonzero entries, got {layer_dims:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; param_count(layer_dims)];
        for view in layer_views(layer_dims) {
            let limit = (6.0 / (view.inputs + view.outputs) as f64).sqrt();
            for w in &mut params[view.weights..view.biases] {
                *w = rng.gen_range(-limit..limit);
            }
        }
        Ok(Self {
            dims: layer_dims.to_vec(),
            params,
        })
    }

    pub fn from_parts(layer_dims: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidInput(format!("bad layer dims {layer_dims:?}")));
        }
        let expected = param_count(&layer_dims);
        if params.len() != expected {
            return Err(Error::dim("Mlp parameters", expected, params.len()));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("non-finite network parameter".into()));
        }
        Ok(Self {
            dims: layer_dims,
            params,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("nonempty dims")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub(crate) fn views(&self) -> Vec<LayerView> {
        layer_views(&self.dims)
    }

    /// Weights and biases of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let v = self.views()[l];
        (
            &self.params[v.weights..v.biases],
            &self.params[v.biases..v.biases + v.outputs],
        )
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let v = self.views()[l];
        let (w, rest) = self.params[v.weights..].split_at_mut(v.inputs * v.outputs);
        (w, &mut rest[..v.outputs])
    }

    pub fn tape(&self) -> Tape {
        Tape {
            acts: self.dims.iter().map(|&d| vec![0.0; d]).collect(),
            delta: vec![0.0; *self.dims.iter().max().unwrap()],
            upstream: vec![0.0; *self.dims.iter().max().unwrap()],
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::dim("Mlp::forward input", self.input_dim(), input.len()));
        }
        let mut tape = self.tape();
        let mut out = vec![0.0; self.output_dim()];
        self.forward_into(input, &mut tape, &mut out);
        Ok(out)
    }

    /// Forward pass recording activations; `out` receives `softmax(W h) + b`.
    pub fn forward_into(&self, input: &[f64], tape: &mut Tape, out: &mut [f64]) {
        let views = self.views();
        let last = views.len() - 1;
        tape.acts[0].copy_from_slice(input);
        for (l, v) in views.iter().enumerate() {
            let (prev, next) = tape.acts.split_at_mut(l + 1);
            let a = &prev[l];
            let z = &mut next[0];
            let w = &self.params[v.weights..v.biases];
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &w[o * v.inputs..(o + 1) * v.inputs];
                let mut s = 0.0;
                for (wi, ai) in row.iter().zip(a.iter()) {
                    s += wi * ai;
                }
                *zo = s;
            }
            if l < last {
                let b = &self.params[v.biases..v.biases + v.outputs];
                for (zo, bo) in z.iter_mut().zip(b) {
                    *zo = (*zo + bo).tanh();
                }
            } else {
                softmax_in_place(z);
            }
        }
        let v = views[last];
        let b = &self.params[v.biases..v.biases + v.outputs];
        for ((o, s), bo) in out.iter_mut().zip(&tape.acts[last + 1]).zip(b) {
            *o = s + bo;
        }
    }

    /// Accumulates `∂L/∂θ` into `grad` given `∂L/∂y` for the sample recorded in `tape`.
    pub fn backward(&self, tape: &mut Tape, dloss_dout: &[f64], grad: &mut [f64]) {
        let views = self.views();
        let last = views.len() - 1;
        let Tape {
            acts,
            delta,
            upstream,
        } = tape;

        // output layer: y = s + b, s = softmax(z)
        let v = views[last];
        let s = &acts[last + 1];
        for (gb, g) in grad[v.biases..v.biases + v.outputs].iter_mut().zip(dloss_dout) {
            *gb += g;
        }
        let sg: f64 = s.iter().zip(dloss_dout).map(|(a, b)| a * b).sum();
        for o in 0..v.outputs {
            delta[o] = s[o] * (dloss_dout[o] - sg);
        }

        for l in (0..=last).rev() {
            let v = views[l];
            let a_prev = &acts[l];
            if l < last {
                // delta currently holds ∂L/∂a_l; convert to ∂L/∂z_l
                let a = &acts[l + 1];
                for o in 0..v.outputs {
                    delta[o] *= 1.0 - a[o] * a[o];
                }
                for (gb, d) in grad[v.biases..v.biases + v.outputs]
                    .iter_mut()
                    .zip(&delta[..v.outputs])
                {
                    *gb += d;
                }
            }
            let gw = &mut grad[v.weights..v.biases];
            for o in 0..v.outputs {
                let d = delta[o];
                if d != 0.0 {
                    for (g, ai) in gw[o * v.inputs..(o + 1) * v.inputs].iter_mut().zip(a_prev) {
                        *g += d * ai;
                    }
                }
            }
            if l > 0 {
                let w = &self.params[v.weights..v.biases];
                let up = &mut upstream[..v.inputs];
                up.iter_mut().for_each(|u| *u = 0.0);
                for o in 0..v.outputs {
                    let d = delta[o];
                    if d != 0.0 {
                        for (u, wi) in up.iter_mut().zip(&w[o * v.inputs..(o + 1) * v.inputs]) {
                            *u += d * wi;
                        }
                    }
                }
                delta[..v.inputs].copy_from_slice(up);
            }
        }
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}
