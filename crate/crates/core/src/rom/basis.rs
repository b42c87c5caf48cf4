use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::nn::LpModel;
use crate::pod::PodBasis;

/// Learned basis values at the nodes, `Φ(i, j) = φ_j(x_i, t, μ)`; columns are not orthonormal.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    pub phi: DenseMatrix,
    pub t: f64,
    pub mu: Vec<f64>,
}

pub fn evaluate_basis(model: &LpModel, nodes: &[f64], t: f64, mu: &[f64]) -> Result<BasisMatrix> {
    if mu.len() != model.mu_dim() {
        return Err(Error::dim("parameter vector", model.mu_dim(), mu.len()));
    }
    if let Some(x) = nodes.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite node {x}")));
    }
    let r = model.reduced_order();
    let mut phi = DenseMatrix::zeros(nodes.len(), r);
    let mut eval = model.basis_evaluator();
    for (i, &x) in nodes.iter().enumerate() {
        eval.eval(x, t, mu, phi.row_mut(i));
    }
    Ok(BasisMatrix {
        phi,
        t,
        mu: mu.to_vec(),
    })
}

/// `Φ(t, μ) α^NN(t, μ)`.
pub fn predict_learning(model: &LpModel, nodes: &[f64], t: f64, mu: &[f64]) -> Result<Vec<f64>> {
    let b = evaluate_basis(model, nodes, t, mu)?;
    Ok(b.phi.matvec(&model.coefficients(t, mu)?))
}

/// Per basis function, `√(Σ_i (φ(x_i, t) − φ(x_i − c t, 0))² w_i)` with the widths of `nodes` as weights.
pub fn basis_shift_deviation(model: &LpModel, wave_speed: f64, t: f64, nodes: &[f64], mu: &[f64]) -> Result<Vec<f64>> {
    let now = evaluate_basis(model, nodes, t, mu)?.phi;
    let shifted: Vec<f64> = nodes.iter().map(|x| x - wave_speed * t).collect();
    let then = evaluate_basis(model, &shifted, 0.0, mu)?.phi;
    let w = node_weights(nodes);
    Ok((0..now.cols())
        .map(|k| {
            (0..now.rows())
                .map(|i| (now[(i, k)] - then[(i, k)]).powi(2) * w[i])
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}

/// Control-volume widths of an increasing node list.
pub(crate) fn node_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    if n < 2 {
        return vec![1.0; n];
    }
    (0..n)
        .map(|i| match i {
            0 => nodes[1] - nodes[0],
            _ if i == n - 1 => nodes[n - 1] - nodes[n - 2],
            _ => 0.5 * (nodes[i + 1] - nodes[i - 1]),
        })
        .collect()
}

/// Source of the reduced basis at `(t, μ)`, one block per conserved variable.
pub trait BasisProvider: Sync {
    fn components(&self) -> usize {
        1
    }
    /// Order of each block.
    fn block_orders(&self) -> Vec<usize>;
    fn evaluate(&self, nodes: &[f64], t: f64, mu: &[f64]) -> Result<Vec<DenseMatrix>>;
    /// Basis independent of `(t, μ)`.
    fn is_static(&self) -> bool;
    /// Learned coefficients `α^NN`, concatenated over blocks; `None` without a coefficient model.
    fn coefficients(&self, t: f64, mu: &[f64]) -> Result<Option<Vec<f64>>>;
    fn order(&self) -> usize {
        self.block_orders().iter().sum()
    }
}

impl BasisProvider for LpModel {
    fn block_orders(&self) -> Vec<usize> {
        vec![self.reduced_order()]
    }

    fn evaluate(&self, nodes: &[f64], t: f64, mu: &[f64]) -> Result<Vec<DenseMatrix>> {
        Ok(vec![evaluate_basis(self, nodes, t, mu)?.phi])
    }

    fn is_static(&self) -> bool {
        false
    }

    fn coefficients(&self, t: f64, mu: &[f64]) -> Result<Option<Vec<f64>>> {
        LpModel::coefficients(self, t, mu).map(Some)
    }
}

impl BasisProvider for PodBasis {
    fn block_orders(&self) -> Vec<usize> {
        vec![self.order()]
    }

    fn evaluate(&self, nodes: &[f64], _t: f64, _mu: &[f64]) -> Result<Vec<DenseMatrix>> {
        if nodes != self.nodes.as_slice() {
            return Err(Error::InvalidInput("POD basis is tied to its training mesh".into()));
        }
        Ok(vec![self.phi.clone()])
    }

    fn is_static(&self) -> bool {
        true
    }

    fn coefficients(&self, _t: f64, _mu: &[f64]) -> Result<Option<Vec<f64>>> {
        Ok(None)
    }
}

/// Independent bases for the components of a system, projected block-diagonally.
pub struct SystemBasis<B> {
    pub blocks: Vec<B>,
}

impl<B: BasisProvider> BasisProvider for SystemBasis<B> {
    fn components(&self) -> usize {
        self.blocks.len()
    }

    fn block_orders(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.order()).collect()
    }

    fn evaluate(&self, nodes: &[f64], t: f64, mu: &[f64]) -> Result<Vec<DenseMatrix>> {
        let mut out = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            out.extend(b.evaluate(nodes, t, mu)?);
        }
        Ok(out)
    }

    fn is_static(&self) -> bool {
        self.blocks.iter().all(|b| b.is_static())
    }

    fn coefficients(&self, t: f64, mu: &[f64]) -> Result<Option<Vec<f64>>> {
        let mut out = Vec::new();
        for b in &self.blocks {
            match b.coefficients(t, mu)? {
                Some(c) => out.extend(c),
                None => return Ok(None),
            }
        }
        Ok(Some(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Architecture, InputNormalization};

    fn model(r: usize) -> LpModel {
        let arch = Architecture {
            basis_hidden: vec![6, 6],
            coeff_hidden: vec![5],
        };
        LpModel::new(&arch, r, InputNormalization::from_ranges((0.0, 5.0), (0.0, 1.0), &[]), 7).unwrap()
    }

    #[test]
    fn shape_and_subset_rows() {
        let m = model(3);
        let nodes: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let b = evaluate_basis(&m, &nodes, 0.3, &[]).unwrap();
        assert_eq!((b.phi.rows(), b.phi.cols()), (11, 3));
        let sub = evaluate_basis(&m, &[nodes[2], nodes[7]], 0.3, &[]).unwrap();
        assert_eq!(sub.phi.row(0), b.phi.row(2));
        assert_eq!(sub.phi.row(1), b.phi.row(7));
        assert_eq!(evaluate_basis(&m, &nodes, 0.3, &[]).unwrap(), b);
        assert!(evaluate_basis(&m, &nodes, 0.3, &[1.0]).is_err());
    }

    #[test]
    fn learning_prediction_is_basis_times_coefficients() {
        let m = model(1);
        let nodes = [0.0, 1.0, 2.5];
        let b = evaluate_basis(&m, &nodes, 0.5, &[]).unwrap();
        let c = m.coefficients(0.5, &[]).unwrap();
        let p = predict_learning(&m, &nodes, 0.5, &[]).unwrap();
        for i in 0..3 {
            assert_eq!(p[i], b.phi[(i, 0)] * c[0]);
            assert!((p[i] - m.forward(nodes[i], 0.5, &[]).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn shift_deviation_zero_at_start() {
        let m = model(3);
        let nodes: Vec<f64> = (0..=50).map(|i| i as f64 * 0.1).collect();
        assert!(basis_shift_deviation(&m, 1.0, 0.0, &nodes, &[]).unwrap().iter().all(|&d| d == 0.0));
        assert!(basis_shift_deviation(&m, 1.0, 0.5, &nodes, &[]).unwrap().iter().any(|&d| d > 0.0));
    }
}
