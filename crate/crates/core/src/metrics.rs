//! Error norms, window-averaged relative errors and singular spectra.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fom::mesh::{interpolate, Mesh1D};
use crate::linalg::thin_svd;
use crate::pod::SnapshotMatrix;

/// `√(Σ_j (a_j − b_j)² w_j)`.
pub fn l2_error(u_red: &[f64], u_full: &[f64], weights: &[f64]) -> Result<f64> {
    if u_red.len() != u_full.len() {
        return Err(Error::dim("l2_error operands", u_full.len(), u_red.len()));
    }
    if weights.len() != u_full.len() {
        return Err(Error::dim("l2_error weights", u_full.len(), weights.len()));
    }
    Ok(u_red
        .iter()
        .zip(u_full)
        .zip(weights)
        .map(|((a, b), w)| (a - b) * (a - b) * w)
        .sum::<f64>()
        .sqrt())
}

pub fn l2_norm(u: &[f64], weights: &[f64]) -> Result<f64> {
    if weights.len() != u.len() {
        return Err(Error::dim("l2_norm weights", u.len(), weights.len()));
    }
    Ok(u.iter().zip(weights).map(|(a, w)| a * a * w).sum::<f64>().sqrt())
}

/// `E_L2 / ‖u_full‖`; a zero reference is an error.
pub fn relative_error(u_red: &[f64], u_full: &[f64], weights: &[f64]) -> Result<f64> {
    let e = l2_error(u_red, u_full, weights)?;
    let n = l2_norm(u_full, weights)?;
    if n == 0.0 {
        return Err(Error::InvalidInput("relative error against a zero reference".into()));
    }
    Ok(e / n)
}

/// Mean over parameters of the maximum relative error inside the inclusive index window.
pub fn average_relative_error(histories: &[Vec<f64>], window: (usize, usize)) -> Result<f64> {
    if histories.is_empty() {
        return Err(Error::InvalidInput("no error histories".into()));
    }
    let (n0, n1) = window;
    if n0 > n1 {
        return Err(Error::InvalidInput(format!("empty window [{n0}, {n1}]")));
    }
    let mut sum = 0.0;
    for (k, h) in histories.iter().enumerate() {
        if n1 >= h.len() {
            return Err(Error::InvalidInput(format!(
                "window end {n1} beyond history {k} of length {}",
                h.len()
            )));
        }
        sum += h[n0..=n1].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    }
    Ok(sum / histories.len() as f64)
}

/// Full nonincreasing singular spectrum.
pub fn singular_spectrum(s: &SnapshotMatrix) -> Vec<f64> {
    thin_svd(&s.matrix).singular_values
}

/// Interpolates both fields to the finer mesh and returns the weighted L² difference.
pub fn finer_mesh_error(u_a: &[f64], mesh_a: &Mesh1D, u_b: &[f64], mesh_b: &Mesh1D) -> Result<f64> {
    let (fine, u_fine, coarse, u_coarse) = if mesh_a.len() >= mesh_b.len() {
        (mesh_a, u_a, mesh_b, u_b)
    } else {
        (mesh_b, u_b, mesh_a, u_a)
    };
    let on_fine = interpolate(coarse, u_coarse, fine.nodes());
    l2_error(&on_fine, u_fine, &fine.widths())
}

/// Per-parameter error history of one ROM configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamErrors {
    pub mu: Vec<f64>,
    pub times: Vec<f64>,
    pub l2: Vec<f64>,
    pub relative: Vec<f64>,
}

impl ParamErrors {
    pub fn max_relative(&self) -> f64 {
        self.relative.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub mode: String,
    pub order: usize,
    pub window: (f64, f64),
    pub n_nodes: usize,
    pub per_param: Vec<ParamErrors>,
    pub average: f64,
    /// How the average was formed.
    pub note: String,
}

impl ErrorReport {
    pub fn new(mode: &str, order: usize, n_nodes: usize, per_param: Vec<ParamErrors>) -> Result<Self> {
        let first = per_param.first().ok_or_else(|| Error::InvalidInput("no parameters in report".into()))?;
        let (t0, t1) = (first.times[0], *first.times.last().unwrap());
        let histories: Vec<Vec<f64>> = per_param.iter().map(|p| p.relative.clone()).collect();
        let len = histories.iter().map(Vec::len).min().unwrap_or(0);
        if len == 0 {
            return Err(Error::InvalidInput("empty error history".into()));
        }
        let average = average_relative_error(&histories, (0, len - 1))?;
        Ok(Self {
            mode: mode.into(),
            order,
            window: (t0, t1),
            n_nodes,
            per_param,
            average,
            note: "mean over parameters of the max relative L2 error over the window".into(),
        })
    }

    /// Per-step L² error averaged over the window, then over parameters.
    pub fn average_absolute(&self) -> f64 {
        let s: f64 = self
            .per_param
            .iter()
            .map(|p| p.l2.iter().sum::<f64>() / p.l2.len() as f64)
            .sum();
        s / self.per_param.len() as f64
    }
}

pub fn write_spectrum_csv(path: &Path, sigma: &[f64]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "n,sigma")?;
    for (n, s) in sigma.iter().enumerate() {
        writeln!(w, "{},{s:.17e}", n + 1)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows `(t, error)`.
pub fn write_history_csv(path: &Path, times: &[f64], errors: &[f64]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "t,error")?;
    for (t, e) in times.iter().zip(errors) {
        writeln!(w, "{t:.17e},{e:.17e}")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub order: usize,
    pub mode: String,
    pub average: f64,
}

/// Rows `(r, mode, E_average)`.
pub fn write_order_table_csv(path: &Path, rows: &[OrderRow]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "r,mode,e_average")?;
    for row in rows {
        writeln!(w, "{},{},{:.17e}", row.order, row.mode, row.average)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_closed_forms() {
        let a = vec![1.0; 11];
        let w = vec![0.1; 11];
        assert_eq!(l2_error(&a, &a, &w).unwrap(), 0.0);
        let z = vec![0.0; 11];
        assert!((l2_error(&a, &z, &w).unwrap() - (11.0f64 * 0.1).sqrt()).abs() < 1e-15);
        assert!(l2_error(&a, &z[..3], &w).is_err());
    }

    #[test]
    fn relative_error_properties() {
        let u: Vec<f64> = (0..20).map(|i| (i as f64 * 0.3).sin() + 0.1).collect();
        let w = vec![0.05; 20];
        let scaled: Vec<f64> = u.iter().map(|v| 1.01 * v).collect();
        assert!((relative_error(&scaled, &u, &w).unwrap() - 0.01).abs() < 1e-14);
        assert!((relative_error(&vec![0.0; 20], &u, &w).unwrap() - 1.0).abs() < 1e-15);
        assert!(relative_error(&u, &vec![0.0; 20], &w).is_err());
    }

    #[test]
    fn window_average() {
        assert_eq!(average_relative_error(&[vec![0.5]], (0, 0)).unwrap(), 0.5);
        let h = vec![vec![0.01, 0.02, 0.015], vec![0.04, 0.03, 0.01]];
        assert!((average_relative_error(&h, (0, 2)).unwrap() - 0.03).abs() < 1e-15);
        assert!(average_relative_error(&h, (2, 1)).is_err());
        let table = vec![
            vec![0.1, 0.3, 0.2, 0.0, 0.5],
            vec![0.2, 0.2, 0.2, 0.2, 0.2],
            vec![0.9, 0.1, 0.1, 0.1, 0.1],
        ];
        // window [1, 3]: maxima 0.3, 0.2, 0.1
        assert!((average_relative_error(&table, (1, 3)).unwrap() - 0.2).abs() < 1e-15);
    }
}
