//! Snapshot matrices, truncated-SVD bases and static-basis Galerkin stepping.

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fom::implicit::StepOperator;
use crate::fom::mesh::Mesh1D;
use crate::fom::snapshot::SnapshotSet;
use crate::linalg::{svd_with, DenseMatrix, SvdMethod};
use crate::rom::{online_step_galerkin, ProjectionOptions};

const BASIS_MAGIC: &[u8; 8] = b"LPBASE01";

/// Rows are mesh nodes, columns `(μ_k, t_j)` pairs in `k`-major, `j`-minor order.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    pub matrix: DenseMatrix,
    /// `(k, j)` of each column.
    pub columns: Vec<(usize, usize)>,
}

pub fn assemble_snapshot_matrix(snapshots: &SnapshotSet) -> Result<SnapshotMatrix> {
    if snapshots.has_per_snapshot_meshes() {
        return Err(Error::InvalidInput(
            "POD snapshot matrix needs all snapshots on one mesh".into(),
        ));
    }
    let mut cols = Vec::with_capacity(snapshots.n_params() * snapshots.n_times());
    let mut index = Vec::with_capacity(cols.capacity());
    for k in 0..snapshots.n_params() {
        for j in 0..snapshots.n_times() {
            cols.push(snapshots.snapshot(k, j).to_vec());
            index.push((k, j));
        }
    }
    Ok(SnapshotMatrix {
        matrix: DenseMatrix::from_columns(&cols)?,
        columns: index,
    })
}

/// `s̃_ij = u₀(x_i)` for every `t_j`.
pub fn transformed_snapshot_matrix(u0: impl Fn(f64) -> f64, mesh: &Mesh1D, times: &[f64]) -> SnapshotMatrix {
    let col: Vec<f64> = mesh.nodes().iter().map(|&x| u0(x)).collect();
    let n = col.len();
    SnapshotMatrix {
        matrix: DenseMatrix::from_fn(n, times.len(), |i, _| col[i]),
        columns: (0..times.len()).map(|j| (0, j)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    pub nodes: Vec<f64>,
    pub period: Option<f64>,
    /// Orthonormal columns.
    pub phi: DenseMatrix,
    /// Retained singular values.
    pub singular_values: Vec<f64>,
}

impl PodBasis {
    pub fn order(&self) -> usize {
        self.phi.cols()
    }

    pub fn mesh(&self) -> Result<Mesh1D> {
        Mesh1D::with_period(self.nodes.clone(), self.period)
    }

    /// `LPBASE01`: snapshot container with σ in the time slot and the columns as values.
    pub fn save(&self, path: &Path) -> Result<()> {
        let set = self.as_container()?;
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        set.write_to(&mut w, BASIS_MAGIC, &self.singular_values)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let set = SnapshotSet::read_from(&bytes, BASIS_MAGIC)?;
        let r = set.n_times();
        let n = set.n_nodes();
        let cols: Vec<Vec<f64>> = (0..r).map(|j| set.snapshot(0, j).to_vec()).collect();
        let phi = DenseMatrix::from_columns(&cols)?;
        debug_assert_eq!(phi.rows(), n);
        Ok(Self {
            nodes: set.nodes(0).to_vec(),
            period: set.period(),
            phi,
            singular_values: set.times().to_vec(),
        })
    }

    fn as_container(&self) -> Result<SnapshotSet> {
        let mesh = self.mesh()?;
        let values: Vec<f64> = self.phi.columns().concat();
        SnapshotSet::new(&mesh, self.singular_values.clone(), vec![vec![]], values)
    }
}

/// Leading `r` left singular vectors; `r` above the numerical rank is an error.
pub fn pod_basis(s: &SnapshotMatrix, nodes: &[f64], period: Option<f64>, r: usize) -> Result<PodBasis> {
    let (m, n) = (s.matrix.rows(), s.matrix.cols());
    if nodes.len() != m {
        return Err(Error::dim("POD nodes", m, nodes.len()));
    }
    if r == 0 || r > m.min(n) {
        return Err(Error::InvalidInput(format!("POD order {r} outside 1..={}", m.min(n))));
    }
    let svd = svd_with(&s.matrix, SvdMethod::Auto);
    let sigma = &svd.singular_values;
    let cutoff = sigma.first().copied().unwrap_or(0.0) * m.max(n) as f64 * f64::EPSILON;
    let rank = sigma.iter().take_while(|&&v| v > cutoff).count();
    if r > rank {
        return Err(Error::InvalidInput(format!("POD order {r} exceeds numerical rank {rank}")));
    }
    Ok(PodBasis {
        nodes: nodes.to_vec(),
        period,
        phi: svd.left_vectors.leading_columns(r),
        singular_values: sigma[..r].to_vec(),
    })
}

/// Solves `ΦᵀF(Φα) = Φᵀb` with the static POD basis.
pub fn pod_online_step(op: &dyn StepOperator, b: &[f64], basis: &PodBasis, alpha_guess: &[f64]) -> Result<Vec<f64>> {
    Ok(online_step_galerkin(op, b, &basis.phi, alpha_guess, &ProjectionOptions::default())?.alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::thin_svd;

    fn set(n_t: usize, n_mu: usize) -> SnapshotSet {
        let mesh = Mesh1D::uniform(0.0, 1.0, 9).unwrap();
        let params: Vec<Vec<f64>> = (0..n_mu).map(|k| vec![k as f64]).collect();
        let times: Vec<f64> = (0..n_t).map(|j| j as f64 * 0.1).collect();
        let mut values = Vec::new();
        for k in 0..n_mu {
            for &t in &times {
                values.extend(mesh.nodes().iter().map(|x| (x - t).sin() + k as f64 * x * x));
            }
        }
        SnapshotSet::new(&mesh, times, params, values).unwrap()
    }

    #[test]
    fn single_column() {
        let s = set(1, 1);
        let m = assemble_snapshot_matrix(&s).unwrap();
        assert_eq!(m.matrix.cols(), 1);
        assert_eq!(m.matrix.column(0), s.snapshot(0, 0));
    }

    #[test]
    fn column_order_is_param_major() {
        let s = set(3, 2);
        let m = assemble_snapshot_matrix(&s).unwrap();
        assert_eq!(m.columns[4], (1, 1));
        assert_eq!(m.matrix.column(4), s.snapshot(1, 1));
    }

    #[test]
    fn rejects_mixed_meshes() {
        let a = Mesh1D::uniform(0.0, 1.0, 4).unwrap();
        let b = Mesh1D::new(vec![0.0, 0.1, 0.5, 0.7, 1.0]).unwrap();
        let s = SnapshotSet::with_meshes(&[a, b], vec![0.0, 0.1], vec![vec![]], vec![0.0; 10]).unwrap();
        assert!(assemble_snapshot_matrix(&s).is_err());
    }

    #[test]
    fn transformed_box_is_rank_one() {
        let mesh = Mesh1D::uniform(0.0, 2.0, 200).unwrap();
        let times: Vec<f64> = (0..=100).map(|j| j as f64 * 0.01).collect();
        let u0 = |x: f64| if (0.25..=0.5).contains(&x) { 1.0 } else { 0.0 };
        let m = transformed_snapshot_matrix(u0, &mesh, &times);
        let sigma = thin_svd(&m.matrix).singular_values;
        assert!(sigma[1] / sigma[0] <= 1e-12);
        let col_norm = crate::linalg::norm2(&m.matrix.column(0));
        assert!((sigma[0] - col_norm * (times.len() as f64).sqrt()).abs() < 1e-10 * sigma[0]);
        assert_eq!(m.matrix.column(37), m.matrix.column(0));
    }

    #[test]
    fn basis_is_orthonormal_and_reconstructs() {
        let s = set(6, 3);
        let m = assemble_snapshot_matrix(&s).unwrap();
        let full = m.matrix.rows().min(m.matrix.cols());
        let sigma = thin_svd(&m.matrix).singular_values;
        let rank = sigma.iter().filter(|&&v| v > 1e-10 * sigma[0]).count();
        let b = pod_basis(&m, s.nodes(0), None, rank).unwrap();
        let g = b.phi.transpose_matmul(&b.phi);
        assert!(g.sub(&DenseMatrix::identity(rank)).max_abs() < 1e-12);
        let proj = b.phi.matmul(&b.phi.transpose_matmul(&m.matrix));
        assert!(proj.sub(&m.matrix).frobenius_norm() <= 1e-10 * m.matrix.frobenius_norm());
        assert!(pod_basis(&m, s.nodes(0), None, full + 1).is_err());
    }

    #[test]
    fn rank_one_reconstruction() {
        let mesh = Mesh1D::uniform(0.0, 1.0, 20).unwrap();
        let m = transformed_snapshot_matrix(|x| x * (1.0 - x), &mesh, &[0.0, 0.5, 1.0]);
        let b = pod_basis(&m, mesh.nodes(), None, 1).unwrap();
        let proj = b.phi.matmul(&b.phi.transpose_matmul(&m.matrix));
        assert!(proj.sub(&m.matrix).max_abs() <= 1e-12);
        assert!(pod_basis(&m, mesh.nodes(), None, 2).is_err());
    }

    #[test]
    fn persistence_round_trip() {
        let s = set(5, 2);
        let m = assemble_snapshot_matrix(&s).unwrap();
        let b = pod_basis(&m, s.nodes(0), None, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("basis.bin");
        b.save(&path).unwrap();
        assert_eq!(&std::fs::read(&path).unwrap()[..8], BASIS_MAGIC);
        assert_eq!(PodBasis::load(&path).unwrap(), b);
        assert!(SnapshotSet::read(&path).is_err());
    }
}
