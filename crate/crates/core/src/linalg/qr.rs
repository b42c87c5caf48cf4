use crate::error::{Error, Result};
use crate::linalg::dense::{dot, DenseMatrix};
use crate::linalg::svd::thin_svd;

/// Relative threshold on the diagonal of `R` below which a column counts as dependent.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Householder QR factorization of a tall matrix.
#[derive(Debug, Clone)]
pub struct Qr {
    rows: usize,
    cols: usize,
    /// Unit Householder vectors, `reflectors[k]` acts on entries `k..rows`.
    reflectors: Vec<Vec<f64>>,
    /// Upper-triangular factor, row-major `cols × cols`.
    r: DenseMatrix,
}

impl Qr {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        let (m, n) = (a.rows(), a.cols());
        if m < n {
            return Err(Error::InvalidInput(format!(
                "QR needs rows >= cols, got {m}x{n}"
            )));
        }
        let mut cols: Vec<Vec<f64>> = a.columns();
        let mut reflectors = Vec::with_capacity(n);
        let mut r = DenseMatrix::zeros(n, n);
        for k in 0..n {
            let x = &cols[k][k..];
            let norm = dot(x, x).sqrt();
            let alpha = if x[0] >= 0.0 { -norm } else { norm };
            let mut v = x.to_vec();
            v[0] -= alpha;
            let vnorm = dot(&v, &v).sqrt();
            if vnorm > 0.0 && norm > 0.0 {
                v.iter_mut().for_each(|e| *e /= vnorm);
                for col in cols.iter_mut().skip(k + 1) {
                    let seg = &mut col[k..];
                    let s = 2.0 * dot(&v, seg);
                    for (e, vi) in seg.iter_mut().zip(&v) {
                        *e -= s * vi;
                    }
                }
                r[(k, k)] = alpha;
            } else {
                v.iter_mut().for_each(|e| *e = 0.0);
                r[(k, k)] = x[0];
            }
            for j in k + 1..n {
                r[(k, j)] = cols[j][k];
            }
            reflectors.push(v);
        }
        Ok(Self {
            rows: m,
            cols: n,
            reflectors,
            r,
        })
    }

    pub fn r(&self) -> &DenseMatrix {
        &self.r
    }

    /// Checks that no diagonal entry of `R` falls below `RANK_TOLERANCE` times the largest.
    pub fn check_rank(&self) -> Result<()> {
        let largest = (0..self.cols).fold(0.0_f64, |m, k| m.max(self.r[(k, k)].abs()));
        for k in 0..self.cols {
            if self.r[(k, k)].abs() <= RANK_TOLERANCE * largest || largest == 0.0 {
                return Err(Error::RankDeficient { column: k });
            }
        }
        Ok(())
    }

    /// 2-norm condition number of `R` (equal to that of the factored matrix).
    pub fn condition(&self) -> f64 {
        let s = thin_svd(&self.r).singular_values;
        match (s.first(), s.last()) {
            (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
            (Some(_), Some(_)) => f64::INFINITY,
            _ => 1.0,
        }
    }

    /// Applies `Qᵀ` to a vector of length `rows`.
    pub fn apply_qt(&self, y: &[f64]) -> Vec<f64> {
        let mut z = y.to_vec();
        for (k, v) in self.reflectors.iter().enumerate() {
            let seg = &mut z[k..];
            let s = 2.0 * dot(v, seg);
            if s != 0.0 {
                for (e, vi) in seg.iter_mut().zip(v) {
                    *e -= s * vi;
                }
            }
        }
        z
    }

    /// Applies `Q` (thin, `rows × cols`) to a vector of length `cols`.
    pub fn apply_q(&self, beta: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.rows];
        z[..self.cols].copy_from_slice(beta);
        for (k, v) in self.reflectors.iter().enumerate().rev() {
            let seg = &mut z[k..];
            let s = 2.0 * dot(v, seg);
            if s != 0.0 {
                for (e, vi) in seg.iter_mut().zip(v) {
                    *e -= s * vi;
                }
            }
        }
        z
    }

    /// Explicit thin orthonormal factor.
    pub fn thin_q(&self) -> DenseMatrix {
        DenseMatrix::from_columns(&self.thin_q_columns()).expect("QR has at least one column")
    }

    /// Columns of the thin orthonormal factor.
    pub fn thin_q_columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols)
            .map(|j| {
                let mut z = vec![0.0; self.rows];
                z[j] = 1.0;
                // reflectors past j leave e_j untouched
                for k in (0..=j).rev() {
                    let v = &self.reflectors[k];
                    let seg = &mut z[k..];
                    let s = 2.0 * dot(v, seg);
                    if s != 0.0 {
                        for (e, vi) in seg.iter_mut().zip(v) {
                            *e -= s * vi;
                        }
                    }
                }
                z
            })
            .collect()
    }

    /// Solves `R x = z` for the leading `cols` entries of `z`.
    pub fn solve_r(&self, z: &[f64]) -> Result<Vec<f64>> {
        let n = self.cols;
        let mut x = z[..n].to_vec();
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| self.r[(k, j)] * x[j]).sum();
            let d = self.r[(k, k)];
            if d == 0.0 {
                return Err(Error::RankDeficient { column: k });
            }
            x[k] = (x[k] - s) / d;
        }
        Ok(x)
    }

    /// Minimizer of `‖A x − y‖₂`.
    pub fn least_squares(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::dim("least_squares rhs", self.rows, y.len()));
        }
        self.solve_r(&self.apply_qt(y))
    }
}

/// Minimizes `‖Φ α − y‖₂` through Householder QR.
pub fn least_squares(phi: &DenseMatrix, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != phi.rows() {
        return Err(Error::dim("least_squares rhs", phi.rows(), y.len()));
    }
    let qr = Qr::new(phi)?;
    qr.check_rank()?;
    qr.least_squares(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::{norm2, sub};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn orthonormal_basis_gives_transpose_product() {
        let q = Qr::new(&random_matrix(30, 4, 1)).unwrap().thin_q();
        let y: Vec<f64> = (0..30).map(|i| (i as f64 * 0.3).sin()).collect();
        let alpha = least_squares(&q, &y).unwrap();
        let expected = q.transpose_matvec(&y);
        for (a, e) in alpha.iter().zip(&expected) {
            assert!((a - e).abs() < 1e-13);
        }
    }

    #[test]
    fn in_span_right_hand_side_is_reproduced() {
        let phi = random_matrix(40, 6, 2);
        let coeffs = [0.5, -1.0, 2.0, 0.0, 3.0, 1.5];
        let y = phi.matvec(&coeffs);
        let alpha = least_squares(&phi, &y).unwrap();
        let resid = norm2(&sub(&phi.matvec(&alpha), &y));
        assert!(resid <= 1e-12 * norm2(&y));
    }

    #[test]
    fn normal_equations_hold_for_random_system() {
        let phi = random_matrix(100, 5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y: Vec<f64> = (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let alpha = least_squares(&phi, &y).unwrap();
        // ΦᵀΦα − Φᵀy computed without the QR path
        let lhs = phi.transpose_matvec(&phi.matvec(&alpha));
        let rhs = phi.transpose_matvec(&y);
        for (l, r) in lhs.iter().zip(&rhs) {
            assert!((l - r).abs() <= 1e-10 * (1.0 + r.abs()));
        }
    }

    #[test]
    fn rank_deficiency_names_column() {
        let mut phi = random_matrix(20, 3, 5);
        for i in 0..20 {
            phi[(i, 2)] = 2.0 * phi[(i, 0)] - phi[(i, 1)];
        }
        match least_squares(&phi, &vec![1.0; 20]) {
            Err(Error::RankDeficient { column }) => assert_eq!(column, 2),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn condition_of_diagonal() {
        let a = DenseMatrix::from_fn(5, 2, |i, j| if i == j { [4.0, 0.5][j] } else { 0.0 });
        let c = Qr::new(&a).unwrap().condition();
        assert!((c - 8.0).abs() < 1e-12);
    }
}
