//! Thin singular value decomposition.
//!
//! The default path is Golub–Kahan bidiagonalization followed by implicit-shift
//! QR on the bidiagonal. For strongly rectangular snapshot matrices the method of
//! snapshots (eigendecomposition of the Gram matrix of the smaller dimension) is
//! available as a cheaper route to the leading modes.

use serde::{Deserialize, Serialize};

use crate::linalg::dense::DenseMatrix;

/// `A = U diag(σ) Vᵀ` with `σ` sorted in nonincreasing order.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub left_vectors: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub right_vectors: DenseMatrix,
}

impl SvdResult {
    /// `U_r Σ_r V_rᵀ`.
    pub fn reconstruct(&self, rank: usize) -> DenseMatrix {
        let rank = rank.min(self.singular_values.len());
        let (m, n) = (self.left_vectors.rows(), self.right_vectors.rows());
        let mut out = DenseMatrix::zeros(m, n);
        for i in 0..m {
            let row = out.row_mut(i);
            for k in 0..rank {
                let s = self.left_vectors[(i, k)] * self.singular_values[k];
                if s != 0.0 {
                    for (j, e) in row.iter_mut().enumerate() {
                        *e += s * self.right_vectors[(j, k)];
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SvdMethod {
    GolubKahan,
    Snapshots,
    /// Snapshots when `min(m, n) < 0.25 max(m, n)`, Golub–Kahan otherwise.
    #[default]
    Auto,
}

pub fn svd_with(a: &DenseMatrix, method: SvdMethod) -> SvdResult {
    let (m, n) = (a.rows(), a.cols());
    let use_gram = match method {
        SvdMethod::GolubKahan => false,
        SvdMethod::Snapshots => true,
        SvdMethod::Auto => (m.min(n) as f64) < 0.25 * m.max(n) as f64,
    };
    if use_gram {
        snapshot_svd(a)
    } else {
        thin_svd(a)
    }
}

/// Golub–Kahan SVD. Returns `min(m, n)` singular triplets.
pub fn thin_svd(a: &DenseMatrix) -> SvdResult {
    if a.rows() < a.cols() {
        let t = thin_svd(&a.transpose());
        return SvdResult {
            left_vectors: t.right_vectors,
            singular_values: t.singular_values,
            right_vectors: t.left_vectors,
        };
    }
    let (mut u, mut w, mut v) = golub_kahan(a);
    sort_triplets(&mut u, &mut w, &mut v);
    SvdResult {
        left_vectors: u,
        singular_values: w,
        right_vectors: v,
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Householder bidiagonalization plus implicit-shift QR (Golub–Reinsch), `m >= n`.
fn golub_kahan(input: &DenseMatrix) -> (DenseMatrix, Vec<f64>, DenseMatrix) {
    let (m, n) = (input.rows(), input.cols());
    let mut a = input.clone();
    let mut w = vec![0.0; n];
    let mut v = DenseMatrix::zeros(n, n);
    let mut rv1 = vec![0.0; n];
    let (mut g, mut scale, mut anorm) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut l = 0;

    for i in 0..n {
        l = i + 1;
        rv1[i] = scale * g;
        g = 0.0;
        let mut s = 0.0;
        scale = 0.0;
        if i < m {
            for k in i..m {
                scale += a[(k, i)].abs();
            }
            if scale != 0.0 {
                for k in i..m {
                    a[(k, i)] /= scale;
                    s += a[(k, i)] * a[(k, i)];
                }
                let f = a[(i, i)];
                g = -sign(s.sqrt(), f);
                let h = f * g - s;
                a[(i, i)] = f - g;
                for j in l..n {
                    let mut s = 0.0;
                    for k in i..m {
                        s += a[(k, i)] * a[(k, j)];
                    }
                    let f = s / h;
                    for k in i..m {
                        let aki = a[(k, i)];
                        a[(k, j)] += f * aki;
                    }
                }
                for k in i..m {
                    a[(k, i)] *= scale;
                }
            }
        }
        w[i] = scale * g;
        g = 0.0;
        s = 0.0;
        scale = 0.0;
        if i < m && i + 1 != n {
            for k in l..n {
                scale += a[(i, k)].abs();
            }
            if scale != 0.0 {
                for k in l..n {
                    a[(i, k)] /= scale;
                    s += a[(i, k)] * a[(i, k)];
                }
                let f = a[(i, l)];
                g = -sign(s.sqrt(), f);
                let h = f * g - s;
                a[(i, l)] = f - g;
                for k in l..n {
                    rv1[k] = a[(i, k)] / h;
                }
                for j in l..m {
                    let mut s = 0.0;
                    for k in l..n {
                        s += a[(j, k)] * a[(i, k)];
                    }
                    for k in l..n {
                        a[(j, k)] += s * rv1[k];
                    }
                }
                for k in l..n {
                    a[(i, k)] *= scale;
                }
            }
        }
        anorm = anorm.max(w[i].abs() + rv1[i].abs());
    }

    // Accumulate right-hand transformations.
    for i in (0..n).rev() {
        if i + 1 < n {
            if g != 0.0 {
                for j in l..n {
                    v[(j, i)] = (a[(i, j)] / a[(i, l)]) / g;
                }
                for j in l..n {
                    let mut s = 0.0;
                    for k in l..n {
                        s += a[(i, k)] * v[(k, j)];
                    }
                    for k in l..n {
                        let vki = v[(k, i)];
                        v[(k, j)] += s * vki;
                    }
                }
            }
            for j in l..n {
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        }
        v[(i, i)] = 1.0;
        g = rv1[i];
        l = i;
    }

    // Accumulate left-hand transformations.
    for i in (0..m.min(n)).rev() {
        let l = i + 1;
        let mut g = w[i];
        for j in l..n {
            a[(i, j)] = 0.0;
        }
        if g != 0.0 {
            g = 1.0 / g;
            for j in l..n {
                let mut s = 0.0;
                for k in l..m {
                    s += a[(k, i)] * a[(k, j)];
                }
                let f = (s / a[(i, i)]) * g;
                for k in i..m {
                    let aki = a[(k, i)];
                    a[(k, j)] += f * aki;
                }
            }
            for j in i..m {
                a[(j, i)] *= g;
            }
        } else {
            for j in i..m {
                a[(j, i)] = 0.0;
            }
        }
        a[(i, i)] += 1.0;
    }

    // Diagonalize the bidiagonal form.
    for k in (0..n).rev() {
        for its in 0.. {
            let mut flag = true;
            let mut l = k;
            let mut nm = 0;
            loop {
                if l == 0 || rv1[l].abs() + anorm == anorm {
                    flag = false;
                    break;
                }
                nm = l - 1;
                if w[nm].abs() + anorm == anorm {
                    break;
                }
                l -= 1;
            }
            if flag {
                let mut c = 0.0;
                let mut s = 1.0;
                for i in l..=k {
                    let f = s * rv1[i];
                    rv1[i] *= c;
                    if f.abs() + anorm == anorm {
                        break;
                    }
                    let g = w[i];
                    let mut h = f.hypot(g);
                    w[i] = h;
                    h = 1.0 / h;
                    c = g * h;
                    s = -f * h;
                    for j in 0..m {
                        let y = a[(j, nm)];
                        let z = a[(j, i)];
                        a[(j, nm)] = y * c + z * s;
                        a[(j, i)] = z * c - y * s;
                    }
                }
            }
            let z = w[k];
            if l == k {
                if z < 0.0 {
                    w[k] = -z;
                    for j in 0..n {
                        v[(j, k)] = -v[(j, k)];
                    }
                }
                break;
            }
            assert!(its < 200, "SVD failed to converge");
            let mut x = w[l];
            let nm = k - 1;
            let mut y = w[nm];
            let mut g = rv1[nm];
            let mut h = rv1[k];
            let mut f = ((y - z) * (y + z) + (g - h) * (g + h)) / (2.0 * h * y);
            g = f.hypot(1.0);
            f = ((x - z) * (x + z) + h * ((y / (f + sign(g, f))) - h)) / x;
            let mut c = 1.0;
            let mut s = 1.0;
            for j in l..=nm {
                let i = j + 1;
                g = rv1[i];
                y = w[i];
                h = s * g;
                g *= c;
                let mut z = f.hypot(h);
                rv1[j] = z;
                c = f / z;
                s = h / z;
                f = x * c + g * s;
                g = g * c - x * s;
                h = y * s;
                y *= c;
                for jj in 0..n {
                    let x = v[(jj, j)];
                    let z = v[(jj, i)];
                    v[(jj, j)] = x * c + z * s;
                    v[(jj, i)] = z * c - x * s;
                }
                z = f.hypot(h);
                w[j] = z;
                if z != 0.0 {
                    z = 1.0 / z;
                    c = f * z;
                    s = h * z;
                }
                f = c * g + s * y;
                x = c * y - s * g;
                for jj in 0..m {
                    let y = a[(jj, j)];
                    let z = a[(jj, i)];
                    a[(jj, j)] = y * c + z * s;
                    a[(jj, i)] = z * c - y * s;
                }
            }
            rv1[l] = 0.0;
            rv1[k] = f;
            w[k] = x;
        }
    }
    (a, w, v)
}

fn sort_triplets(u: &mut DenseMatrix, w: &mut Vec<f64>, v: &mut DenseMatrix) {
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&i, &j| w[j].total_cmp(&w[i]));
    let u_old = u.clone();
    let v_old = v.clone();
    let w_old = w.clone();
    for (new, &old) in order.iter().enumerate() {
        w[new] = w_old[old];
        for i in 0..u.rows() {
            u[(i, new)] = u_old[(i, old)];
        }
        for i in 0..v.rows() {
            v[(i, new)] = v_old[(i, old)];
        }
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues in nonincreasing order with eigenvectors as columns.
pub fn symmetric_eigen(a: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = a.rows();
    let mut m = a.clone();
    let mut vecs = DenseMatrix::identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let diag: f64 = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum();
        if off <= 1e-30 * diag || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = sign(1.0, theta) / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = vecs[(k, p)];
                    let vkq = vecs[(k, q)];
                    vecs[(k, p)] = c * vkp - s * vkq;
                    vecs[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut vals: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    let mut dummy = DenseMatrix::zeros(0, n);
    let mut vecs_sorted = vecs;
    sort_triplets(&mut vecs_sorted, &mut vals, &mut dummy);
    (vals, vecs_sorted)
}

/// Method of snapshots: SVD through the Gram matrix of the smaller dimension.
///
/// Accurate for singular values well above `sqrt(ε) σ₁`; vectors attached to
/// smaller values are completed to an orthonormal set.
pub fn snapshot_svd(a: &DenseMatrix) -> SvdResult {
    let (m, n) = (a.rows(), a.cols());
    // Work with the short side: G = BᵀB with B tall (rows >= cols).
    let (b, transposed) = if m >= n { (a.clone(), false) } else { (a.transpose(), true) };
    let k = b.cols();
    let gram = b.transpose_matmul(&b);
    let (vals, right) = symmetric_eigen(&gram);
    let sigma: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
    let cutoff = sigma.first().copied().unwrap_or(0.0) * 1e-7;
    let bv = b.matmul(&right);
    let mut left_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut col = bv.column(j);
        if sigma[j] > cutoff && sigma[j] > 0.0 {
            col.iter_mut().for_each(|e| *e /= sigma[j]);
        } else {
            col = vec![0.0; b.rows()];
        }
        left_cols.push(col);
    }
    complete_orthonormal(&mut left_cols);
    let left = DenseMatrix::from_columns(&left_cols).expect("consistent column lengths");
    if transposed {
        SvdResult {
            left_vectors: right,
            singular_values: sigma,
            right_vectors: left,
        }
    } else {
        SvdResult {
            left_vectors: left,
            singular_values: sigma,
            right_vectors: right,
        }
    }
}

/// Re-orthonormalizes columns with two passes of modified Gram–Schmidt and
/// replaces degenerate columns by completing vectors.
fn complete_orthonormal(cols: &mut [Vec<f64>]) {
    let len = cols.first().map_or(0, Vec::len);
    let mut probe = 0;
    for j in 0..cols.len() {
        loop {
            let mut c = cols[j].clone();
            for _ in 0..2 {
                for prev in cols.iter().take(j) {
                    let d = crate::linalg::dense::dot(prev, &c);
                    crate::linalg::dense::axpy(-d, prev, &mut c);
                }
            }
            let nrm = crate::linalg::dense::norm2(&c);
            if nrm > 1e-8 {
                c.iter_mut().for_each(|e| *e /= nrm);
                cols[j] = c;
                break;
            }
            let mut e = vec![0.0; len];
            e[probe % len] = 1.0;
            probe += 1;
            cols[j] = e;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(m: usize, n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn orthonormality_defect(q: &DenseMatrix) -> f64 {
        let g = q.transpose_matmul(q);
        g.sub(&DenseMatrix::identity(g.rows())).max_abs()
    }

    #[test]
    fn diagonal_values() {
        let a = DenseMatrix::from_row_major(2, 2, vec![1.0, 0.0, 0.0, 3.0]).unwrap();
        let s = thin_svd(&a).singular_values;
        assert!((s[0] - 3.0).abs() < 1e-15 && (s[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rank_one_second_value_vanishes() {
        let u: Vec<f64> = (0..7).map(|i| i as f64 + 1.0).collect();
        let v: Vec<f64> = (0..5).map(|j| (j as f64).cos()).collect();
        let a = DenseMatrix::from_fn(7, 5, |i, j| u[i] * v[j]);
        let s = thin_svd(&a).singular_values;
        assert!(s[1] <= 1e-14 * s[0]);
    }

    #[test]
    fn random_reconstruction_and_orthonormality() {
        for (m, n) in [(50, 30), (30, 50), (12, 12)] {
            let a = random(m, n, (m * n) as u64);
            let svd = thin_svd(&a);
            let err = a.sub(&svd.reconstruct(m.min(n))).frobenius_norm() / a.frobenius_norm();
            assert!(err <= 1e-12, "reconstruction {err}");
            assert!(orthonormality_defect(&svd.left_vectors) <= 1e-12);
            assert!(orthonormality_defect(&svd.right_vectors) <= 1e-12);
            assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn snapshot_path_agrees_on_leading_values() {
        let a = random(200, 20, 9);
        let gk = thin_svd(&a);
        let gram = snapshot_svd(&a);
        for (x, y) in gk.singular_values.iter().zip(&gram.singular_values) {
            assert!((x - y).abs() <= 1e-10 * gk.singular_values[0]);
        }
        assert!(orthonormality_defect(&gram.left_vectors) <= 1e-12);
        let wide = snapshot_svd(&a.transpose());
        assert!((wide.singular_values[0] - gk.singular_values[0]).abs() <= 1e-10 * gk.singular_values[0]);
        assert_eq!(wide.left_vectors.rows(), 20);
    }

    #[test]
    fn zero_matrix() {
        let s = thin_svd(&DenseMatrix::zeros(4, 3));
        assert!(s.singular_values.iter().all(|v| *v == 0.0));
        assert!(orthonormality_defect(&s.left_vectors) <= 1e-12);
    }
}
