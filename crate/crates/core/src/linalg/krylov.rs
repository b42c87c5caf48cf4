use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dense::{axpy, dot, lu_solve, norm2, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmresOptions {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            restart: 30,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmresSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// True residual norm at the start of every restart cycle, plus the final one.
    pub restart_residuals: Vec<f64>,
}

/// Restarted GMRES; converged when `‖A x − b‖₂ ≤ tol ‖b‖₂`.
pub fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    opts: &GmresOptions,
) -> Result<Vec<f64>> {
    gmres_from(apply, rhs, None, opts).map(|s| s.x)
}

pub fn gmres_from(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    x0: Option<&[f64]>,
    opts: &GmresOptions,
) -> Result<GmresSolution> {
    let n = rhs.len();
    let bnorm = norm2(rhs);
    let mut x = match x0 {
        Some(g) if g.len() == n => g.to_vec(),
        Some(g) => return Err(Error::dim("gmres initial guess", n, g.len())),
        None => vec![0.0; n],
    };
    if bnorm == 0.0 {
        return Ok(GmresSolution {
            x: vec![0.0; n],
            iterations: 0,
            restart_residuals: vec![0.0],
        });
    }
    let target = opts.tol * bnorm;
    let m = opts.restart.max(1);
    let mut iterations = 0;
    let mut history = Vec::new();

    loop {
        let ax = apply(&x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm2(&r);
        history.push(beta);
        if !beta.is_finite() {
            return Err(Error::NotConverged {
                solver: "gmres",
                iterations,
                residual: beta,
                history,
            });
        }
        if beta <= target {
            return Ok(GmresSolution {
                x,
                iterations,
                restart_residuals: history,
            });
        }
        if iterations >= opts.max_iter {
            return Err(Error::NotConverged {
                solver: "gmres",
                iterations,
                residual: beta / bnorm,
                history,
            });
        }

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && iterations < opts.max_iter {
            let mut w = apply(&basis[k]);
            for (i, vi) in basis.iter().enumerate() {
                let hik = dot(&w, vi);
                h[i][k] = hik;
                axpy(-hik, vi, &mut w);
            }
            // one reorthogonalization pass
            for (i, vi) in basis.iter().enumerate() {
                let c = dot(&w, vi);
                h[i][k] += c;
                axpy(-c, vi, &mut w);
            }
            let wnorm = norm2(&w);
            h[k + 1][k] = wnorm;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / denom;
                sn[k] = h[k + 1][k] / denom;
            }
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k += 1;
            if wnorm == 0.0 || g[k].abs() <= target {
                break;
            }
            basis.push(w.iter().map(|v| v / wnorm).collect());
        }
        // back substitution on the k×k triangle
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = if h[i][i] != 0.0 { (g[i] - s) / h[i][i] } else { 0.0 };
        }
        for (yi, vi) in y.iter().zip(&basis) {
            axpy(*yi, vi, &mut x);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub linear: GmresOptions,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            linear: GmresOptions {
                tol: 1e-12,
                ..GmresOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    /// Seconds inside the dense linear solves; zero for the matrix-free variant.
    pub solve_s: f64,
}

/// Newton's method with full steps and GMRES inner solves; stops when `‖R(x)‖₂ ≤ tol`.
pub fn newton_solve(
    residual: impl Fn(&[f64]) -> Vec<f64>,
    jacobian_apply: impl Fn(&[f64], &[f64]) -> Vec<f64>,
    x0: &[f64],
    opts: &NewtonOptions,
) -> Result<NewtonSolution> {
    newton_loop(&residual, x0, opts, |x, r| {
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        gmres(|v| jacobian_apply(x, v), &neg, &opts.linear)
    })
}

/// Newton's method for small systems with an explicit dense Jacobian.
pub fn newton_solve_dense(
    residual: impl Fn(&[f64]) -> Vec<f64>,
    jacobian: impl Fn(&[f64]) -> DenseMatrix,
    x0: &[f64],
    opts: &NewtonOptions,
) -> Result<NewtonSolution> {
    let mut solve_s = 0.0;
    let mut sol = newton_loop(&residual, x0, opts, |x, r| {
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let j = jacobian(x);
        let clock = std::time::Instant::now();
        let dx = lu_solve(&j, &neg);
        solve_s += clock.elapsed().as_secs_f64();
        dx
    })?;
    sol.solve_s = solve_s;
    Ok(sol)
}

fn newton_loop(
    residual: &impl Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    opts: &NewtonOptions,
    mut solve: impl FnMut(&[f64], &[f64]) -> Result<Vec<f64>>,
) -> Result<NewtonSolution> {
    let mut x = x0.to_vec();
    let mut history = Vec::new();
    for it in 0..=opts.max_iter {
        let r = residual(&x);
        let rn = norm2(&r);
        history.push(rn);
        if rn <= opts.tol {
            return Ok(NewtonSolution {
                x,
                iterations: it,
                residual_history: history,
                solve_s: 0.0,
            });
        }
        if it == opts.max_iter || !rn.is_finite() {
            break;
        }
        let dx = solve(&x, &r)?;
        axpy(1.0, &dx, &mut x);
    }
    Err(Error::NotConverged {
        solver: "newton",
        iterations: opts.max_iter,
        residual: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}
