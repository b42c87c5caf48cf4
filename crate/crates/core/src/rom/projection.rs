use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fom::implicit::StepOperator;
use crate::linalg::{axpy, dot, lu_solve, newton_solve_dense, norm2, DenseMatrix, NewtonOptions, Qr};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectionOptions {
    /// Steps abort when `cond(Φ)` exceeds this.
    pub max_condition: f64,
    pub newton: NewtonOptions,
    /// Gauss–Newton stops once `‖(JΦ)ᵀ(F(Φα) − b)‖` drops below this.
    pub stationarity_tol: f64,
    pub max_gauss_newton: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            max_condition: 1e10,
            newton: NewtonOptions::default(),
            stationarity_tol: 1e-10,
            max_gauss_newton: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub alpha: Vec<f64>,
    pub iterations: usize,
    /// `‖F(Φα) − b‖₂` for implicit steps, the L² projection residual for explicit ones.
    pub residual: f64,
    /// Seconds spent solving reduced (or least-squares) systems, excluding their assembly.
    pub solve_s: f64,
}

/// A basis matrix together with its QR factors.
#[derive(Debug, Clone)]
pub struct ProjectedBasis {
    phi: DenseMatrix,
    qr: Qr,
    /// Columns of the thin orthonormal factor.
    q: Vec<Vec<f64>>,
    condition: f64,
}

impl ProjectedBasis {
    pub fn new(phi: DenseMatrix, max_condition: f64) -> Result<Self> {
        let qr = Qr::new(&phi)?;
        qr.check_rank()?;
        let condition = qr.condition();
        if !(condition <= max_condition) {
            return Err(Error::IllConditioned { condition });
        }
        let q = qr.thin_q_columns();
        Ok(Self {
            phi,
            qr,
            q,
            condition,
        })
    }

    pub fn phi(&self) -> &DenseMatrix {
        &self.phi
    }

    pub fn order(&self) -> usize {
        self.phi.cols()
    }

    pub fn rows(&self) -> usize {
        self.phi.rows()
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn reconstruct(&self, alpha: &[f64]) -> Vec<f64> {
        self.phi.matvec(alpha)
    }

    pub fn least_squares(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.qr.least_squares(y)
    }

    fn check_op(&self, op: &dyn StepOperator, b: &[f64]) -> Result<()> {
        if op.len() != self.rows() {
            return Err(Error::dim("operator vs basis rows", self.rows(), op.len()));
        }
        if b.len() != self.rows() {
            return Err(Error::dim("projection rhs", self.rows(), b.len()));
        }
        Ok(())
    }

    /// `β = Rα` for a coefficient guess.
    fn to_q_coords(&self, alpha: &[f64]) -> Vec<f64> {
        self.qr.r().matvec(alpha)
    }

    fn columns_mapped(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<Vec<f64>> {
        self.q.iter().map(|c| f(c)).collect()
    }

    fn q_matvec(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows()];
        for (c, b) in self.q.iter().zip(beta) {
            axpy(*b, c, &mut out);
        }
        out
    }

    fn qt_vec(&self, y: &[f64]) -> Vec<f64> {
        self.q.iter().map(|c| dot(c, y)).collect()
    }

    /// `Qᵀ X` for `X` given by columns.
    fn qt_cols(&self, x: &[Vec<f64>]) -> DenseMatrix {
        DenseMatrix::from_fn(self.order(), x.len(), |i, k| dot(&self.q[i], &x[k]))
    }

    fn residual_norm(&self, op: &dyn StepOperator, b: &[f64], alpha: &[f64]) -> f64 {
        let mut res = op.apply(&self.reconstruct(alpha));
        res.iter_mut().zip(b).for_each(|(r, b)| *r -= b);
        norm2(&res)
    }

    /// Solves `ΦᵀF(Φα) = Φᵀb`, posed in the orthonormal coordinates `Φα = Qβ`.
    pub fn galerkin(
        &self,
        op: &dyn StepOperator,
        b: &[f64],
        alpha_guess: &[f64],
        opts: &ProjectionOptions,
    ) -> Result<StepOutcome> {
        self.check_op(op, b)?;
        let qtb = self.qt_vec(b);
        let (beta, iterations, solve_s) = if op.is_linear() {
            let aq = self.columns_mapped(|v| op.apply(v));
            let m = self.qt_cols(&aq);
            let clock = Instant::now();
            let beta = solve_projected(&m, &qtb)?;
            (beta, 1, clock.elapsed().as_secs_f64())
        } else {
            let sol = newton_solve_dense(
                |beta| {
                    let mut g = self.qt_vec(&op.apply(&self.q_matvec(beta)));
                    g.iter_mut().zip(&qtb).for_each(|(g, c)| *g -= c);
                    g
                },
                |beta| {
                    let u = self.q_matvec(beta);
                    self.qt_cols(&self.columns_mapped(|v| op.jacobian_apply(&u, v)))
                },
                &self.to_q_coords(alpha_guess),
                &opts.newton,
            )
            .map_err(|e| match e {
                Error::IllConditioned { .. } => Error::IllConditioned {
                    condition: self.condition,
                },
                other => other,
            })?;
            (sol.x, sol.iterations, sol.solve_s)
        };
        let alpha = self.qr.solve_r(&beta)?;
        let residual = self.residual_norm(op, b, &alpha);
        Ok(StepOutcome {
            alpha,
            iterations,
            residual,
            solve_s,
        })
    }

    /// Gauss–Newton on `min_α ‖F(Φα) − b‖₂`.
    pub fn minres(
        &self,
        op: &dyn StepOperator,
        b: &[f64],
        alpha_guess: &[f64],
        opts: &ProjectionOptions,
    ) -> Result<StepOutcome> {
        self.check_op(op, b)?;
        if op.is_linear() {
            let aq = DenseMatrix::from_columns(&self.columns_mapped(|v| op.apply(v)))?;
            let clock = Instant::now();
            let beta = Qr::new(&aq)?.least_squares(b)?;
            let solve_s = clock.elapsed().as_secs_f64();
            let alpha = self.qr.solve_r(&beta)?;
            let residual = self.residual_norm(op, b, &alpha);
            return Ok(StepOutcome {
                alpha,
                iterations: 1,
                residual,
                solve_s,
            });
        }
        let mut beta = self.to_q_coords(alpha_guess);
        let mut history = Vec::new();
        let mut solve_s = 0.0;
        for it in 0..=opts.max_gauss_newton {
            let u = self.q_matvec(&beta);
            let mut res = op.apply(&u);
            res.iter_mut().zip(b).for_each(|(r, b)| *r -= b);
            let jq_cols = self.columns_mapped(|v| op.jacobian_apply(&u, v));
            let grad = norm2(&jq_cols.iter().map(|c| dot(c, &res)).collect::<Vec<_>>());
            history.push(grad);
            if grad <= opts.stationarity_tol {
                let alpha = self.qr.solve_r(&beta)?;
                return Ok(StepOutcome {
                    alpha,
                    iterations: it,
                    residual: norm2(&res),
                    solve_s,
                });
            }
            if it == opts.max_gauss_newton {
                break;
            }
            let neg: Vec<f64> = res.iter().map(|v| -v).collect();
            let jq = DenseMatrix::from_columns(&jq_cols)?;
            let clock = Instant::now();
            let fac = Qr::new(&jq)?;
            fac.check_rank()?;
            let delta = fac.least_squares(&neg)?;
            solve_s += clock.elapsed().as_secs_f64();
            beta.iter_mut().zip(&delta).for_each(|(b, d)| *b += d);
        }
        Err(Error::NotConverged {
            solver: "gauss-newton",
            iterations: opts.max_gauss_newton,
            residual: *history.last().unwrap_or(&f64::NAN),
            history,
        })
    }

    /// L² projection of an explicit full-order update.
    pub fn explicit(&self, g_u: &[f64]) -> Result<StepOutcome> {
        let clock = Instant::now();
        let alpha = self.least_squares(g_u)?;
        let solve_s = clock.elapsed().as_secs_f64();
        let rec = self.reconstruct(&alpha);
        let residual = norm2(&rec.iter().zip(g_u).map(|(a, b)| a - b).collect::<Vec<_>>());
        Ok(StepOutcome {
            alpha,
            iterations: 0,
            residual,
            solve_s,
        })
    }
}

fn solve_projected(m: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    lu_solve(m, rhs).map_err(|e| match e {
        Error::IllConditioned { .. } => Error::IllConditioned {
            condition: Qr::new(m).map(|f| f.condition()).unwrap_or(f64::INFINITY),
        },
        other => other,
    })
}

/// One Galerkin step with a freshly factored basis.
pub fn online_step_galerkin(
    op: &dyn StepOperator,
    b: &[f64],
    phi: &DenseMatrix,
    alpha_guess: &[f64],
    opts: &ProjectionOptions,
) -> Result<StepOutcome> {
    ProjectedBasis::new(phi.clone(), opts.max_condition)?.galerkin(op, b, alpha_guess, opts)
}

pub fn online_step_minres(
    op: &dyn StepOperator,
    b: &[f64],
    phi: &DenseMatrix,
    alpha_guess: &[f64],
    opts: &ProjectionOptions,
) -> Result<StepOutcome> {
    ProjectedBasis::new(phi.clone(), opts.max_condition)?.minres(op, b, alpha_guess, opts)
}

/// `α = argmin ‖Φ_next α − G(u_r)‖₂`.
pub fn online_step_explicit(
    g: impl Fn(&[f64]) -> Result<Vec<f64>>,
    u_r: &[f64],
    phi_next: &DenseMatrix,
    opts: &ProjectionOptions,
) -> Result<StepOutcome> {
    let pb = ProjectedBasis::new(phi_next.clone(), opts.max_condition)?;
    let g_u = g(u_r)?;
    if g_u.len() != pb.rows() {
        return Err(Error::dim("explicit update vs basis rows", pb.rows(), g_u.len()));
    }
    pb.explicit(&g_u)
}

/// `Φ · argmin ‖Φβ − u‖`.
pub fn project_full_solution(u_full: &[f64], phi: &DenseMatrix) -> Result<Vec<f64>> {
    let qr = Qr::new(phi)?;
    qr.check_rank()?;
    Ok(phi.matvec(&qr.least_squares(u_full)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::flux::FluxRule;
    use crate::fom::implicit::{ImplicitOperator, TimeScheme};
    use crate::fom::mesh::Mesh1D;
    use crate::fom::problem::{Boundary, FomProblem, InitialCondition, Law};
    use crate::linalg::least_squares;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Dense(DenseMatrix);

    impl StepOperator for Dense {
        fn len(&self) -> usize {
            self.0.rows()
        }
        fn apply(&self, u: &[f64]) -> Vec<f64> {
            self.0.matvec(u)
        }
        fn jacobian_apply(&self, _: &[f64], v: &[f64]) -> Vec<f64> {
            self.0.matvec(v)
        }
        fn is_linear(&self) -> bool {
            true
        }
        fn rhs(&self, u: &[f64]) -> Vec<f64> {
            u.to_vec()
        }
    }

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn burgers_op(n: usize) -> (ImplicitOperator, Vec<f64>) {
        let p = FomProblem {
            law: Law::Burgers,
            initial_condition: InitialCondition::Sine {
                offset: 0.25,
                amplitude: 0.5,
                wavenumber: 1.0,
            },
            boundary: Boundary::Periodic,
        };
        let mesh = Mesh1D::uniform_periodic(-1.0, 1.0, n).unwrap();
        let op = ImplicitOperator::new(&p, &mesh, 0.5 * 2.0 / n as f64, TimeScheme::BackwardEuler, FluxRule::LaxFriedrichs)
            .unwrap();
        (op, p.initial_state(mesh.nodes()))
    }

    #[test]
    fn square_basis_recovers_full_step() {
        let (op, u0) = burgers_op(30);
        let full = op.step(&u0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi = DenseMatrix::from_fn(30, 30, |i, j| if i == j { 2.0 } else { 0.0 } + 0.1 * rng.gen_range(-1.0..1.0));
        let guess = least_squares(&phi, &u0).unwrap();
        let out = online_step_galerkin(&op, &op.rhs(&u0), &phi, &guess, &ProjectionOptions::default()).unwrap();
        let rec = phi.matvec(&out.alpha);
        for (a, b) in rec.iter().zip(&full) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn enriched_burgers_basis_reproduces_step() {
        let (op, u0) = burgers_op(60);
        let full = op.step(&u0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise: Vec<f64> = (0..60).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let q = crate::linalg::Qr::new(&DenseMatrix::from_columns(&[u0.clone(), full.clone(), noise]).unwrap())
            .unwrap()
            .thin_q();
        let guess = q.transpose_matvec(&u0);
        let out = online_step_galerkin(&op, &op.rhs(&u0), &q, &guess, &ProjectionOptions::default()).unwrap();
        let rec = q.matvec(&out.alpha);
        for (a, b) in rec.iter().zip(&full) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn representable_rhs_has_zero_projected_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Dense(DenseMatrix::from_fn(40, 40, |i, j| if i == j { 3.0 } else { 0.0 } + 0.1 * rng.gen_range(-1.0..1.0)));
        let phi = random(40, 6, &mut rng);
        let alpha: Vec<f64> = (0..6).map(|k| k as f64 - 2.0).collect();
        let b = a.apply(&phi.matvec(&alpha));
        let out = online_step_galerkin(&a, &b, &phi, &[0.0; 6], &ProjectionOptions::default()).unwrap();
        let mut res = a.apply(&phi.matvec(&out.alpha));
        res.iter_mut().zip(&b).for_each(|(r, b)| *r -= b);
        assert!(norm2(&phi.transpose_matvec(&res)) <= 1e-10);
    }

    #[test]
    fn minres_matches_qr_oracle_and_identity_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = Dense(random(50, 50, &mut rng));
        let phi = random(50, 5, &mut rng);
        let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let out = online_step_minres(&a, &b, &phi, &[0.0; 5], &ProjectionOptions::default()).unwrap();
        let oracle = least_squares(&a.0.matmul(&phi), &b).unwrap();
        for (x, y) in out.alpha.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-10);
        }
        let id = Dense(DenseMatrix::identity(50));
        let m = online_step_minres(&id, &b, &phi, &[0.0; 5], &ProjectionOptions::default()).unwrap();
        let g = online_step_galerkin(&id, &b, &phi, &[0.0; 5], &ProjectionOptions::default()).unwrap();
        for (x, y) in m.alpha.iter().zip(&g.alpha) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn nonlinear_minres_is_stationary() {
        let (op, u0) = burgers_op(40);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut cols = vec![u0.clone()];
        for _ in 0..4 {
            cols.push((0..40).map(|_| rng.gen_range(-1.0..1.0)).collect());
        }
        let phi = DenseMatrix::from_columns(&cols).unwrap();
        let guess = least_squares(&phi, &u0).unwrap();
        let b = op.rhs(&u0);
        let out = online_step_minres(&op, &b, &phi, &guess, &ProjectionOptions::default()).unwrap();
        let g = online_step_galerkin(&op, &b, &phi, &guess, &ProjectionOptions::default()).unwrap();
        assert!(out.residual <= g.residual + 1e-10);
    }

    #[test]
    fn explicit_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let phi = random(30, 4, &mut rng);
        let u = phi.matvec(&[1.0, -2.0, 0.5, 3.0]);
        let out = online_step_explicit(|v| Ok(v.to_vec()), &u, &phi, &ProjectionOptions::default()).unwrap();
        let rec = phi.matvec(&out.alpha);
        for (a, b) in rec.iter().zip(&u) {
            assert!((a - b).abs() < 1e-12);
        }
        let q = Qr::new(&phi).unwrap().thin_q();
        let y: Vec<f64> = (0..30).map(|i| (i as f64).cos()).collect();
        let out = online_step_explicit(|v| Ok(v.iter().map(|x| 2.0 * x).collect()), &y, &q, &Default::default()).unwrap();
        let expect = q.transpose_matvec(&y.iter().map(|x| 2.0 * x).collect::<Vec<_>>());
        for (a, b) in out.alpha.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let phi = random(25, 5, &mut rng);
        let inside = phi.matvec(&[0.3, 0.1, -1.0, 2.0, 0.0]);
        let p = project_full_solution(&inside, &phi).unwrap();
        assert!(p.iter().zip(&inside).all(|(a, b)| (a - b).abs() < 1e-12));
        let u: Vec<f64> = (0..25).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = project_full_solution(&u, &phi).unwrap();
        let res: Vec<f64> = u.iter().zip(&p).map(|(a, b)| a - b).collect();
        assert!(phi.transpose_matvec(&res).iter().all(|v| v.abs() < 1e-10));
        let probe = phi.matvec(&[1.0; 5]);
        let probe_err = norm2(&u.iter().zip(&probe).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(norm2(&res) <= probe_err);
    }

    #[test]
    fn rank_deficient_and_ill_conditioned_bases_are_rejected() {
        let phi = DenseMatrix::from_columns(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]]).unwrap();
        assert!(matches!(project_full_solution(&[1.0, 0.0, 0.0], &phi), Err(Error::RankDeficient { .. })));
        let phi = DenseMatrix::from_columns(&[vec![1.0, 0.0, 0.0], vec![1.0, 1e-11, 0.0]]).unwrap();
        let id = Dense(DenseMatrix::identity(3));
        assert!(matches!(
            online_step_galerkin(&id, &[1.0, 0.0, 0.0], &phi, &[0.0; 2], &Default::default()),
            Err(Error::IllConditioned { .. })
        ));
    }
}
