//! Dense linear algebra, Krylov and Newton solvers, QR least squares and SVD.

pub mod dense;
pub mod krylov;
pub mod qr;
pub mod svd;

pub use dense::{axpy, dot, lu_solve, norm2, DenseMatrix};
pub use krylov::{
    gmres, gmres_from, newton_solve, newton_solve_dense, GmresOptions, GmresSolution,
    NewtonOptions, NewtonSolution,
};
pub use qr::{least_squares, Qr};
pub use svd::{snapshot_svd, svd_with, symmetric_eigen, thin_svd, SvdMethod, SvdResult};
