//! Sparse matrices, direct solvers and preconditioned conjugate gradients.

mod direct;
mod pcg;
mod sparse;

pub use direct::{solve_lu_checked, LuSolver, SpdSolver};
pub use pcg::{pcg, FnOperator, Identity, LinearOperator, PcgOptions, PcgOutcome, Preconditioner};
pub use sparse::CsrMatrix;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
