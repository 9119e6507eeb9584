//! Finite-element toolkit for linear-quadratic Dirichlet boundary control.
//!
//! The state solves a Laplace equation whose Dirichlet datum is the control;
//! the objective is a tracking term in `L²(Ω)` plus a Tikhonov term in
//! `L²(Γ)`. Everything is discretized with continuous piecewise linear
//! elements on simplicial meshes, and the optimization happens entirely in
//! the space of boundary coefficients through the reduced operator
//! `A = SᵀMS + νB`.
//!
//! Layout:
//!
//! * [`mesh`] builds the structured pentagon and cube meshes, refines them
//!   uniformly and classifies nodes.
//! * [`assembly`] produces the stiffness, mass, boundary mass and lumped
//!   mass matrices and projects target data.
//! * [`linalg`] holds the sparse matrix type, Cholesky/LU backed solvers and
//!   the preconditioned conjugate gradient method.
//! * [`operator`] implements the discrete control-to-state map, its adjoint
//!   (the variational normal derivative), the reduced operator and the
//!   assembled KKT systems.
//! * [`solvers`] contains the reduced PCG solver, the semismooth Newton
//!   solvers for control and penalized state constraints, and the
//!   continuation strategy over nested meshes.
//! * [`reference`] provides dense reference implementations used as
//!   independent oracles, and [`verify`] runs the property suite on them.

pub mod assembly;
pub mod field;
pub mod linalg;
pub mod mesh;
pub mod operator;
pub mod quadrature;
pub mod reference;
pub mod solvers;
pub mod verify;
pub mod vtk;

mod error;

pub use error::{AssemblyError, Error, LinalgError, MeshError, SolverError};
pub use field::{Region, ScalarFn};
pub use mesh::{IndexSets, Mesh};
pub use operator::DiscreteProblem;

/// Configures the internal thread pool used by the sparse factorizations.
///
/// `threads <= 1` selects sequential execution, which also makes every
/// floating point reduction order fixed.
pub fn set_threads(threads: usize) {
    if threads <= 1 {
        faer::set_global_parallelism(faer::Par::Seq);
    } else {
        faer::set_global_parallelism(faer::Par::rayon(threads));
    }
}

/// Reads `DCK_THREADS` and applies it with [`set_threads`]. Unset means one
/// thread.
pub fn threads_from_env() -> usize {
    let threads = std::env::var("DCK_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(1);
    set_threads(threads);
    threads
}
