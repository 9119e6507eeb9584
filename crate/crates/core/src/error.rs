use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("invalid mesh parameter: {0}")]
    InvalidParameter(String),
    #[error("node {0} lies in the constraint region but on the boundary")]
    OmegaTouchesBoundary(usize),
    #[error("meshes are not nested: {0}")]
    NotNested(String),
    #[error("vector length {got} does not match expected {expected}")]
    Length { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not symmetric positive definite")]
    NotSpd,
    #[error("operator not SPD: breakdown in conjugate gradient at iteration {0}")]
    Breakdown(usize),
    #[error("singular system")]
    Singular,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("direct solve residual {0:.3e} above tolerance")]
    Inaccurate(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("cell {0} has zero volume")]
    DegenerateCell(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),
    #[error("{method} did not converge within {iterations} iterations")]
    NotConverged { method: &'static str, iterations: usize },
    #[error("conjugate gradient stopped at relative residual {residual:.3e} after {iterations} iterations")]
    PcgNotConverged { iterations: usize, residual: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

/// Crate-wide error.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}
