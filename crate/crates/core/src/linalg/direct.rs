use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::{MatMut, Side};

use super::sparse::CsrMatrix;
use crate::error::LinalgError;

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
///
/// The symbolic phase applies an approximate minimum degree ordering before
/// factorizing. Only the lower triangle of the input is read.
pub struct SpdSolver {
    n: usize,
    llt: Llt<usize, f64>,
}

impl std::fmt::Debug for SpdSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpdSolver").field("n", &self.n).finish()
    }
}

impl SpdSolver {
    pub fn new(mat: &CsrMatrix) -> Result<Self, LinalgError> {
        let n = mat.nrows();
        if mat.ncols() != n {
            return Err(LinalgError::Dimension {
                expected: n,
                got: mat.ncols(),
            });
        }
        if mat.diag().iter().any(|&d| !(d > 0.0)) {
            return Err(LinalgError::NotSpd);
        }
        let llt = mat
            .to_faer()?
            .sp_cholesky(Side::Lower)
            .map_err(|_| LinalgError::NotSpd)?;
        Ok(SpdSolver { n, llt })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        assert_eq!(rhs.len(), self.n);
        if self.n == 0 {
            return;
        }
        self.llt
            .solve_in_place(MatMut::from_column_major_slice_mut(rhs, self.n, 1));
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Sparse LU factorization with partial pivoting, used for the indefinite
/// KKT systems.
pub struct LuSolver {
    n: usize,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for LuSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuSolver").field("n", &self.n).finish()
    }
}

impl LuSolver {
    pub fn new(mat: &CsrMatrix) -> Result<Self, LinalgError> {
        let n = mat.nrows();
        if mat.ncols() != n {
            return Err(LinalgError::Dimension {
                expected: n,
                got: mat.ncols(),
            });
        }
        let csc = mat.to_faer()?;
        // faer panics instead of erroring on an exactly zero pivot.
        let lu = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| csc.sp_lu()))
            .map_err(|_| LinalgError::Singular)?
            .map_err(|_| LinalgError::Singular)?;
        Ok(LuSolver { n, lu })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        if self.n > 0 {
            self.lu
                .solve_in_place(MatMut::from_column_major_slice_mut(&mut x, self.n, 1));
        }
        x
    }
}

/// Solves `mat x = rhs` by sparse LU and rejects the result unless
/// `‖mat x − rhs‖ ≤ rel_tol ‖rhs‖`.
pub fn solve_lu_checked(mat: &CsrMatrix, rhs: &[f64], rel_tol: f64) -> Result<Vec<f64>, LinalgError> {
    let x = LuSolver::new(mat)?.solve(rhs);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::Singular);
    }
    let mut r = rhs.to_vec();
    mat.mul_vec_add(-1.0, &x, &mut r);
    let rel = super::norm(&r) / super::norm(rhs).max(f64::MIN_POSITIVE);
    if rel > rel_tol {
        return Err(LinalgError::Inaccurate(rel));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve_returns_rhs() {
        let s = SpdSolver::new(&CsrMatrix::identity(4)).unwrap();
        assert_eq!(s.solve(&[1.0, 2.0, 3.0, 4.0]), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn two_by_two() {
        let a = CsrMatrix::from_triplets(2, 2, [(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]);
        let x = SpdSolver::new(&a).unwrap().solve(&[1.0, 1.0]);
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((x[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = CsrMatrix::from_triplets(2, 2, [(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert_eq!(SpdSolver::new(&a).unwrap_err(), LinalgError::NotSpd);
        let b = CsrMatrix::diagonal(&[1.0, -1.0]);
        assert_eq!(SpdSolver::new(&b).unwrap_err(), LinalgError::NotSpd);
    }

    #[test]
    fn lu_solves_saddle_point() {
        // [[2, 1], [1, 0]] x = [3, 1] → x = (1, 1)
        let a = CsrMatrix::from_triplets(2, 2, [(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0)]);
        let x = solve_lu_checked(&a, &[3.0, 1.0], 1e-12).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lu_reports_singular() {
        let a = CsrMatrix::from_triplets(2, 2, [(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        assert!(solve_lu_checked(&a, &[1.0, 0.0], 1e-10).is_err());
    }
}
