use faer::{Mat, Side};

use super::direct::SpdSolver;
use super::sparse::CsrMatrix;
use super::{dot, norm};
use crate::error::LinalgError;

/// A square linear map given only through its action.
pub trait LinearOperator {
    fn size(&self) -> usize;
    /// `y = op(x)`; `y` is overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn size(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        self.mul_vec_add(1.0, x, y);
    }
}

/// Adapts a closure into a [`LinearOperator`].
pub struct FnOperator<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(n: usize, f: F) -> Self {
        FnOperator { n, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn size(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

/// Approximate inverse applied to residuals.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

impl Preconditioner for SpdSolver {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        self.solve_in_place(z);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for PcgOptions {
    fn default() -> Self {
        PcgOptions {
            rel_tol: 1e-10,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PcgOutcome {
    pub x: Vec<f64>,
    /// Number of operator applications inside the iteration loop.
    pub iterations: usize,
    /// Final `‖rhs − op(x)‖ / ‖rhs‖`, always the true residual.
    pub rel_residual: f64,
    pub converged: bool,
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

impl PcgOutcome {
    /// Extreme eigenvalues of the Lanczos matrix assembled from the CG
    /// coefficients; they approximate the spectrum of the preconditioned
    /// operator from inside.
    pub fn ritz_extremes(&self) -> Option<(f64, f64)> {
        let k = self.alphas.len();
        if k == 0 {
            return None;
        }
        let mut t = Mat::<f64>::zeros(k, k);
        for j in 0..k {
            let mut d = 1.0 / self.alphas[j];
            if j > 0 {
                d += self.betas[j] / self.alphas[j - 1];
            }
            t[(j, j)] = d;
            if j + 1 < k {
                let e = self.betas[j + 1].sqrt() / self.alphas[j];
                t[(j, j + 1)] = e;
                t[(j + 1, j)] = e;
            }
        }
        let eig = t.self_adjoint_eigenvalues(Side::Lower).ok()?;
        let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Some((lo, hi))
    }
}

/// Preconditioned conjugate gradients.
///
/// Convergence is declared on the true residual `‖rhs − op(x)‖ ≤ rel_tol
/// ‖rhs‖`: whenever the recursively updated residual passes the test, the
/// true residual is recomputed and replaces it. Running out of iterations is
/// not an error; check [`PcgOutcome::converged`].
pub fn pcg(
    op: &dyn LinearOperator,
    rhs: &[f64],
    precond: &dyn Preconditioner,
    x0: Option<&[f64]>,
    opts: PcgOptions,
) -> Result<PcgOutcome, LinalgError> {
    let n = op.size();
    if rhs.len() != n {
        return Err(LinalgError::Dimension {
            expected: n,
            got: rhs.len(),
        });
    }
    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(x0) => {
            return Err(LinalgError::Dimension {
                expected: n,
                got: x0.len(),
            })
        }
        None => vec![0.0; n],
    };
    let bnorm = norm(rhs);
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    if bnorm == 0.0 {
        return Ok(PcgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
            alphas,
            betas,
        });
    }
    let tol = opts.rel_tol * bnorm;
    let mut q = vec![0.0; n];
    let true_residual = |x: &[f64], q: &mut Vec<f64>| -> Vec<f64> {
        op.apply(x, q);
        rhs.iter().zip(q.iter()).map(|(b, a)| b - a).collect()
    };
    let mut r = true_residual(&x, &mut q);
    let mut rnorm = norm(&r);
    if rnorm <= tol {
        return Ok(PcgOutcome {
            x,
            iterations: 0,
            rel_residual: rnorm / bnorm,
            converged: true,
            alphas,
            betas,
        });
    }
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut rho_old = 1.0;
    for it in 1..=opts.max_iter {
        precond.apply(&r, &mut z);
        let rho = dot(&r, &z);
        if !(rho > 0.0) {
            return Err(LinalgError::Breakdown(it));
        }
        if it == 1 {
            p.copy_from_slice(&z);
            betas.push(0.0);
        } else {
            let beta = rho / rho_old;
            betas.push(beta);
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        op.apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(LinalgError::Breakdown(it));
        }
        let alpha = rho / pq;
        alphas.push(alpha);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        rho_old = rho;
        rnorm = norm(&r);
        if rnorm <= tol {
            r = true_residual(&x, &mut q);
            rnorm = norm(&r);
            if rnorm <= tol {
                return Ok(PcgOutcome {
                    x,
                    iterations: it,
                    rel_residual: rnorm / bnorm,
                    converged: true,
                    alphas,
                    betas,
                });
            }
        }
    }
    let r = true_residual(&x, &mut q);
    Ok(PcgOutcome {
        x,
        iterations: opts.max_iter,
        rel_residual: norm(&r) / bnorm,
        converged: false,
        alphas,
        betas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_converges_in_one_step() {
        let op = CsrMatrix::identity(5);
        let b = [1.0, -2.0, 3.0, 0.5, 4.0];
        let out = pcg(&op, &b, &Identity, None, PcgOptions::default()).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
        for (x, y) in out.x.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn two_distinct_eigenvalues_take_two_steps() {
        let op = CsrMatrix::diagonal(&[1.0, 10.0]);
        let out = pcg(&op, &[1.0, 1.0], &Identity, None, PcgOptions::default()).unwrap();
        assert!(out.iterations <= 2);
        assert!((out.x[0] - 1.0).abs() < 1e-12 && (out.x[1] - 0.1).abs() < 1e-12);
        let (lo, hi) = out.ritz_extremes().unwrap();
        assert!((lo - 1.0).abs() < 1e-10 && (hi - 10.0).abs() < 1e-10);
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let op = CsrMatrix::identity(3);
        let out = pcg(&op, &[0.0; 3], &Identity, Some(&[1.0, 1.0, 1.0]), PcgOptions::default())
            .unwrap();
        assert_eq!(out.x, vec![0.0; 3]);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn indefinite_operator_breaks_down() {
        let op = CsrMatrix::diagonal(&[1.0, -1.0]);
        let err = pcg(&op, &[0.0, 1.0], &Identity, None, PcgOptions::default()).unwrap_err();
        assert!(matches!(err, LinalgError::Breakdown(_)));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let op = CsrMatrix::diagonal(&[1.0, 2.0, 3.0, 4.0]);
        let opts = PcgOptions {
            rel_tol: 1e-14,
            max_iter: 2,
        };
        let out = pcg(&op, &[1.0; 4], &Identity, None, opts).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
        assert!(out.rel_residual > 1e-14);
    }
}
