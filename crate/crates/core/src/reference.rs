//! Dense reference implementations.
//!
//! Everything here works with explicitly formed dense matrices and direct
//! solves, so it shares no code path with the matrix-free operators or the
//! PCG-based Newton solvers. Only meant for meshes with a few hundred nodes.

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::error::SolverError;
use crate::linalg::Preconditioner;
use crate::operator::DiscreteProblem;
use crate::solvers::ActiveSetModel;

pub type Dense = Vec<Vec<f64>>;

fn to_mat(a: &Dense) -> Mat<f64> {
    Mat::from_fn(a.len(), a.first().map_or(0, Vec::len), |i, j| a[i][j])
}

/// Solves the square system `a x = b` by LU with partial pivoting.
pub fn dense_solve(a: &Dense, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    if n == 0 {
        return Vec::new();
    }
    let lu = to_mat(a).as_ref().partial_piv_lu();
    let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let x = lu.solve(rhs.as_ref());
    (0..n).map(|i| x[(i, 0)]).collect()
}

pub fn mat_vec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

fn mat_t_vec(a: &Dense, x: &[f64]) -> Vec<f64> {
    let ncols = a.first().map_or(0, Vec::len);
    let mut out = vec![0.0; ncols];
    for (row, xi) in a.iter().zip(x) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v * xi;
        }
    }
    out
}

fn sub(a: &Dense, rows: &[usize], cols: &[usize]) -> Dense {
    rows.iter().map(|&i| cols.iter().map(|&j| a[i][j]).collect()).collect()
}

/// Dense reduced quantities of a discrete problem.
#[derive(Debug, Clone)]
pub struct DenseReduced {
    /// Control-to-state matrix, `N × N_𝔹`.
    pub s: Dense,
    pub a: Dense,
    pub f: Vec<f64>,
    pub c_omega: f64,
    /// Full mass matrix.
    pub m: Dense,
    pub lumped: Vec<f64>,
    pub omega: Vec<usize>,
}

impl DenseReduced {
    /// Builds `S` column by column from `K_𝕀𝕀 X = −K_𝕀𝔹`, then
    /// `A = SᵀMS + νB_𝔹𝔹` and `f = SᵀM y_Ω`.
    pub fn new(prob: &DiscreteProblem) -> Self {
        let sets = prob.sets();
        let fem = prob.fem();
        let k = fem.k.to_dense();
        let m = fem.m.to_dense();
        let b = fem.b.to_dense();
        let (ii, bb) = (&sets.interior, &sets.boundary);
        let n = sets.num_nodes();
        let nb = bb.len();
        let k_ii = to_mat(&sub(&k, ii, ii));
        let k_ib = sub(&k, ii, bb);
        let rhs = Mat::from_fn(ii.len(), nb, |i, j| -k_ib[i][j]);
        let x = k_ii.as_ref().partial_piv_lu().solve(rhs.as_ref());
        let mut s = vec![vec![0.0; nb]; n];
        for (r, &node) in ii.iter().enumerate() {
            for c in 0..nb {
                s[node][c] = x[(r, c)];
            }
        }
        for (c, &node) in bb.iter().enumerate() {
            s[node][c] = 1.0;
        }
        let ms: Dense = {
            let mut out = vec![vec![0.0; nb]; n];
            for i in 0..n {
                for l in 0..n {
                    if m[i][l] != 0.0 {
                        for c in 0..nb {
                            out[i][c] += m[i][l] * s[l][c];
                        }
                    }
                }
            }
            out
        };
        let mut a = vec![vec![0.0; nb]; nb];
        for p in 0..nb {
            for q in 0..nb {
                let mut v = prob.nu() * b[bb[p]][bb[q]];
                for i in 0..n {
                    v += s[i][p] * ms[i][q];
                }
                a[p][q] = v;
            }
        }
        let my = mat_vec(&m, prob.y_omega());
        let f = mat_t_vec(&s, &my);
        let c_omega = 0.5 * prob.y_omega().iter().zip(&my).map(|(p, q)| p * q).sum::<f64>();
        DenseReduced {
            s,
            a,
            f,
            c_omega,
            m,
            lumped: fem.lumped.clone(),
            omega: sets.omega.clone(),
        }
    }

    pub fn objective(&self, u: &[f64]) -> f64 {
        let au = mat_vec(&self.a, u);
        0.5 * u.iter().zip(&au).map(|(p, q)| p * q).sum::<f64>() - u.iter().zip(&self.f).map(|(p, q)| p * q).sum::<f64>()
            + self.c_omega
    }

    pub fn state(&self, u: &[f64]) -> Vec<f64> {
        mat_vec(&self.s, u)
    }

    /// `A u = f` by a direct solve.
    pub fn solve_unconstrained(&self) -> Vec<f64> {
        dense_solve(&self.a, &self.f)
    }

    /// `A + γSᵀHS` and `f + SᵀH(γb − μ*)` for the given diagonal `h`.
    fn penalized_system(&self, gamma: f64, h: &[f64], bound: &[f64], shift: &[f64]) -> (Dense, Vec<f64>) {
        let nb = self.f.len();
        let mut a = self.a.clone();
        let mut f = self.f.clone();
        for &j in &self.omega {
            if h[j] == 0.0 {
                continue;
            }
            let row = &self.s[j];
            for p in 0..nb {
                f[p] += row[p] * h[j] * (gamma * bound[j] - shift[j]);
                for q in 0..nb {
                    a[p][q] += gamma * h[j] * row[p] * row[q];
                }
            }
        }
        (a, f)
    }

    fn state_diag(&self, y: &[f64], gamma: f64, bound: &[f64], shift: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; y.len()];
        for &j in &self.omega {
            if shift[j] + gamma * (y[j] - bound[j]) > 0.0 {
                h[j] = self.lumped[j];
            }
        }
        h
    }

    /// Gradient of the penalized reduced objective
    /// `½uᵀAu − fᵀu + 1/(2γ) Σ_𝕁 L_jj max(0, μ* + γ(Su − b))²`.
    pub fn penalized_gradient(&self, u: &[f64], gamma: f64, bound: &[f64], shift: &[f64]) -> Vec<f64> {
        let y = self.state(u);
        let mut load = vec![0.0; y.len()];
        for &j in &self.omega {
            load[j] = self.lumped[j] * (shift[j] + gamma * (y[j] - bound[j])).max(0.0);
        }
        let mut g = mat_vec(&self.a, u);
        let st = mat_t_vec(&self.s, &load);
        for k in 0..g.len() {
            g[k] += st[k] - self.f[k];
        }
        g
    }

    /// Semismooth Newton on the gradient of the penalized objective with
    /// dense direct solves, stopped on the gradient norm.
    pub fn solve_penalized(&self, gamma: f64, bound: &[f64], shift: &[f64]) -> Result<Vec<f64>, SolverError> {
        let mut u = vec![0.0; self.f.len()];
        let scale = self.f.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        for _ in 0..100 {
            let g = self.penalized_gradient(&u, gamma, bound, shift);
            if g.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-13 * scale * gamma.max(1.0) {
                return Ok(u);
            }
            let h = self.state_diag(&self.state(&u), gamma, bound, shift);
            let (a, _) = self.penalized_system(gamma, &h, bound, shift);
            let step = dense_solve(&a, &g);
            u.iter_mut().zip(&step).for_each(|(x, d)| *x -= d);
        }
        Err(SolverError::NotConverged {
            method: "dense penalized Newton",
            iterations: 100,
        })
    }

    /// Box-constrained QP `min ½uᵀÂu − ĉᵀu`, `lo ≤ u ≤ hi`, where `Â` and `ĉ`
    /// include the penalty when `penalty` is given. Primal-dual active set
    /// iteration with dense direct solves; the result is checked against the
    /// KKT conditions.
    pub fn solve_box(
        &self,
        lo: &[f64],
        hi: &[f64],
        penalty: Option<(f64, &[f64], &[f64])>,
    ) -> Result<Vec<f64>, SolverError> {
        let nb = self.f.len();
        let zero_h = vec![0.0; self.s.len()];
        let system = |u: &[f64]| match penalty {
            Some((gamma, bound, shift)) => {
                let h = self.state_diag(&self.state(u), gamma, bound, shift);
                self.penalized_system(gamma, &h, bound, shift)
            }
            None => self.penalized_system(0.0, &zero_h, &zero_h, &zero_h),
        };
        let mut u = vec![0.0; nb];
        let (a0, c0) = system(&u);
        let mut lambda: Vec<f64> = c0.iter().zip(mat_vec(&a0, &u)).map(|(c, au)| c - au).collect();
        let mut last: Option<(Vec<i8>, Vec<f64>)> = None;
        for _ in 0..200 {
            let marks: Vec<i8> = (0..nb)
                .map(|k| {
                    if lambda[k] + u[k] - hi[k] > 0.0 {
                        1
                    } else if lambda[k] + u[k] - lo[k] < 0.0 {
                        -1
                    } else {
                        0
                    }
                })
                .collect();
            let (a, c) = system(&u);
            let h_sig = match penalty {
                Some((gamma, bound, shift)) => self.state_diag(&self.state(&u), gamma, bound, shift),
                None => Vec::new(),
            };
            if let Some((m, h)) = &last {
                if *m == marks && *h == h_sig {
                    return self.check_box(&u, &lambda, lo, hi, penalty);
                }
            }
            let free: Vec<usize> = (0..nb).filter(|&k| marks[k] == 0).collect();
            let mut next: Vec<f64> = (0..nb)
                .map(|k| match marks[k] {
                    1 => hi[k],
                    -1 => lo[k],
                    _ => 0.0,
                })
                .collect();
            let a_fixed = mat_vec(&a, &next);
            let rhs: Vec<f64> = free.iter().map(|&k| c[k] - a_fixed[k]).collect();
            let x = dense_solve(&sub(&a, &free, &free), &rhs);
            for (&k, v) in free.iter().zip(x) {
                next[k] = v;
            }
            let an = mat_vec(&a, &next);
            lambda = (0..nb).map(|k| if marks[k] == 0 { 0.0 } else { c[k] - an[k] }).collect();
            u = next;
            last = Some((marks, h_sig));
        }
        Err(SolverError::NotConverged {
            method: "dense active set",
            iterations: 200,
        })
    }

    fn check_box(
        &self,
        u: &[f64],
        lambda: &[f64],
        lo: &[f64],
        hi: &[f64],
        penalty: Option<(f64, &[f64], &[f64])>,
    ) -> Result<Vec<f64>, SolverError> {
        let g = match penalty {
            Some((gamma, bound, shift)) => self.penalized_gradient(u, gamma, bound, shift),
            None => {
                let au = mat_vec(&self.a, u);
                au.iter().zip(&self.f).map(|(p, q)| p - q).collect()
            }
        };
        let tol = 1e-9 * self.f.iter().map(|v| v.abs()).fold(1.0, f64::max);
        for k in 0..u.len() {
            let feasible = u[k] >= lo[k] - tol && u[k] <= hi[k] + tol;
            let sign_ok = (lambda[k] >= -tol || (u[k] - lo[k]).abs() <= tol)
                && (lambda[k] <= tol || (u[k] - hi[k]).abs() <= tol);
            let stationary = (g[k] + lambda[k]).abs() <= tol;
            if !(feasible && sign_ok && stationary) {
                return Err(SolverError::NotConverged {
                    method: "dense active set (KKT check)",
                    iterations: 0,
                });
            }
        }
        Ok(u.to_vec())
    }
}

/// A fixed dense quadratic `½uᵀAu − fᵀu` for the active-set Newton solver,
/// preconditioned by exact solves with the free block.
#[derive(Debug, Clone)]
pub struct DenseModel {
    pub a: Dense,
    pub f: Vec<f64>,
}

struct ExactBlock(Dense);

impl Preconditioner for ExactBlock {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(&dense_solve(&self.0, r));
    }
}

impl ActiveSetModel for DenseModel {
    type State = ();

    fn size(&self) -> usize {
        self.f.len()
    }

    fn state_set(&self, _u: &[f64], _prev: Option<&()>) -> ((), bool) {
        ((), false)
    }

    fn apply(&self, _: &(), u: &[f64]) -> Vec<f64> {
        mat_vec(&self.a, u)
    }

    fn rhs(&self, _: &()) -> Vec<f64> {
        self.f.clone()
    }

    fn preconditioner(&self, free: &[usize]) -> Result<Box<dyn Preconditioner>, SolverError> {
        Ok(Box::new(ExactBlock(sub(&self.a, free, free))))
    }
}

/// Boundary mass matrix of the segment `[-1, 1]` with nodes `{-1, 0, 1}`
/// assembled from two mid-side rule segments.
pub fn segment_boundary_mass() -> Dense {
    let mut b = vec![vec![0.0; 3]; 3];
    for (p, q) in [(0, 1), (1, 2)] {
        let e = crate::assembly::facet_mass(2, 1.0);
        let idx = [p, q];
        for i in 0..2 {
            for j in 0..2 {
                b[idx[i]][idx[j]] += e[i][j];
            }
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarFn;
    use crate::mesh::build_pentagon_mesh;

    #[test]
    fn dense_solve_small() {
        let x = dense_solve(&vec![vec![2.0, 1.0], vec![1.0, 3.0]], &[3.0, 5.0]);
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
    }

    #[test]
    fn segment_mass_matches_closed_form() {
        let b = segment_boundary_mass();
        let expected = [[2.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((b[i][j] - expected[i][j] / 6.0).abs() < 1e-16);
            }
        }
    }

    #[test]
    fn dense_reduced_constant_target_at_zero() {
        let p = DiscreteProblem::new(build_pentagon_mesh(4).unwrap(), None, ScalarFn::constant(1.0), 1.0).unwrap();
        let r = DenseReduced::new(&p);
        assert!((r.objective(&vec![0.0; p.n_boundary()]) - 0.4375).abs() < 1e-14);
        // A is symmetric.
        for i in 0..r.a.len() {
            for j in 0..i {
                assert!((r.a[i][j] - r.a[j][i]).abs() < 1e-14);
            }
        }
    }
}
