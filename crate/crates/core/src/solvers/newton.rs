//! Primal-dual active set iteration for box-constrained quadratic programs
//! `min ½uᵀÂu − cᵀu` with `α ≤ u ≤ β`, where `Â` and `c` may depend on an
//! additional state active set that is updated alongside the control sets.

use crate::error::SolverError;
use crate::linalg::{pcg, FnOperator, PcgOptions, Preconditioner};

/// Reduced quadratic model driven by [`active_set_newton`].
pub trait ActiveSetModel {
    /// Active set of the state constraint, `()` when there is none.
    type State: PartialEq + Clone;

    fn size(&self) -> usize;

    /// State active set at the control `u`. `prev` is the set used to compute
    /// `u`; the returned flag reports that the multiplier residual with
    /// respect to `prev` is below tolerance.
    fn state_set(&self, u: &[f64], prev: Option<&Self::State>) -> (Self::State, bool);

    /// `Â u` for the given state set.
    fn apply(&self, state: &Self::State, u: &[f64]) -> Vec<f64>;

    /// `c` for the given state set.
    fn rhs(&self, state: &Self::State) -> Vec<f64>;

    /// Preconditioner for the block of `Â` on the positions `free`.
    fn preconditioner(&self, free: &[usize]) -> Result<Box<dyn Preconditioner>, SolverError>;
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Complementarity parameter `c > 0` of the active-set prediction.
    pub complementarity: f64,
    pub pcg: PcgOptions,
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome<S> {
    pub u: Vec<f64>,
    /// Control multiplier, zero off the active sets.
    pub lambda: Vec<f64>,
    pub state: S,
    /// Number of linear solves.
    pub iterations: usize,
    pub pcg_iterations: usize,
    pub n_upper: usize,
    pub n_lower: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mark {
    Free,
    Upper,
    Lower,
}

fn predict(u: &[f64], lambda: &[f64], bounds: Option<(&[f64], &[f64])>, c: f64) -> Vec<Mark> {
    let Some((lo, hi)) = bounds else {
        return vec![Mark::Free; u.len()];
    };
    (0..u.len())
        .map(|k| {
            // With lo < hi both tests cannot hold at once.
            if lambda[k] + c * (u[k] - hi[k]) > 0.0 {
                Mark::Upper
            } else if lambda[k] + c * (u[k] - lo[k]) < 0.0 {
                Mark::Lower
            } else {
                Mark::Free
            }
        })
        .collect()
}

/// Runs the semismooth Newton method from `u0`.
///
/// Stops when the control and state active sets repeat, or, without control
/// bounds, when the model reports a small multiplier residual. Running out
/// of iterations returns the last iterate with `converged == false`.
pub fn active_set_newton<M: ActiveSetModel>(
    model: &M,
    bounds: Option<(&[f64], &[f64])>,
    u0: &[f64],
    lambda0: Option<Vec<f64>>,
    opts: &NewtonOptions,
) -> Result<NewtonOutcome<M::State>, SolverError> {
    let n = model.size();
    assert_eq!(u0.len(), n, "initial control length");
    let mut u = u0.to_vec();
    let (mut state, _) = model.state_set(&u, None);
    let mut lambda = match lambda0 {
        Some(l) => l,
        None => {
            let mut l = model.rhs(&state);
            let au = model.apply(&state, &u);
            l.iter_mut().zip(&au).for_each(|(a, b)| *a -= b);
            l
        }
    };
    let mut prev: Option<(Vec<Mark>, M::State)> = None;
    let mut cached_pre: Option<(Vec<usize>, Box<dyn Preconditioner>)> = None;
    let mut iterations = 0;
    let mut pcg_iterations = 0;
    let mut converged = false;
    let mut marks;
    loop {
        marks = predict(&u, &lambda, bounds, opts.complementarity);
        if let Some((pm, ps)) = &prev {
            if *pm == marks && *ps == state {
                converged = true;
                break;
            }
        }
        if iterations == opts.max_iter {
            break;
        }
        let free: Vec<usize> = (0..n).filter(|&k| marks[k] == Mark::Free).collect();
        let mut fixed = vec![0.0; n];
        if let Some((lo, hi)) = bounds {
            for k in 0..n {
                match marks[k] {
                    Mark::Upper => fixed[k] = hi[k],
                    Mark::Lower => fixed[k] = lo[k],
                    Mark::Free => {}
                }
            }
        }
        let rhs_full = {
            let mut r = model.rhs(&state);
            if free.len() < n {
                let a_fixed = model.apply(&state, &fixed);
                r.iter_mut().zip(&a_fixed).for_each(|(a, b)| *a -= b);
            }
            r
        };
        let mut next = fixed;
        if !free.is_empty() {
            if cached_pre.as_ref().map_or(true, |(f, _)| *f != free) {
                cached_pre = Some((free.clone(), model.preconditioner(&free)?));
            }
            let pre = &cached_pre.as_ref().expect("preconditioner was just set").1;
            let rhs_f: Vec<f64> = free.iter().map(|&k| rhs_full[k]).collect();
            let x0: Vec<f64> = free.iter().map(|&k| u[k]).collect();
            let st = &state;
            let op = FnOperator::new(free.len(), |x: &[f64], y: &mut [f64]| {
                let mut full = vec![0.0; n];
                for (&k, &v) in free.iter().zip(x) {
                    full[k] = v;
                }
                let a = model.apply(st, &full);
                for (yk, &k) in y.iter_mut().zip(&free) {
                    *yk = a[k];
                }
            });
            let out = pcg(&op, &rhs_f, pre.as_ref(), Some(&x0), opts.pcg)?;
            pcg_iterations += out.iterations;
            if !out.converged {
                return Err(SolverError::PcgNotConverged {
                    iterations: out.iterations,
                    residual: out.rel_residual,
                });
            }
            for (&k, &v) in free.iter().zip(&out.x) {
                next[k] = v;
            }
        }
        iterations += 1;
        u = next;
        lambda = model.rhs(&state);
        let au = model.apply(&state, &u);
        for k in 0..n {
            lambda[k] = if marks[k] == Mark::Free { 0.0 } else { lambda[k] - au[k] };
        }
        let (new_state, small) = model.state_set(&u, Some(&state));
        prev = Some((marks.clone(), std::mem::replace(&mut state, new_state)));
        if small && bounds.is_none() {
            marks = vec![Mark::Free; n];
            converged = true;
            break;
        }
    }
    let n_upper = marks.iter().filter(|&&m| m == Mark::Upper).count();
    let n_lower = marks.iter().filter(|&&m| m == Mark::Lower).count();
    Ok(NewtonOutcome {
        u,
        lambda,
        state,
        iterations,
        pcg_iterations,
        n_upper,
        n_lower,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::DenseModel;

    fn opts() -> NewtonOptions {
        NewtonOptions {
            max_iter: 50,
            complementarity: 1.0,
            pcg: PcgOptions::default(),
        }
    }

    #[test]
    fn boundary_mass_projection_differs_from_pointwise_clip() {
        // Segment [-1, 1] with nodes {-1, 0, 1}: boundary mass by the mid-side rule.
        let b = vec![
            vec![1.0 / 3.0, 1.0 / 6.0, 0.0],
            vec![1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
            vec![0.0, 1.0 / 6.0, 1.0 / 3.0],
        ];
        let w = [-2.0, 1.0, 1.0];
        let f: Vec<f64> = b.iter().map(|r| r.iter().zip(&w).map(|(a, c)| a * c).sum()).collect();
        let model = DenseModel { a: b, f };
        let lo = vec![f64::NEG_INFINITY; 3];
        let hi = vec![0.0; 3];
        let out = active_set_newton(&model, Some((&lo, &hi)), &[0.0; 3], None, &opts()).unwrap();
        assert!(out.converged);
        let expected = [-1.5, 0.0, 0.0];
        for (a, e) in out.u.iter().zip(&expected) {
            assert!((a - e).abs() < 1e-12, "{:?}", out.u);
        }
        // The pointwise clip of w would be (-2, 0, 0).
        assert!((out.u[0] + 2.0).abs() > 0.4);
    }

    #[test]
    fn unconstrained_dense_converges_in_one_solve() {
        let model = DenseModel {
            a: vec![vec![4.0, 1.0], vec![1.0, 3.0]],
            f: vec![1.0, 2.0],
        };
        let out = active_set_newton(&model, None, &[0.0; 2], None, &opts()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert!((out.u[0] - 1.0 / 11.0).abs() < 1e-12);
        assert!((out.u[1] - 7.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let model = DenseModel {
            a: vec![vec![2.0, -1.0], vec![-1.0, 2.0]],
            f: vec![5.0, -5.0],
        };
        let lo = vec![-1.0; 2];
        let hi = vec![1.0; 2];
        let mut o = opts();
        o.max_iter = 0;
        let out = active_set_newton(&model, Some((&lo, &hi)), &[0.0; 2], None, &o).unwrap();
        assert!(!out.converged);
        o.max_iter = 10;
        let out = active_set_newton(&model, Some((&lo, &hi)), &[0.0; 2], None, &o).unwrap();
        assert!(out.converged);
        assert_eq!(out.u, vec![1.0, -1.0]);
    }
}
