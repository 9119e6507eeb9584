//! Reduced PCG, semismooth Newton and Moreau–Yosida continuation solvers.

mod continuation;
mod models;
mod newton;
mod spec;

use std::time::Instant;

pub use continuation::{solve_state_constrained, ContinuationResult, ContinuationRow, StopReason};
pub use models::{ControlModel, PenaltyModel, StateSet};
pub use newton::{active_set_newton, ActiveSetModel, NewtonOptions, NewtonOutcome};
pub use spec::{ControlBounds, Continuation, ProblemSpec, StateBound, Tolerances};

use crate::error::SolverError;
use crate::linalg::{pcg, PcgOptions};
use crate::operator::DiscreteProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnconstrainedMethod {
    ReducedPcg,
    KktDirect,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    /// Linear solves of the Newton method; 1 for unconstrained solves.
    pub newton: usize,
    pub pcg: usize,
    pub n_upper: usize,
    pub n_lower: usize,
    pub n_state_active: usize,
    pub converged: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    /// Control multiplier on boundary positions, zero off the active sets.
    pub lambda: Vec<f64>,
    /// State active set, empty without a state constraint.
    pub state_active: Vec<usize>,
    pub stats: SolveStats,
}

/// Nodal state bound data on all nodes of a problem.
#[derive(Debug, Clone)]
pub struct StateData {
    pub bound: Vec<f64>,
    pub shift: Vec<f64>,
}

impl StateData {
    pub fn from_spec(prob: &DiscreteProblem, sb: &StateBound) -> Self {
        let nodes = prob.mesh().nodes();
        StateData {
            bound: nodes.iter().map(|x| sb.upper.eval(x)).collect(),
            shift: nodes.iter().map(|x| sb.shift.eval(x)).collect(),
        }
    }

    /// Bound `b` everywhere with zero shift.
    pub fn constant(prob: &DiscreteProblem, b: f64) -> Self {
        let n = prob.mesh().num_nodes();
        StateData {
            bound: vec![b; n],
            shift: vec![0.0; n],
        }
    }
}

fn pcg_options(tol: &Tolerances) -> PcgOptions {
    PcgOptions {
        rel_tol: tol.pcg_rel_tol,
        max_iter: tol.pcg_max_iter,
    }
}

fn newton_options(tol: &Tolerances, max_iter: usize, c: f64) -> NewtonOptions {
    NewtonOptions {
        max_iter,
        complementarity: c,
        pcg: pcg_options(tol),
    }
}

/// Default multiplier-residual tolerance `1e-10 √|Ω|`.
pub fn default_eps_lambda(prob: &DiscreteProblem) -> f64 {
    1e-10 * prob.mesh().volume().sqrt()
}

/// Solves `A u = f`.
pub fn solve_unconstrained(
    prob: &DiscreteProblem,
    method: UnconstrainedMethod,
    u0: Option<&[f64]>,
    tol: &Tolerances,
) -> Result<Solution, SolverError> {
    let start = Instant::now();
    let (u, pcg_its) = match method {
        UnconstrainedMethod::ReducedPcg => {
            let pre = prob.preconditioner(None)?;
            let op = crate::linalg::FnOperator::new(prob.n_boundary(), |x: &[f64], y: &mut [f64]| {
                y.copy_from_slice(&prob.apply_a(x));
            });
            let out = pcg(&op, prob.f(), &pre, u0, pcg_options(tol))?;
            if !out.converged {
                return Err(SolverError::PcgNotConverged {
                    iterations: out.iterations,
                    residual: out.rel_residual,
                });
            }
            (out.x, out.iterations)
        }
        UnconstrainedMethod::KktDirect => (prob.solve_kkt(&[], None)?.u, 0),
    };
    let y = prob.apply_s(&u);
    Ok(Solution {
        lambda: vec![0.0; u.len()],
        u,
        y,
        state_active: Vec::new(),
        stats: SolveStats {
            newton: 1,
            pcg: pcg_its,
            converged: true,
            seconds: start.elapsed().as_secs_f64(),
            ..Default::default()
        },
    })
}

fn finish<S>(prob: &DiscreteProblem, out: NewtonOutcome<S>, state_active: Vec<usize>, start: Instant) -> Solution {
    let y = prob.apply_s(&out.u);
    Solution {
        y,
        stats: SolveStats {
            newton: out.iterations,
            pcg: out.pcg_iterations,
            n_upper: out.n_upper,
            n_lower: out.n_lower,
            n_state_active: state_active.len(),
            converged: out.converged,
            seconds: start.elapsed().as_secs_f64(),
        },
        u: out.u,
        lambda: out.lambda,
        state_active,
    }
}

/// Semismooth Newton method for `α ≤ u ≤ β`. `u0` defaults to zero and
/// `lambda0` to `f − A u0`.
pub fn solve_control_constrained(
    prob: &DiscreteProblem,
    bounds: (&[f64], &[f64]),
    u0: Option<&[f64]>,
    lambda0: Option<Vec<f64>>,
    c: f64,
    tol: &Tolerances,
) -> Result<Solution, SolverError> {
    let start = Instant::now();
    let zero = vec![0.0; prob.n_boundary()];
    let model = ControlModel { prob };
    let opts = newton_options(tol, tol.max_newton_control, c);
    let out = active_set_newton(&model, Some(bounds), u0.unwrap_or(&zero), lambda0, &opts)?;
    Ok(finish(prob, out, Vec::new(), start))
}

/// Semismooth Newton method for the Moreau–Yosida penalized problem at a
/// fixed `γ`, optionally combined with control bounds.
pub fn solve_penalized(
    prob: &DiscreteProblem,
    gamma: f64,
    state: &StateData,
    bounds: Option<(&[f64], &[f64])>,
    u0: Option<&[f64]>,
    c: f64,
    tol: &Tolerances,
) -> Result<Solution, SolverError> {
    if !(gamma > 0.0) {
        return Err(SolverError::InvalidSpec(format!("gamma must be > 0, got {gamma}")));
    }
    let start = Instant::now();
    let zero = vec![0.0; prob.n_boundary()];
    let model = PenaltyModel {
        prob,
        gamma,
        bound: &state.bound,
        shift: &state.shift,
        eps_lambda: tol.eps_lambda.unwrap_or_else(|| default_eps_lambda(prob)),
    };
    let max_iter = if bounds.is_some() {
        tol.max_newton_control
    } else {
        tol.max_newton_penalized
    };
    let opts = newton_options(tol, max_iter, c);
    let out = active_set_newton(&model, bounds, u0.unwrap_or(&zero), None, &opts)?;
    // Report the active set belonging to the returned state.
    let y = prob.apply_s(&out.u);
    let active = model.set_from_state(&y).active;
    Ok(finish(prob, out, active, start))
}

/// `r_d = Σ_{j ∈ 𝔸_ω} L_jj (y_j − b_j)` with `𝔸_ω` the state active set at `y`.
pub fn multiplier_residual_rd(prob: &DiscreteProblem, y: &[f64], gamma: f64, state: &StateData) -> f64 {
    let lumped = &prob.fem().lumped;
    prob.sets()
        .omega
        .iter()
        .filter(|&&j| state.shift[j] + gamma * (y[j] - state.bound[j]) > 0.0)
        .map(|&j| lumped[j] * (y[j] - state.bound[j]))
        .sum()
}

/// Maximum nodal constraint violation over `𝕁`.
pub fn max_violation(prob: &DiscreteProblem, y: &[f64], state: &StateData) -> f64 {
    prob.sets()
        .omega
        .iter()
        .map(|&j| (y[j] - state.bound[j]).max(0.0))
        .fold(0.0, f64::max)
}

/// Dirac weights `L_jj(μ*_j + γ(y_j − b_j))` of the approximate state
/// multiplier on the active nodes.
pub fn recover_multiplier(prob: &DiscreteProblem, y: &[f64], gamma: f64, state: &StateData) -> Vec<(usize, f64)> {
    let lumped = &prob.fem().lumped;
    prob.sets()
        .omega
        .iter()
        .filter_map(|&j| {
            let v = state.shift[j] + gamma * (y[j] - state.bound[j]);
            (v > 0.0).then(|| (j, lumped[j] * v))
        })
        .collect()
}
