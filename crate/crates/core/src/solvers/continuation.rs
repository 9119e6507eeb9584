use std::time::Instant;

use crate::error::SolverError;
use crate::mesh::{prolong_boundary, refine_uniform, Mesh};
use crate::operator::DiscreteProblem;

use super::{
    max_violation, multiplier_residual_rd, recover_multiplier, solve_penalized, ProblemSpec, Solution,
    StateData,
};

/// One solve of the continuation.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationRow {
    pub level: usize,
    pub h: f64,
    pub n_nodes: usize,
    pub gamma: f64,
    pub newton: usize,
    pub pcg: usize,
    pub n_control_active: usize,
    pub n_state_active: usize,
    pub j: f64,
    pub r_d: f64,
    pub mcv: f64,
    pub criterion: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The refinement test held on the finest mesh.
    Criterion,
    /// `γ_max` was reached on the finest mesh.
    GammaMax,
    /// More than `n_max` steps.
    MaxSteps,
    /// An inner solve failed or did not converge.
    InnerFailure,
}

#[derive(Debug, Clone)]
pub struct ContinuationResult {
    pub rows: Vec<ContinuationRow>,
    pub stop: StopReason,
    /// Error of the failing inner solve for [`StopReason::InnerFailure`].
    pub failure: Option<SolverError>,
    /// Problem and solution of the last successful step.
    pub problem: Option<DiscreteProblem>,
    pub solution: Option<Solution>,
    pub gamma: f64,
    /// Approximate state multiplier of the last step.
    pub multiplier: Vec<(usize, f64)>,
}

impl ContinuationResult {
    pub fn succeeded(&self) -> bool {
        matches!(self.stop, StopReason::Criterion | StopReason::GammaMax)
    }
}

fn build(mesh: Mesh, spec: &ProblemSpec) -> Result<DiscreteProblem, SolverError> {
    let region = spec.state_bound.as_ref().map(|s| &s.region);
    DiscreteProblem::new(mesh, region, spec.target.clone(), spec.nu)
}

/// Moreau–Yosida continuation over the nested meshes obtained by refining
/// `coarsest` `levels − 1` times. Control bounds in `spec` are honoured by
/// the inner solver.
///
/// Each step solves the penalized problem warm-started from the previous
/// step, then moves to the next mesh when `r_d < C h²` (or `mcv ≤ e_∞`) and
/// multiplies `γ` by `τ`, capped at `γ_max`. A step that already ran at
/// `γ_max` always moves to the next mesh.
pub fn solve_state_constrained(
    coarsest: Mesh,
    levels: usize,
    spec: &ProblemSpec,
) -> Result<ContinuationResult, SolverError> {
    spec.validate()?;
    let sb = spec
        .state_bound
        .as_ref()
        .ok_or_else(|| SolverError::InvalidSpec("continuation needs a state bound".into()))?;
    if levels == 0 {
        return Err(SolverError::InvalidSpec("at least one mesh level is required".into()));
    }
    let cont = &spec.continuation;
    let gamma_max = cont.gamma_max.unwrap_or(f64::INFINITY);
    let c = spec.complementarity();

    let mut prob = build(coarsest, spec)?;
    let mut state = StateData::from_spec(&prob, sb);
    let mut bounds = spec.control_bound_vectors(&prob)?;
    let mut u = vec![0.0; prob.n_boundary()];
    let mut level = 0;
    let mut gamma = cont.gamma0.min(gamma_max);
    let mut rows = Vec::new();
    let mut last: Option<(DiscreteProblem, Solution, f64, StateData)> = None;
    let mut step = 0;

    let stop = loop {
        let start = Instant::now();
        let b = bounds.as_ref().map(|(l, h)| (l.as_slice(), h.as_slice()));
        let sol = match solve_penalized(&prob, gamma, &state, b, Some(&u), c, &spec.tolerances) {
            Ok(s) if s.stats.converged => s,
            Ok(s) => {
                let method = if b.is_some() { "combined Newton" } else { "penalized Newton" };
                let err = SolverError::NotConverged {
                    method,
                    iterations: s.stats.newton,
                };
                return Ok(partial(rows, last, StopReason::InnerFailure, Some(err)));
            }
            Err(e) => return Ok(partial(rows, last, StopReason::InnerFailure, Some(e))),
        };
        let h = prob.mesh().h();
        let r_d = multiplier_residual_rd(&prob, &sol.y, gamma, &state);
        let mcv = max_violation(&prob, &sol.y, &state);
        let criterion = r_d < cont.c_rd * h * h || cont.e_inf.is_some_and(|e| mcv <= e);
        rows.push(ContinuationRow {
            level,
            h,
            n_nodes: prob.mesh().num_nodes(),
            gamma,
            newton: sol.stats.newton,
            pcg: sol.stats.pcg,
            n_control_active: sol.stats.n_upper + sol.stats.n_lower,
            n_state_active: sol.stats.n_state_active,
            j: prob.objective(&sol.u),
            r_d,
            mcv,
            criterion,
            seconds: start.elapsed().as_secs_f64(),
        });
        let finest = level + 1 == levels;
        let at_gamma_max = gamma >= gamma_max;
        u = sol.u.clone();
        last = Some((prob.clone(), sol, gamma, state.clone()));
        if finest && criterion {
            break StopReason::Criterion;
        }
        if finest && at_gamma_max {
            break StopReason::GammaMax;
        }
        step += 1;
        if step > cont.n_max {
            break StopReason::MaxSteps;
        }
        if !finest && (criterion || at_gamma_max) {
            let fine_mesh = refine_uniform(prob.mesh());
            let fine = build(fine_mesh, spec)?;
            let fine_bounds = spec.control_bound_vectors(&fine)?;
            let clamp = fine_bounds.as_ref().map(|(l, h)| (l.as_slice(), h.as_slice()));
            u = prolong_boundary(&u, prob.mesh(), prob.sets(), fine.mesh(), fine.sets(), clamp)?;
            state = StateData::from_spec(&fine, sb);
            bounds = fine_bounds;
            prob = fine;
            level += 1;
        }
        gamma = (gamma * cont.tau).min(gamma_max);
    };
    Ok(partial(rows, last, stop, None))
}

fn partial(
    rows: Vec<ContinuationRow>,
    last: Option<(DiscreteProblem, Solution, f64, StateData)>,
    stop: StopReason,
    failure: Option<SolverError>,
) -> ContinuationResult {
    let mut out = ContinuationResult {
        rows,
        stop,
        failure,
        problem: None,
        solution: None,
        gamma: f64::NAN,
        multiplier: Vec::new(),
    };
    if let Some((prob, sol, gamma, state)) = last {
        out.multiplier = recover_multiplier(&prob, &sol.y, gamma, &state);
        out.problem = Some(prob);
        out.solution = Some(sol);
        out.gamma = gamma;
    }
    out
}
