use crate::error::SolverError;
use crate::linalg::Preconditioner;
use crate::operator::{DiscreteProblem, Penalty};

use super::newton::ActiveSetModel;

/// `A` and `f` of a discrete problem without state constraint.
pub struct ControlModel<'a> {
    pub prob: &'a DiscreteProblem,
}

impl ActiveSetModel for ControlModel<'_> {
    type State = ();

    fn size(&self) -> usize {
        self.prob.n_boundary()
    }

    fn state_set(&self, _u: &[f64], _prev: Option<&()>) -> ((), bool) {
        ((), false)
    }

    fn apply(&self, _: &(), u: &[f64]) -> Vec<f64> {
        self.prob.apply_a(u)
    }

    fn rhs(&self, _: &()) -> Vec<f64> {
        self.prob.f().to_vec()
    }

    fn preconditioner(&self, free: &[usize]) -> Result<Box<dyn Preconditioner>, SolverError> {
        let all = free.len() == self.size();
        Ok(Box::new(self.prob.preconditioner((!all).then_some(free))?))
    }
}

/// Active set `{j ∈ 𝕁 : μ* + γ(y − b) > 0}` of the penalized state constraint
/// with the matching diagonal `H`.
#[derive(Debug, Clone)]
pub struct StateSet {
    pub active: Vec<usize>,
    pub h: Vec<f64>,
}

impl PartialEq for StateSet {
    fn eq(&self, other: &Self) -> bool {
        self.active == other.active
    }
}

/// `Â = A + γSᵀHS` and `c = f + SᵀH(γb − μ*)` with `H` from the current
/// state active set.
pub struct PenaltyModel<'a> {
    pub prob: &'a DiscreteProblem,
    pub gamma: f64,
    /// Nodal upper bound, full length.
    pub bound: &'a [f64],
    /// Nodal shift `μ*`, full length.
    pub shift: &'a [f64],
    /// Tolerance of the multiplier residual test.
    pub eps_lambda: f64,
}

impl PenaltyModel<'_> {
    pub fn set_from_state(&self, y: &[f64]) -> StateSet {
        let lumped = &self.prob.fem().lumped;
        let mut h = vec![0.0; y.len()];
        let active: Vec<usize> = self
            .prob
            .sets()
            .omega
            .iter()
            .copied()
            .filter(|&j| self.shift[j] + self.gamma * (y[j] - self.bound[j]) > 0.0)
            .collect();
        for &j in &active {
            h[j] = lumped[j];
        }
        StateSet { active, h }
    }

    /// `‖μ − max(μ* + γ(y − b), 0)‖_L` where `μ = H(μ* + γ(y − b))` uses the
    /// set `prev`.
    pub fn multiplier_residual(&self, y: &[f64], prev: &StateSet) -> f64 {
        let lumped = &self.prob.fem().lumped;
        let mut s = 0.0;
        for &j in &self.prob.sets().omega {
            let v = self.shift[j] + self.gamma * (y[j] - self.bound[j]);
            let mu = if prev.h[j] != 0.0 { v } else { 0.0 };
            let d = mu - v.max(0.0);
            s += lumped[j] * d * d;
        }
        s.sqrt()
    }

    fn penalty<'b>(&'b self, st: &'b StateSet) -> Penalty<'b> {
        Penalty {
            gamma: self.gamma,
            h: &st.h,
            bound: self.bound,
            shift: self.shift,
        }
    }
}

impl ActiveSetModel for PenaltyModel<'_> {
    type State = StateSet;

    fn size(&self) -> usize {
        self.prob.n_boundary()
    }

    fn state_set(&self, u: &[f64], prev: Option<&StateSet>) -> (StateSet, bool) {
        let y = self.prob.apply_s(u);
        let st = self.set_from_state(&y);
        let small = prev.is_some_and(|p| self.multiplier_residual(&y, p) < self.eps_lambda);
        (st, small)
    }

    fn apply(&self, st: &StateSet, u: &[f64]) -> Vec<f64> {
        self.prob.apply_a_penalized(u, &st.h, self.gamma)
    }

    fn rhs(&self, st: &StateSet) -> Vec<f64> {
        self.prob.compute_c_penalized(&self.penalty(st))
    }

    fn preconditioner(&self, free: &[usize]) -> Result<Box<dyn Preconditioner>, SolverError> {
        let all = free.len() == self.size();
        Ok(Box::new(self.prob.preconditioner((!all).then_some(free))?))
    }
}
