use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::field::{Region, ScalarFn};
use crate::operator::DiscreteProblem;

/// Pointwise bounds `α ≤ u ≤ β` on the boundary. A missing side is unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBounds {
    #[serde(default)]
    pub lower: Option<ScalarFn>,
    #[serde(default)]
    pub upper: Option<ScalarFn>,
}

/// Upper state bound `y ≤ b` on the closed region `ω̄`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateBound {
    pub region: Region,
    pub upper: ScalarFn,
    /// Moreau–Yosida shift `μ*`.
    #[serde(default = "zero_fn")]
    pub shift: ScalarFn,
}

fn zero_fn() -> ScalarFn {
    ScalarFn::constant(0.0)
}

/// Penalty continuation and mesh-refinement parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Continuation {
    pub gamma0: f64,
    /// Growth factor `τ > 1`.
    pub tau: f64,
    /// Upper limit for `γ`; once reached on the finest mesh the run stops.
    #[serde(default)]
    pub gamma_max: Option<f64>,
    /// Constant `C` of the test `r_d < C h²`.
    pub c_rd: f64,
    /// Optional bound `e_∞` of the alternative test `mcv ≤ e_∞`.
    #[serde(default)]
    pub e_inf: Option<f64>,
    pub n_max: usize,
}

impl Default for Continuation {
    fn default() -> Self {
        Continuation {
            gamma0: 1.0,
            tau: 10.0,
            gamma_max: None,
            c_rd: 1.0,
            e_inf: None,
            n_max: 30,
        }
    }
}

/// Iteration limits and tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub pcg_rel_tol: f64,
    pub pcg_max_iter: usize,
    /// Multiplier-residual stopping tolerance for the penalized Newton
    /// method; `None` means `1e-10 √|Ω|`.
    pub eps_lambda: Option<f64>,
    pub max_newton_control: usize,
    pub max_newton_penalized: usize,
    /// Complementarity parameter `c`; `None` means `ν`, or 1 when `ν = 0`.
    pub complementarity: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            pcg_rel_tol: 1e-10,
            pcg_max_iter: 10_000,
            eps_lambda: None,
            max_newton_control: 50,
            max_newton_penalized: 40,
            complementarity: None,
        }
    }
}

/// Full description of a problem apart from the mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub nu: f64,
    pub target: ScalarFn,
    #[serde(default)]
    pub control_bounds: Option<ControlBounds>,
    #[serde(default)]
    pub state_bound: Option<StateBound>,
    #[serde(default)]
    pub continuation: Continuation,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl ProblemSpec {
    pub fn unconstrained(nu: f64, target: ScalarFn) -> Self {
        ProblemSpec {
            nu,
            target,
            control_bounds: None,
            state_bound: None,
            continuation: Continuation::default(),
            tolerances: Tolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidSpec(m));
        if !(self.nu >= 0.0) || !self.nu.is_finite() {
            return bad(format!("nu must be finite and >= 0, got {}", self.nu));
        }
        let c = &self.continuation;
        if !(c.gamma0 > 0.0) {
            return bad(format!("gamma0 must be > 0, got {}", c.gamma0));
        }
        if !(c.tau > 1.0) {
            return bad(format!("tau must be > 1, got {}", c.tau));
        }
        if let Some(g) = c.gamma_max {
            if !(g >= c.gamma0) {
                return bad(format!("gamma_max {g} below gamma0 {}", c.gamma0));
            }
        }
        if !(c.c_rd > 0.0) {
            return bad(format!("c_rd must be > 0, got {}", c.c_rd));
        }
        let t = &self.tolerances;
        if !(t.pcg_rel_tol > 0.0) {
            return bad("pcg_rel_tol must be > 0".into());
        }
        if let Some(c) = t.complementarity {
            if !(c > 0.0) {
                return bad(format!("complementarity parameter must be > 0, got {c}"));
            }
        }
        if let Some(b) = &self.control_bounds {
            if b.lower.is_none() && b.upper.is_none() {
                return bad("control_bounds needs a lower or an upper bound".into());
            }
        }
        Ok(())
    }

    /// Nodal bound vectors on the boundary of `prob`; missing sides are ±∞.
    pub fn control_bound_vectors(&self, prob: &DiscreteProblem) -> Result<Option<(Vec<f64>, Vec<f64>)>, SolverError> {
        let Some(b) = &self.control_bounds else {
            return Ok(None);
        };
        let eval = |f: &Option<ScalarFn>, default: f64| -> Vec<f64> {
            prob.sets()
                .boundary
                .iter()
                .map(|&i| f.as_ref().map_or(default, |g| g.eval(prob.mesh().node(i))))
                .collect()
        };
        let lo = eval(&b.lower, f64::NEG_INFINITY);
        let hi = eval(&b.upper, f64::INFINITY);
        if let Some(k) = (0..lo.len()).find(|&k| !(lo[k] < hi[k])) {
            return Err(SolverError::InvalidSpec(format!(
                "lower bound {} not below upper bound {} at boundary node {}",
                lo[k],
                hi[k],
                prob.sets().boundary[k]
            )));
        }
        Ok(Some((lo, hi)))
    }

    /// Complementarity parameter for the control multiplier.
    pub fn complementarity(&self) -> f64 {
        self.tolerances
            .complementarity
            .unwrap_or(if self.nu > 0.0 { self.nu } else { 1.0 })
    }
}
