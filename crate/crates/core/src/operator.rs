//! The discrete control-to-state map and everything built on top of it.
//!
//! For boundary coefficients `u` the discrete state is `y = S u` with
//! `y_𝔹 = u` and `K_𝕀𝕀 y_𝕀 = −K_𝕀𝔹 u`. The transpose applied to a load
//! vector `z` is `Sᵀz = z_𝔹 − K_𝔹𝕀 K_𝕀𝕀⁻¹ z_𝕀`, which is the boundary
//! residual of the adjoint equation. The reduced Hessian is
//! `A = SᵀMS + νB_𝔹𝔹` and the reduced gradient offset `f = SᵀM y_Ω`.

use std::sync::Arc;

use crate::assembly::{assemble, project_target, FemMatrices};
use crate::error::{LinalgError, SolverError};
use crate::field::{Region, ScalarFn};
use crate::linalg::{axpy, dot, solve_lu_checked, CsrMatrix, SpdSolver};
use crate::mesh::{classify_indices, IndexSets, Mesh};
use crate::quadrature::{bary_to_point, cell_nodes, SimplexRule};

/// The Moreau–Yosida data entering the penalized operator.
#[derive(Debug, Clone, Copy)]
pub struct Penalty<'a> {
    pub gamma: f64,
    /// Diagonal of `H`, full length; `L_jj` on the active set, zero elsewhere.
    pub h: &'a [f64],
    /// Nodal upper bound `b`, full length.
    pub bound: &'a [f64],
    /// Shift `μ*`, full length.
    pub shift: &'a [f64],
}

/// Solution of an assembled KKT system.
#[derive(Debug, Clone)]
pub struct KktSolution {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    /// Adjoint state, full length with zeros on the boundary.
    pub phi: Vec<f64>,
    /// Control multiplier on boundary positions, zero off the active set.
    pub lambda: Vec<f64>,
}

/// A discretized Dirichlet control problem on one mesh.
///
/// Cheap to clone: the mesh, matrices and factorizations are shared.
#[derive(Debug, Clone)]
pub struct DiscreteProblem {
    mesh: Arc<Mesh>,
    sets: Arc<IndexSets>,
    fem: Arc<FemMatrices>,
    nu: f64,
    target: ScalarFn,
    y_omega: Arc<Vec<f64>>,
    k_ii: Arc<SpdSolver>,
    k_ib: Arc<CsrMatrix>,
    k_bi: Arc<CsrMatrix>,
    m_bb: Arc<CsrMatrix>,
    b_bb: Arc<CsrMatrix>,
    b_bb_solver: Arc<SpdSolver>,
    f: Arc<Vec<f64>>,
    c_omega: f64,
}

impl DiscreteProblem {
    /// Assembles and factorizes everything needed on `mesh`.
    pub fn new(mesh: Mesh, omega: Option<&Region>, target: ScalarFn, nu: f64) -> Result<Self, SolverError> {
        let sets = classify_indices(&mesh, omega)?;
        let fem = assemble(&mesh, &sets)?;
        Self::from_parts(mesh, sets, fem, target, nu)
    }

    /// Builds the problem from already assembled matrices.
    pub fn from_parts(
        mesh: Mesh,
        sets: IndexSets,
        fem: FemMatrices,
        target: ScalarFn,
        nu: f64,
    ) -> Result<Self, SolverError> {
        if !(nu >= 0.0) {
            return Err(SolverError::InvalidSpec(format!("nu must be >= 0, got {nu}")));
        }
        if sets.n_interior() == 0 {
            return Err(SolverError::InvalidSpec("mesh has no interior nodes".into()));
        }
        let k_ii = SpdSolver::new(&fem.k.submatrix(&sets.interior, &sets.interior))?;
        let k_ib = fem.k.submatrix(&sets.interior, &sets.boundary);
        let k_bi = fem.k.submatrix(&sets.boundary, &sets.interior);
        let m_bb = fem.m.submatrix(&sets.boundary, &sets.boundary);
        let b_bb = fem.b.submatrix(&sets.boundary, &sets.boundary);
        let b_bb_solver = SpdSolver::new(&b_bb)?;
        let y_omega = project_target(&mesh, &fem, &target)?;
        let mut prob = DiscreteProblem {
            mesh: Arc::new(mesh),
            sets: Arc::new(sets),
            fem: Arc::new(fem),
            nu,
            target,
            y_omega: Arc::new(y_omega),
            k_ii: Arc::new(k_ii),
            k_ib: Arc::new(k_ib),
            k_bi: Arc::new(k_bi),
            m_bb: Arc::new(m_bb),
            b_bb: Arc::new(b_bb),
            b_bb_solver: Arc::new(b_bb_solver),
            f: Arc::new(Vec::new()),
            c_omega: 0.0,
        };
        let my = prob.fem.m.mul_vec(&prob.y_omega);
        prob.c_omega = 0.5 * dot(&prob.y_omega, &my);
        prob.f = Arc::new(prob.adjoint_load(&my));
        Ok(prob)
    }

    /// Same discretization with a different Tikhonov parameter.
    pub fn with_nu(&self, nu: f64) -> Result<Self, SolverError> {
        if !(nu >= 0.0) {
            return Err(SolverError::InvalidSpec(format!("nu must be >= 0, got {nu}")));
        }
        let mut p = self.clone();
        p.nu = nu;
        Ok(p)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn sets(&self) -> &IndexSets {
        &self.sets
    }

    pub fn fem(&self) -> &FemMatrices {
        &self.fem
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn target(&self) -> &ScalarFn {
        &self.target
    }

    /// Nodal coefficients of the projected target.
    pub fn y_omega(&self) -> &[f64] {
        &self.y_omega
    }

    /// `SᵀM y_Ω`
    pub fn f(&self) -> &[f64] {
        &self.f
    }

    /// `½ y_Ωᵀ M y_Ω` for the projected target.
    pub fn c_omega(&self) -> f64 {
        self.c_omega
    }

    pub fn n_boundary(&self) -> usize {
        self.sets.n_boundary()
    }

    pub fn b_bb(&self) -> &CsrMatrix {
        &self.b_bb
    }

    pub fn m_bb(&self) -> &CsrMatrix {
        &self.m_bb
    }

    fn check_len(&self, v: &[f64], expected: usize) -> Result<(), LinalgError> {
        if v.len() != expected {
            return Err(LinalgError::Dimension {
                expected,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Discrete harmonic extension `S u`.
    pub fn apply_s(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.n_boundary(), "control length");
        let mut rhs = vec![0.0; self.sets.n_interior()];
        self.k_ib.mul_vec_add(-1.0, u, &mut rhs);
        self.k_ii.solve_in_place(&mut rhs);
        self.sets.join(&rhs, u)
    }

    /// Interior adjoint `φ_𝕀 = K_𝕀𝕀⁻¹ z_𝕀` for a full-length load `z`.
    fn adjoint_interior(&self, load: &[f64]) -> Vec<f64> {
        let mut phi = self.sets.restrict_interior(load);
        self.k_ii.solve_in_place(&mut phi);
        phi
    }

    /// `Sᵀ z` for a full-length load vector `z`.
    pub fn adjoint_load(&self, load: &[f64]) -> Vec<f64> {
        assert_eq!(load.len(), self.sets.num_nodes(), "load length");
        let phi = self.adjoint_interior(load);
        let mut w = self.sets.restrict_boundary(load);
        self.k_bi.mul_vec_add(-1.0, &phi, &mut w);
        w
    }

    /// Adjoint state solving `K_𝕀𝕀 φ = (M y + extra)_𝕀`, as a full-length
    /// vector vanishing on the boundary.
    pub fn adjoint_state(&self, y: &[f64], extra: Option<&[f64]>) -> Vec<f64> {
        let load = self.adjoint_rhs(y, extra);
        let phi = self.adjoint_interior(&load);
        self.sets.join(&phi, &vec![0.0; self.n_boundary()])
    }

    fn adjoint_rhs(&self, y: &[f64], extra: Option<&[f64]>) -> Vec<f64> {
        let mut load = self.fem.m.mul_vec(y);
        if let Some(e) = extra {
            axpy(1.0, e, &mut load);
        }
        load
    }

    /// Variational normal derivative: `w` with
    /// `B_𝔹𝔹 w = (M y + extra)_𝔹 − K_𝔹𝕀 φ`. Without `extra` this is `S* y`,
    /// the `L²(Γ)` adjoint of `S`.
    pub fn normal_derivative(&self, y: &[f64], extra: Option<&[f64]>) -> Result<Vec<f64>, LinalgError> {
        self.check_len(y, self.sets.num_nodes())?;
        if let Some(e) = extra {
            self.check_len(e, self.sets.num_nodes())?;
        }
        let mut w = self.adjoint_load(&self.adjoint_rhs(y, extra));
        self.b_bb_solver.solve_in_place(&mut w);
        Ok(w)
    }

    /// `A u = SᵀMSu + νB_𝔹𝔹 u`.
    pub fn apply_a(&self, u: &[f64]) -> Vec<f64> {
        let y = self.apply_s(u);
        let mut d = self.adjoint_load(&self.fem.m.mul_vec(&y));
        self.b_bb.mul_vec_add(self.nu, u, &mut d);
        d
    }

    /// `(A + γSᵀHS) u`, with one adjoint solve for the load `(M + γH) y`.
    pub fn apply_a_penalized(&self, u: &[f64], h: &[f64], gamma: f64) -> Vec<f64> {
        let y = self.apply_s(u);
        let mut load = self.fem.m.mul_vec(&y);
        for ((l, hj), yj) in load.iter_mut().zip(h).zip(&y) {
            *l += gamma * hj * yj;
        }
        let mut d = self.adjoint_load(&load);
        self.b_bb.mul_vec_add(self.nu, u, &mut d);
        d
    }

    /// `f + SᵀH(γb − μ*)`, with one adjoint solve for the combined load.
    pub fn compute_c_penalized(&self, pen: &Penalty<'_>) -> Vec<f64> {
        let mut load = self.fem.m.mul_vec(&self.y_omega);
        for j in 0..load.len() {
            if pen.h[j] != 0.0 {
                load[j] += pen.h[j] * (pen.gamma * pen.bound[j] - pen.shift[j]);
            }
        }
        self.adjoint_load(&load)
    }

    /// `½uᵀAu − fᵀu + c_Ω`.
    pub fn objective_quadratic(&self, u: &[f64]) -> f64 {
        let au = self.apply_a(u);
        0.5 * dot(u, &au) - dot(&self.f, u) + self.c_omega
    }

    /// `½‖S u − y_Ω‖²_{L²(Ω)} + ν/2 uᵀB_𝔹𝔹u`, with `y_Ω` evaluated exactly at
    /// the quadrature points of the degree-5 rule.
    pub fn objective(&self, u: &[f64]) -> f64 {
        let y = self.apply_s(u);
        self.tracking(&y) + 0.5 * self.nu * self.b_bb.bilinear(u, u)
    }

    /// `½‖y − y_Ω‖²_{L²(Ω)}` for a nodal field `y`.
    pub fn tracking(&self, y: &[f64]) -> f64 {
        let mesh = &self.mesh;
        let dim = mesh.dim();
        let rule = SimplexRule::default_for(dim);
        let split = self.target.discontinuity();
        let mut total = 0.0;
        for c in 0..mesh.num_cells() {
            let pts = mesh.cell_points(c);
            let cell = mesh.cell(c);
            for (lambda, w) in cell_nodes(mesh, c, &rule, split) {
                let yh: f64 = (0..=dim).map(|k| lambda[k] * y[cell[k]]).sum();
                let diff = yh - self.target.eval(&bary_to_point(&pts[..dim + 1], &lambda));
                total += w * diff * diff;
            }
        }
        0.5 * total
    }

    /// Factorized `M_FF + νB_FF` for boundary positions `free`
    /// (all of them when `None`).
    pub fn preconditioner(&self, free: Option<&[usize]>) -> Result<SpdSolver, LinalgError> {
        let p = self.m_bb.add_scaled(self.nu, &self.b_bb);
        match free {
            None => SpdSolver::new(&p),
            Some(f) => SpdSolver::new(&p.submatrix(f, f)),
        }
    }

    /// Assembles the KKT system in the unknowns `(y, φ_𝕀, λ_𝔸)`:
    ///
    /// ```text
    /// [ M + νB + γH   −K_{:,𝕀}   I_{:,𝔸} ] [ y   ]   [ M y_Ω + H(γb − μ*) ]
    /// [ −K_{𝕀,:}       0          0      ] [ φ_𝕀 ] = [ 0                  ]
    /// [ I_{𝔸,:}        0          0      ] [ λ_𝔸 ]   [ bound values       ]
    /// ```
    ///
    /// `active` lists boundary positions with the value they are fixed to.
    pub fn assemble_kkt(&self, active: &[(usize, f64)], penalty: Option<&Penalty<'_>>) -> (CsrMatrix, Vec<f64>) {
        let n = self.sets.num_nodes();
        let ni = self.sets.n_interior();
        let na = active.len();
        let size = n + ni + na;
        let mut t: Vec<(usize, usize, f64)> = Vec::new();
        t.extend(self.fem.m.triplets());
        t.extend(self.fem.b.triplets().map(|(i, j, v)| (i, j, self.nu * v)));
        let mut rhs = vec![0.0; size];
        let my = self.fem.m.mul_vec(&self.y_omega);
        rhs[..n].copy_from_slice(&my);
        if let Some(p) = penalty {
            for j in 0..n {
                if p.h[j] != 0.0 {
                    t.push((j, j, p.gamma * p.h[j]));
                    rhs[j] += p.h[j] * (p.gamma * p.bound[j] - p.shift[j]);
                }
            }
        }
        for (c, &i) in self.sets.interior.iter().enumerate() {
            let (cols, vals) = self.fem.k.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                t.push((j, n + c, -v));
                t.push((n + c, j, -v));
            }
        }
        for (a, &(pos, value)) in active.iter().enumerate() {
            let node = self.sets.boundary[pos];
            t.push((node, n + ni + a, 1.0));
            t.push((n + ni + a, node, 1.0));
            rhs[n + ni + a] = value;
        }
        (CsrMatrix::from_triplets(size, size, t), rhs)
    }

    /// Assembles and solves the KKT system by sparse LU, requiring a relative
    /// residual of at most `1e-10`.
    pub fn solve_kkt(&self, active: &[(usize, f64)], penalty: Option<&Penalty<'_>>) -> Result<KktSolution, LinalgError> {
        let (mat, rhs) = self.assemble_kkt(active, penalty);
        let x = solve_lu_checked(&mat, &rhs, 1e-10)?;
        let n = self.sets.num_nodes();
        let ni = self.sets.n_interior();
        let y = x[..n].to_vec();
        let u = self.sets.restrict_boundary(&y);
        let phi = self.sets.join(&x[n..n + ni], &vec![0.0; self.n_boundary()]);
        let mut lambda = vec![0.0; self.n_boundary()];
        for (a, &(pos, _)) in active.iter().enumerate() {
            lambda[pos] = x[n + ni + a];
        }
        Ok(KktSolution { u, y, phi, lambda })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cube_mesh, build_pentagon_mesh};

    #[test]
    fn constant_control_gives_constant_state() {
        let p = DiscreteProblem::new(build_pentagon_mesh(4).unwrap(), None, ScalarFn::constant(1.0), 1.0)
            .unwrap();
        let y = p.apply_s(&vec![2.5; p.n_boundary()]);
        assert!(y.iter().all(|v| (v - 2.5).abs() < 1e-13));
    }

    #[test]
    fn linear_trace_extends_linearly() {
        for n in [1, 2, 3] {
            let p = DiscreteProblem::new(build_cube_mesh(n).unwrap(), None, ScalarFn::constant(1.0), 1.0);
            let Ok(p) = p else {
                // n = 1 has no interior node
                assert_eq!(n, 1);
                continue;
            };
            let u: Vec<f64> = p.sets().boundary.iter().map(|&i| p.mesh().node(i)[0]).collect();
            let y = p.apply_s(&u);
            for (node, v) in p.mesh().nodes().iter().zip(&y) {
                assert!((node[0] - v).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn zero_state_has_zero_normal_derivative() {
        let p = DiscreteProblem::new(build_pentagon_mesh(4).unwrap(), None, ScalarFn::constant(0.0), 1.0)
            .unwrap();
        let w = p.normal_derivative(&vec![0.0; p.mesh().num_nodes()], None).unwrap();
        assert!(w.iter().all(|&v| v == 0.0));
        assert!(p.f().iter().all(|&v| v == 0.0));
        assert_eq!(p.c_omega(), 0.0);
    }

    #[test]
    fn objective_at_zero_is_half_volume() {
        let p = DiscreteProblem::new(build_pentagon_mesh(4).unwrap(), None, ScalarFn::constant(1.0), 1.0)
            .unwrap();
        let u = vec![0.0; p.n_boundary()];
        assert!((p.objective(&u) - 0.4375).abs() < 1e-14);
        assert!((p.objective_quadratic(&u) - 0.4375).abs() < 1e-14);
    }

    #[test]
    fn exact_fit_has_zero_objective() {
        let p = DiscreteProblem::new(build_pentagon_mesh(4).unwrap(), None, ScalarFn::constant(1.0), 0.0)
            .unwrap();
        assert!(p.objective(&vec![1.0; p.n_boundary()]).abs() < 1e-28);
    }

    #[test]
    fn kkt_with_all_boundary_active_fixes_control() {
        let p = DiscreteProblem::new(build_pentagon_mesh(4).unwrap(), None, ScalarFn::constant(1.0), 1.0)
            .unwrap();
        let active: Vec<(usize, f64)> = (0..p.n_boundary()).map(|k| (k, 0.16)).collect();
        let sol = p.solve_kkt(&active, None).unwrap();
        assert!(sol.u.iter().all(|&v| v == 0.16 || (v - 0.16).abs() < 1e-14));
        // the multiplier is the negative reduced gradient there
        let au = p.apply_a(&sol.u);
        for k in 0..p.n_boundary() {
            let expect = p.f()[k] - au[k];
            assert!((sol.lambda[k] - expect).abs() < 1e-10);
        }
    }
}
