//! Property suite run by `dck verify` and the acceptance tests.
//!
//! Every check works on meshes with at most a few hundred nodes and compares
//! against an independent computation: Gauss quadrature on boundary facets,
//! dense reference solvers, finite differences or closed-form values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::assemble;
use crate::error::SolverError;
use crate::field::{Region, ScalarFn};
use crate::linalg::{dot, norm, CsrMatrix};
use crate::mesh::{build_cube_mesh, build_pentagon_mesh, classify_indices, Mesh};
use crate::operator::DiscreteProblem;
use crate::reference::{segment_boundary_mass, DenseModel, DenseReduced};
use crate::solvers::{
    active_set_newton, solve_control_constrained, solve_penalized, solve_unconstrained, NewtonOptions, StateData,
    Tolerances, UnconstrainedMethod,
};

/// Deliberate defects used to check that the suite detects them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Replaces the boundary mass matrix by its row-sum lumped diagonal.
    CorruptBoundaryMass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Fewer meshes and probes.
    pub quick: bool,
    pub fault: Option<Fault>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 20240601,
            quick: false,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn region() -> Region {
    Region::Ball {
        center: [-0.1, -0.1, 0.0],
        radius: 0.2,
    }
}

struct Case {
    label: String,
    mesh: Mesh,
}

fn cases(quick: bool) -> Vec<Case> {
    let mut v = vec![
        Case {
            label: "pentagon n=4".into(),
            mesh: build_pentagon_mesh(4).expect("valid mesh parameter"),
        },
        Case {
            label: "cube n=3".into(),
            mesh: build_cube_mesh(3).expect("valid mesh parameter"),
        },
    ];
    if !quick {
        v.push(Case {
            label: "pentagon n=8".into(),
            mesh: build_pentagon_mesh(8).expect("valid mesh parameter"),
        });
        v.push(Case {
            label: "cube n=4".into(),
            mesh: build_cube_mesh(4).expect("valid mesh parameter"),
        });
    }
    v
}

fn problem(
    mesh: &Mesh,
    omega: Option<&Region>,
    target: ScalarFn,
    nu: f64,
    fault: Option<Fault>,
) -> Result<DiscreteProblem, SolverError> {
    let sets = classify_indices(mesh, omega)?;
    let mut fem = assemble(mesh, &sets)?;
    if fault == Some(Fault::CorruptBoundaryMass) {
        fem.b = CsrMatrix::diagonal(&fem.b.row_sums());
    }
    DiscreteProblem::from_parts(mesh.clone(), sets, fem, target, nu)
}

/// `∫_Γ v w` for nodal fields `v`, `w` by a two-point Gauss rule on segments
/// and the three-point interior rule on triangles.
pub fn boundary_inner(mesh: &Mesh, v: &[f64], w: &[f64]) -> f64 {
    let mut total = 0.0;
    for f in 0..mesh.boundary_facets().len() {
        let nodes = mesh.facet_nodes(f);
        let meas = mesh.facet_measure(f);
        let rule: Vec<(Vec<f64>, f64)> = if mesh.dim() == 2 {
            let g = 0.5 / 3f64.sqrt();
            vec![(vec![0.5 + g, 0.5 - g], 0.5), (vec![0.5 - g, 0.5 + g], 0.5)]
        } else {
            let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
            vec![
                (vec![a, b, b], 1.0 / 3.0),
                (vec![b, a, b], 1.0 / 3.0),
                (vec![b, b, a], 1.0 / 3.0),
            ]
        };
        for (lambda, wt) in rule {
            let vv: f64 = nodes.iter().zip(&lambda).map(|(&i, l)| l * v[i]).sum();
            let ww: f64 = nodes.iter().zip(&lambda).map(|(&i, l)| l * w[i]).sum();
            total += meas * wt * vv * ww;
        }
    }
    total
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().map(|v| v.abs()).fold(1.0, f64::max);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

fn fmt_err(e: SolverError) -> String {
    format!("error: {e}")
}

/// `(Su)ᵀ M y = ⟨u, S*y⟩_{L²(Γ)}` on random probes.
fn adjoint_identity(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> CheckResult {
    let probes = if opts.quick { 10 } else { 50 };
    let mut worst = 0.0f64;
    for case in cases(opts.quick) {
        let p = match problem(&case.mesh, None, ScalarFn::constant(1.0), 1.0, opts.fault) {
            Ok(p) => p,
            Err(e) => return check("adjoint identity", false, fmt_err(e)),
        };
        let n = p.mesh().num_nodes();
        for _ in 0..probes {
            let u = random_vec(rng, p.n_boundary());
            let y = random_vec(rng, n);
            let su = p.apply_s(&u);
            let my = p.fem().m.mul_vec(&y);
            let lhs = dot(&su, &my);
            let w = match p.normal_derivative(&y, None) {
                Ok(w) => w,
                Err(e) => return check("adjoint identity", false, fmt_err(e.into())),
            };
            let zeros = vec![0.0; p.sets().n_interior()];
            let rhs = boundary_inner(p.mesh(), &p.sets().join(&zeros, &u), &p.sets().join(&zeros, &w));
            let scale = dot(&su, &p.fem().m.mul_vec(&su)).sqrt() * dot(&y, &my).sqrt();
            worst = worst.max((lhs - rhs).abs() / scale.max(f64::MIN_POSITIVE));
        }
    }
    check("adjoint identity", worst <= 1e-12, format!("max relative error {worst:.3e}"))
}

/// Symmetry and positivity of `A` on random probes for `ν = 0` and `ν = 1`.
fn spd_probes(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> CheckResult {
    let mut worst_sym = 0.0f64;
    let mut min_rayleigh = f64::INFINITY;
    for case in cases(opts.quick) {
        for nu in [0.0, 1.0] {
            let p = match problem(&case.mesh, None, ScalarFn::constant(1.0), nu, opts.fault) {
                Ok(p) => p,
                Err(e) => return check("A symmetric positive definite", false, fmt_err(e)),
            };
            for _ in 0..10 {
                let v = random_vec(rng, p.n_boundary());
                let w = random_vec(rng, p.n_boundary());
                let av = p.apply_a(&v);
                let aw = p.apply_a(&w);
                let scale = norm(&av) * norm(&w) + norm(&aw) * norm(&v);
                worst_sym = worst_sym.max((dot(&w, &av) - dot(&v, &aw)).abs() / scale);
                min_rayleigh = min_rayleigh.min(dot(&v, &av) / dot(&v, &v));
            }
        }
    }
    check(
        "A symmetric positive definite",
        worst_sym <= 1e-12 && min_rayleigh > 0.0,
        format!("max asymmetry {worst_sym:.3e}, min Rayleigh quotient {min_rayleigh:.3e}"),
    )
}

fn quadratic_vs_quadrature(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> CheckResult {
    let mut worst = 0.0f64;
    let targets = [
        ScalarFn::constant(1.0),
        ScalarFn::Affine {
            offset: 0.3,
            grad: [1.0, -2.0, 0.5],
        },
    ];
    for case in cases(opts.quick) {
        for target in &targets {
            for nu in [0.0, 1.0] {
                let p = match problem(&case.mesh, None, target.clone(), nu, opts.fault) {
                    Ok(p) => p,
                    Err(e) => return check("quadratic form equals quadrature", false, fmt_err(e)),
                };
                for _ in 0..5 {
                    let u = random_vec(rng, p.n_boundary());
                    let a = p.objective(&u);
                    let b = p.objective_quadratic(&u);
                    worst = worst.max((a - b).abs() / a.abs().max(1.0));
                }
            }
        }
    }
    check("quadratic form equals quadrature", worst <= 1e-10, format!("max relative difference {worst:.3e}"))
}

fn gradient_check(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> CheckResult {
    let mut worst = 0.0f64;
    for case in cases(opts.quick) {
        let p = match problem(&case.mesh, None, ScalarFn::SquaredNorm, 0.5, opts.fault) {
            Ok(p) => p,
            Err(e) => return check("gradient matches finite differences", false, fmt_err(e)),
        };
        let u = random_vec(rng, p.n_boundary());
        let d = random_vec(rng, p.n_boundary());
        let mut g = p.apply_a(&u);
        g.iter_mut().zip(p.f()).for_each(|(a, b)| *a -= b);
        let eps = 1e-4;
        let plus: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + eps * b).collect();
        let minus: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a - eps * b).collect();
        // The quadratic model is exact, so the central difference has no
        // truncation error; only rounding remains.
        let fd = (p.objective_quadratic(&plus) - p.objective_quadratic(&minus)) / (2.0 * eps);
        let exact = dot(&g, &d);
        worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
    }
    check("gradient matches finite differences", worst <= 1e-7, format!("max relative error {worst:.3e}"))
}

fn pcg_vs_kkt(opts: &VerifyOptions) -> CheckResult {
    let tol = Tolerances::default();
    let mut worst = 0.0f64;
    for case in cases(opts.quick) {
        for nu in [0.0, 1e-2, 1.0] {
            let res = problem(&case.mesh, None, ScalarFn::SquaredNorm, nu, opts.fault).and_then(|p| {
                let a = solve_unconstrained(&p, UnconstrainedMethod::ReducedPcg, None, &tol)?;
                let b = solve_unconstrained(&p, UnconstrainedMethod::KktDirect, None, &tol)?;
                Ok(max_rel_diff(&a.u, &b.u))
            });
            match res {
                Ok(d) => worst = worst.max(d),
                Err(e) => return check("reduced PCG agrees with assembled KKT", false, fmt_err(e)),
            }
        }
    }
    check("reduced PCG agrees with assembled KKT", worst <= 1e-8, format!("max relative difference {worst:.3e}"))
}

fn oracle_cases(quick: bool) -> Vec<Case> {
    cases(quick).into_iter().filter(|c| c.mesh.num_nodes() <= 200).collect()
}

fn oracle_unconstrained(opts: &VerifyOptions) -> CheckResult {
    let name = "dense oracle: unconstrained";
    let tol = Tolerances::default();
    let mut worst = 0.0f64;
    for case in oracle_cases(opts.quick) {
        for nu in [0.0, 1.0] {
            let res = problem(&case.mesh, None, ScalarFn::SquaredNorm, nu, opts.fault).and_then(|p| {
                let s = solve_unconstrained(&p, UnconstrainedMethod::ReducedPcg, None, &tol)?;
                let r = DenseReduced::new(&p);
                Ok(max_rel_diff(&s.u, &r.solve_unconstrained()))
            });
            match res {
                Ok(d) => worst = worst.max(d),
                Err(e) => return check(name, false, fmt_err(e)),
            }
        }
    }
    check(name, worst <= 1e-8, format!("max relative difference {worst:.3e}"))
}

fn oracle_control(opts: &VerifyOptions) -> CheckResult {
    let name = "dense oracle: control constrained";
    let tol = Tolerances::default();
    let mut worst = 0.0f64;
    let mut detail = String::new();
    let split = ScalarFn::Step {
        axis: 0,
        threshold: 0.25,
        below: -1.0,
        above: 1.0,
    };
    for case in oracle_cases(opts.quick) {
        let setups = [
            (ScalarFn::constant(1.0), 1.0, f64::NEG_INFINITY, 0.16),
            (split.clone(), 0.0, -1.2, 0.16),
        ];
        for (target, nu, lo_v, hi_v) in setups {
            let res = problem(&case.mesh, None, target, nu, opts.fault).and_then(|p| {
                let lo = vec![lo_v; p.n_boundary()];
                let hi = vec![hi_v; p.n_boundary()];
                let c = if nu > 0.0 { nu } else { 1.0 };
                let s = solve_control_constrained(&p, (&lo, &hi), None, None, c, &tol)?;
                if !s.stats.converged {
                    return Err(SolverError::NotConverged {
                        method: "control Newton",
                        iterations: s.stats.newton,
                    });
                }
                let r = DenseReduced::new(&p).solve_box(&lo, &hi, None)?;
                Ok(max_rel_diff(&s.u, &r))
            });
            match res {
                Ok(d) => worst = worst.max(d),
                Err(e) => {
                    detail = format!("{}: {}", case.label, fmt_err(e));
                    worst = f64::INFINITY;
                }
            }
        }
    }
    if detail.is_empty() {
        detail = format!("max relative difference {worst:.3e}");
    }
    check(name, worst <= 1e-8, detail)
}

fn oracle_penalized(opts: &VerifyOptions, with_bounds: bool) -> CheckResult {
    let name = if with_bounds {
        "dense oracle: control and state constrained"
    } else {
        "dense oracle: penalized state constrained"
    };
    let tol = Tolerances::default();
    let mut worst = 0.0f64;
    let mut detail = String::new();
    let omega = region();
    let pentagons: Vec<Case> = oracle_cases(opts.quick)
        .into_iter()
        .filter(|c| c.mesh.dim() == 2)
        .collect();
    for case in pentagons {
        for gamma in [10.0, 1e3] {
            let res = problem(&case.mesh, Some(&omega), ScalarFn::constant(1.0), 1.0, opts.fault).and_then(|p| {
                let state = StateData::constant(&p, 0.15);
                let r = DenseReduced::new(&p);
                let lo = vec![f64::NEG_INFINITY; p.n_boundary()];
                let hi = vec![0.16; p.n_boundary()];
                let bounds = with_bounds.then_some((lo.as_slice(), hi.as_slice()));
                let s = solve_penalized(&p, gamma, &state, bounds, None, 1.0, &tol)?;
                let reference = if with_bounds {
                    r.solve_box(&lo, &hi, Some((gamma, &state.bound, &state.shift)))?
                } else {
                    r.solve_penalized(gamma, &state.bound, &state.shift)?
                };
                Ok(max_rel_diff(&s.u, &reference))
            });
            match res {
                Ok(d) => worst = worst.max(d),
                Err(e) => {
                    detail = format!("{}: {}", case.label, fmt_err(e));
                    worst = f64::INFINITY;
                }
            }
        }
    }
    if detail.is_empty() {
        detail = format!("max relative difference {worst:.3e}");
    }
    check(name, worst <= 1e-8, detail)
}

/// Re-running the control Newton method from its own output is a fixed point,
/// and the returned multiplier has the right signs.
fn control_fixed_point(opts: &VerifyOptions) -> CheckResult {
    let name = "control solution is a Newton fixed point";
    let tol = Tolerances::default();
    let mesh = build_pentagon_mesh(8).expect("valid mesh parameter");
    let res = problem(&mesh, None, ScalarFn::constant(1.0), 1.0, opts.fault).and_then(|p| {
        let lo = vec![-0.1; p.n_boundary()];
        let hi = vec![0.16; p.n_boundary()];
        let s = solve_control_constrained(&p, (&lo, &hi), None, None, 1.0, &tol)?;
        let again = solve_control_constrained(&p, (&lo, &hi), Some(&s.u), Some(s.lambda.clone()), 1.0, &tol)?;
        let signs = (0..p.n_boundary()).all(|k| {
            let l = s.lambda[k];
            (l == 0.0) || (l > 0.0 && s.u[k] == hi[k]) || (l < 0.0 && s.u[k] == lo[k])
        });
        Ok((max_rel_diff(&again.u, &s.u), signs, again.stats.newton))
    });
    match res {
        Ok((d, signs, newton)) => check(
            name,
            d <= 1e-10 && signs && newton <= 1,
            format!("change {d:.3e}, multiplier signs ok: {signs}, extra Newton steps {newton}"),
        ),
        Err(e) => check(name, false, fmt_err(e)),
    }
}

/// The boundary mass matrix of the segment `[-1, 1]` and the resulting
/// `B`-weighted projection, which differs from the pointwise clip.
fn boundary_mass_and_projection(opts: &VerifyOptions) -> CheckResult {
    let name = "segment boundary mass and weighted projection";
    let b = segment_boundary_mass();
    let expected = [[2.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 2.0]];
    let exact = (0..3).all(|i| (0..3).all(|j| b[i][j] == expected[i][j] / 6.0));
    let w = [-2.0, 1.0, 1.0];
    let f: Vec<f64> = b.iter().map(|r| r.iter().zip(&w).map(|(p, q)| p * q).sum()).collect();
    let model = DenseModel { a: b, f };
    let lo = vec![f64::NEG_INFINITY; 3];
    let hi = vec![0.0; 3];
    let newton = NewtonOptions {
        max_iter: 50,
        complementarity: 1.0,
        pcg: Default::default(),
    };
    let _ = opts;
    match active_set_newton(&model, Some((&lo, &hi)), &[0.0; 3], None, &newton) {
        Ok(out) => {
            let target = [-1.5, 0.0, 0.0];
            let d = out.u.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            check(
                name,
                exact && d <= 1e-12,
                format!("matrix exact: {exact}, projection {:?} (pointwise clip gives [-2, 0, 0])", out.u),
            )
        }
        Err(e) => check(name, false, fmt_err(e)),
    }
}

/// Runs all checks. The verdicts do not depend on the seed.
pub fn run_suite(opts: &VerifyOptions) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    vec![
        adjoint_identity(opts, &mut rng),
        spd_probes(opts, &mut rng),
        quadratic_vs_quadrature(opts, &mut rng),
        gradient_check(opts, &mut rng),
        pcg_vs_kkt(opts),
        oracle_unconstrained(opts),
        oracle_control(opts),
        oracle_penalized(opts, false),
        oracle_penalized(opts, true),
        control_fixed_point(opts),
        boundary_mass_and_projection(opts),
    ]
}
