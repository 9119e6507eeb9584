//! Executes an [`Experiment`] over its level ladder and writes artifacts.

use std::path::PathBuf;
use std::time::Instant;

use dck_core::mesh::{build_cube_mesh, build_pentagon_mesh, prolong_boundary, refine_uniform};
use dck_core::solvers::{
    max_violation, multiplier_residual_rd, recover_multiplier, solve_control_constrained, solve_penalized, solve_state_constrained,
    solve_unconstrained, ContinuationResult, Solution, StateData,
};
use dck_core::vtk::write_vtk;
use dck_core::{DiscreteProblem, Mesh, SolverError};
use thiserror::Error;

use crate::config::Domain;
use crate::presets::{Experiment, Mode};
use crate::report::{sci3, short, sig10, Table};

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// Fields of the last solve, for VTK output.
#[derive(Debug, Clone)]
pub struct FinalFields {
    pub problem: DiscreteProblem,
    pub solution: Solution,
    /// Nodal weights of the approximate state multiplier, zero off the
    /// active set.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// `(file name, table)`; the first entry is `report.csv`.
    pub tables: Vec<(String, Table)>,
    pub fields: Option<FinalFields>,
    /// Set when a solve failed; the tables then hold the rows up to the
    /// failure.
    pub failure: Option<SolverError>,
}

impl RunOutput {
    pub fn report(&self) -> &Table {
        &self.tables[0].1
    }

    pub fn table(&self, file: &str) -> Option<&Table> {
        self.tables.iter().find(|(f, _)| f == file).map(|(_, t)| t)
    }
}

pub fn mesh_at(domain: Domain, level: usize) -> Result<Mesh, SolverError> {
    let n = 1usize << level;
    Ok(match domain {
        Domain::Pentagon => build_pentagon_mesh(n)?,
        Domain::Cube => build_cube_mesh(n)?,
    })
}

fn build(exp: &Experiment, mesh: Mesh) -> Result<DiscreteProblem, SolverError> {
    let region = exp.spec.state_bound.as_ref().map(|s| &s.region);
    DiscreteProblem::new(mesh, region, exp.spec.target.clone(), exp.spec.nu)
}

fn nodal_weights(prob: &DiscreteProblem, list: &[(usize, f64)]) -> Vec<f64> {
    let mut w = vec![0.0; prob.mesh().num_nodes()];
    for &(j, v) in list {
        w[j] = v;
    }
    w
}

fn fields(prob: &DiscreteProblem, sol: &Solution, weights: Vec<f64>) -> FinalFields {
    FinalFields {
        problem: prob.clone(),
        solution: sol.clone(),
        weights,
    }
}

/// Runs every solve of `exp`. Solver failures end the run early and are
/// reported in [`RunOutput::failure`]; errors in building a mesh or problem
/// are reported the same way.
pub fn execute(exp: &Experiment) -> RunOutput {
    match &exp.mode {
        Mode::Levels if exp.spec.control_bounds.is_some() => control_levels(exp),
        Mode::Levels => unconstrained_levels(exp),
        Mode::NuSweep(values) => nu_sweep(exp, values),
        Mode::FixedGamma(gamma) => fixed_gamma(exp, *gamma),
        Mode::Continuation => continuation(exp, None),
        Mode::GammaLadder(gammas) => continuation(exp, Some(gammas)),
    }
}

fn single(table: Table, fields: Option<FinalFields>, failure: Option<SolverError>) -> RunOutput {
    RunOutput {
        tables: vec![("report.csv".to_string(), table)],
        fields,
        failure,
    }
}

fn unconstrained_levels(exp: &Experiment) -> RunOutput {
    let mut t = Table::new(&["level", "h", "N", "N_I", "N_B", "pcg", "J", "seconds"]);
    let mut last = None;
    for level in exp.levels.iter() {
        let start = Instant::now();
        let res = mesh_at(exp.domain, level).and_then(|m| build(exp, m)).and_then(|p| {
            let s = solve_unconstrained(&p, exp.method, None, &exp.spec.tolerances)?;
            Ok((p, s))
        });
        let (p, s) = match res {
            Ok(v) => v,
            Err(e) => return single(t, last, Some(e)),
        };
        t.push(vec![
            level.to_string(),
            short(p.mesh().h()),
            p.mesh().num_nodes().to_string(),
            p.sets().n_interior().to_string(),
            p.n_boundary().to_string(),
            s.stats.pcg.to_string(),
            sig10(p.objective(&s.u)),
            format!("{:.3}", start.elapsed().as_secs_f64()),
        ]);
        let w = vec![0.0; p.mesh().num_nodes()];
        last = Some(fields(&p, &s, w));
    }
    single(t, last, None)
}

fn nu_sweep(exp: &Experiment, values: &[f64]) -> RunOutput {
    let mut t = Table::new(&["level", "h", "N", "N_B", "nu", "pcg", "J", "seconds"]);
    let mut last = None;
    for level in exp.levels.iter() {
        let base = match mesh_at(exp.domain, level).and_then(|m| build(exp, m)) {
            Ok(p) => p,
            Err(e) => return single(t, last, Some(e)),
        };
        for &nu in values {
            let start = Instant::now();
            let res = base.with_nu(nu).map_err(SolverError::from).and_then(|p| {
                let s = solve_unconstrained(&p, exp.method, None, &exp.spec.tolerances)?;
                Ok((p, s))
            });
            let (p, s) = match res {
                Ok(v) => v,
                Err(e) => return single(t, last, Some(e)),
            };
            t.push(vec![
                level.to_string(),
                short(p.mesh().h()),
                p.mesh().num_nodes().to_string(),
                p.n_boundary().to_string(),
                short(nu),
                s.stats.pcg.to_string(),
                sig10(p.objective(&s.u)),
                format!("{:.3}", start.elapsed().as_secs_f64()),
            ]);
            let w = vec![0.0; p.mesh().num_nodes()];
            last = Some(fields(&p, &s, w));
        }
    }
    single(t, last, None)
}

/// Nested solves: the solution on one level, interpolated and clamped to the
/// bounds, starts the Newton method on the next.
fn control_levels(exp: &Experiment) -> RunOutput {
    let mut t = Table::new(&[
        "level", "h", "N", "N_B", "newton", "pcg", "N_upper", "N_lower", "J", "seconds",
    ]);
    let mut last: Option<FinalFields> = None;
    let c = exp.spec.complementarity();
    let mut prev: Option<(DiscreteProblem, Vec<f64>)> = None;
    for level in exp.levels.iter() {
        let start = Instant::now();
        let res = (|| {
            let mesh = match &prev {
                Some((p, _)) => refine_uniform(p.mesh()),
                None => mesh_at(exp.domain, level)?,
            };
            let p = build(exp, mesh)?;
            let (lo, hi) = exp.spec.control_bound_vectors(&p)?.expect("control bounds present");
            let u0 = match &prev {
                Some((cp, u)) => Some(prolong_boundary(
                    u,
                    cp.mesh(),
                    cp.sets(),
                    p.mesh(),
                    p.sets(),
                    Some((&lo, &hi)),
                )?),
                None => None,
            };
            let s = solve_control_constrained(&p, (&lo, &hi), u0.as_deref(), None, c, &exp.spec.tolerances)?;
            Ok::<_, SolverError>((p, s))
        })();
        let (p, s) = match res {
            Ok(v) => v,
            Err(e) => return single(t, last, Some(e)),
        };
        t.push(vec![
            level.to_string(),
            short(p.mesh().h()),
            p.mesh().num_nodes().to_string(),
            p.n_boundary().to_string(),
            s.stats.newton.to_string(),
            s.stats.pcg.to_string(),
            s.stats.n_upper.to_string(),
            s.stats.n_lower.to_string(),
            sig10(p.objective(&s.u)),
            format!("{:.3}", start.elapsed().as_secs_f64()),
        ]);
        let converged = s.stats.converged;
        let newton = s.stats.newton;
        last = Some(fields(&p, &s, vec![0.0; p.mesh().num_nodes()]));
        if !converged {
            let e = SolverError::NotConverged {
                method: "control Newton",
                iterations: newton,
            };
            return single(t, last, Some(e));
        }
        prev = Some((p, s.u));
    }
    single(t, last, None)
}

const PENALTY_COLUMNS: &[&str] = &[
    "step", "level", "h", "N", "gamma", "newton", "pcg", "N_A", "N_A_omega", "J", "r_d", "mcv", "criterion", "seconds",
];

fn continuation_table(exp: &Experiment, res: &ContinuationResult) -> Table {
    let mut t = Table::new(PENALTY_COLUMNS);
    for (k, r) in res.rows.iter().enumerate() {
        t.push(vec![
            (k + 1).to_string(),
            (exp.levels.first + r.level).to_string(),
            short(r.h),
            r.n_nodes.to_string(),
            short(r.gamma),
            r.newton.to_string(),
            r.pcg.to_string(),
            r.n_control_active.to_string(),
            r.n_state_active.to_string(),
            sig10(r.j),
            sci3(r.r_d),
            sci3(r.mcv),
            r.criterion.to_string(),
            format!("{:.3}", r.seconds),
        ]);
    }
    t
}

/// Penalized solves at one `γ` on every level, each started from `u = 0`.
/// A level whose Newton iteration does not settle is reported and the run
/// moves on to the next level.
fn fixed_gamma(exp: &Experiment, gamma: f64) -> RunOutput {
    let mut t = Table::new(&[
        "level", "h", "N", "gamma", "newton", "pcg", "N_A", "N_A_omega", "J", "r_d", "mcv", "converged", "seconds",
    ]);
    let mut last = None;
    let mut failure = None;
    let c = exp.spec.complementarity();
    let sb = exp.spec.state_bound.as_ref().expect("state bound present");
    for level in exp.levels.iter() {
        let start = Instant::now();
        let res = mesh_at(exp.domain, level).and_then(|m| build(exp, m)).and_then(|p| {
            let bounds = exp.spec.control_bound_vectors(&p)?;
            let clamp = bounds.as_ref().map(|(l, h)| (l.as_slice(), h.as_slice()));
            let state = StateData::from_spec(&p, sb);
            let s = solve_penalized(&p, gamma, &state, clamp, None, c, &exp.spec.tolerances)?;
            Ok((p, s, state))
        });
        let (p, s, state) = match res {
            Ok(v) => v,
            Err(e) => return single(t, last, Some(e)),
        };
        t.push(vec![
            level.to_string(),
            short(p.mesh().h()),
            p.mesh().num_nodes().to_string(),
            short(gamma),
            s.stats.newton.to_string(),
            s.stats.pcg.to_string(),
            (s.stats.n_upper + s.stats.n_lower).to_string(),
            s.stats.n_state_active.to_string(),
            sig10(p.objective(&s.u)),
            sci3(multiplier_residual_rd(&p, &s.y, gamma, &state)),
            sci3(max_violation(&p, &s.y, &state)),
            s.stats.converged.to_string(),
            format!("{:.3}", start.elapsed().as_secs_f64()),
        ]);
        if !s.stats.converged && failure.is_none() {
            failure = Some(SolverError::NotConverged {
                method: "penalized Newton",
                iterations: s.stats.newton,
            });
        }
        let w = nodal_weights(&p, &recover_multiplier(&p, &s.y, gamma, &state));
        last = Some(fields(&p, &s, w));
    }
    single(t, last, failure)
}

fn continuation(exp: &Experiment, ladder: Option<&[f64]>) -> RunOutput {
    let res = match mesh_at(exp.domain, exp.levels.first)
        .and_then(|m| solve_state_constrained(m, exp.levels.count(), &exp.spec))
    {
        Ok(r) => r,
        Err(e) => return single(Table::new(PENALTY_COLUMNS), None, Some(e)),
    };
    let table = continuation_table(exp, &res);
    let mut last = match (&res.problem, &res.solution) {
        (Some(p), Some(s)) => Some(fields(p, s, nodal_weights(p, &res.multiplier))),
        _ => None,
    };
    let mut out = single(table, last.clone(), res.failure.clone());
    if out.failure.is_some() {
        return out;
    }
    let Some(gammas) = ladder else {
        return out;
    };
    let mut zoom = Table::new(&[
        "gamma", "newton", "pcg", "N_A_omega", "J", "mcv", "weight_sum", "max_dist_over_h", "seconds",
    ]);
    let (Some(prob), Some(sol)) = (res.problem, res.solution) else {
        return out;
    };
    let sb = exp.spec.state_bound.as_ref().expect("state bound present");
    let state = StateData::from_spec(&prob, sb);
    let bounds = match exp.spec.control_bound_vectors(&prob) {
        Ok(b) => b,
        Err(e) => {
            out.failure = Some(e);
            return out;
        }
    };
    let clamp = bounds.as_ref().map(|(l, h)| (l.as_slice(), h.as_slice()));
    let c = exp.spec.complementarity();
    let h = prob.mesh().h();
    let mut u = sol.u;
    for &gamma in gammas {
        let start = Instant::now();
        let s = match solve_penalized(&prob, gamma, &state, clamp, Some(&u), c, &exp.spec.tolerances) {
            Ok(s) => s,
            Err(e) => {
                out.failure = Some(e);
                break;
            }
        };
        let mult = recover_multiplier(&prob, &s.y, gamma, &state);
        let weight_sum: f64 = mult.iter().map(|(_, w)| w).sum();
        let max_dist = mult
            .iter()
            .map(|&(j, _)| sb.region.signed_distance(prob.mesh().node(j)).abs() / h)
            .fold(0.0, f64::max);
        zoom.push(vec![
            short(gamma),
            s.stats.newton.to_string(),
            s.stats.pcg.to_string(),
            s.stats.n_state_active.to_string(),
            sig10(prob.objective(&s.u)),
            sci3(max_violation(&prob, &s.y, &state)),
            sig10(weight_sum),
            format!("{max_dist:.3}"),
            format!("{:.3}", start.elapsed().as_secs_f64()),
        ]);
        let (converged, newton) = (s.stats.converged, s.stats.newton);
        last = Some(fields(&prob, &s, nodal_weights(&prob, &mult)));
        if !converged {
            out.failure = Some(SolverError::NotConverged {
                method: "penalized Newton",
                iterations: newton,
            });
            break;
        }
        u = s.u;
    }
    out.fields = last;
    out.tables.push(("zoom.csv".to_string(), zoom));
    out
}

/// Writes the CSV tables, the resolved problem and, if requested, the VTK
/// file of the last solve into `exp.out`. Returns the written paths.
pub fn write_artifacts(exp: &Experiment, out: &RunOutput) -> Result<Vec<PathBuf>, ArtifactError> {
    let dir = &exp.out;
    let io = |path: &PathBuf| {
        let path = path.clone();
        move |source| ArtifactError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    if exp.csv {
        for (file, table) in &out.tables {
            let path = dir.join(file);
            table.save(&path).map_err(|source| ArtifactError::Csv {
                path: path.clone(),
                source,
            })?;
            written.push(path);
        }
    }
    if exp.vtk {
        if let Some(f) = &out.fields {
            let path = dir.join("solution.vtk");
            let file = std::fs::File::create(&path).map_err(io(&path))?;
            let mut w = std::io::BufWriter::new(file);
            let p = &f.problem;
            let y = &f.solution.y;
            let diff: Vec<f64> = y.iter().zip(p.y_omega()).map(|(a, b)| a - b).collect();
            let phi = p.adjoint_state(&diff, Some(&f.weights));
            let zeros = vec![0.0; p.sets().n_interior()];
            let u = p.sets().join(&zeros, &f.solution.u);
            let title = format!("{} h={}", exp.name, short(p.mesh().h()));
            write_vtk(
                &mut w,
                p.mesh(),
                &title,
                &[("u", &u), ("y", y), ("phi", &phi), ("multiplier_weight", &f.weights)],
            )
            .and_then(|_| std::io::Write::flush(&mut w))
            .map_err(io(&path))?;
            written.push(path);
        }
    }
    Ok(written)
}
