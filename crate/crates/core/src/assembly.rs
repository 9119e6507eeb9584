//! P1 finite element matrices and data projection.

use crate::error::AssemblyError;
use crate::field::ScalarFn;
use crate::linalg::{CsrMatrix, SpdSolver};
use crate::mesh::{facet_measure, IndexSets, Mesh, Point};
use crate::quadrature::{bary_to_point, cell_nodes, SimplexRule};

/// Global finite element matrices on one mesh.
#[derive(Debug, Clone)]
pub struct FemMatrices {
    /// Stiffness `a(e_i, e_j)`.
    pub k: CsrMatrix,
    /// Mass `(e_i, e_j)_Ω`.
    pub m: CsrMatrix,
    /// Boundary mass `(e_i, e_j)_Γ`; zero outside boundary rows/columns.
    pub b: CsrMatrix,
    /// Diagonal of the lumped mass on the constraint region, zero elsewhere.
    pub lumped: Vec<f64>,
}

/// Gradients of the barycentric coordinates of a simplex.
fn barycentric_gradients(p: &[Point], dim: usize) -> [[f64; 3]; 4] {
    let mut g = [[0.0; 3]; 4];
    match dim {
        2 => {
            let (x0, y0) = (p[0][0], p[0][1]);
            let (a, b) = (p[1][0] - x0, p[2][0] - x0);
            let (c, d) = (p[1][1] - y0, p[2][1] - y0);
            let det = a * d - b * c;
            // rows of the inverse Jacobian [[a, b], [c, d]]⁻¹
            g[1] = [d / det, -b / det, 0.0];
            g[2] = [-c / det, a / det, 0.0];
        }
        3 => {
            let e = |k: usize| {
                [
                    p[k][0] - p[0][0],
                    p[k][1] - p[0][1],
                    p[k][2] - p[0][2],
                ]
            };
            let (e1, e2, e3) = (e(1), e(2), e(3));
            let cross = |u: [f64; 3], v: [f64; 3]| {
                [
                    u[1] * v[2] - u[2] * v[1],
                    u[2] * v[0] - u[0] * v[2],
                    u[0] * v[1] - u[1] * v[0],
                ]
            };
            let c23 = cross(e2, e3);
            let det = e1[0] * c23[0] + e1[1] * c23[1] + e1[2] * c23[2];
            let c31 = cross(e3, e1);
            let c12 = cross(e1, e2);
            for d in 0..3 {
                g[1][d] = c23[d] / det;
                g[2][d] = c31[d] / det;
                g[3][d] = c12[d] / det;
            }
        }
        _ => unreachable!(),
    }
    for d in 0..3 {
        g[0][d] = -(1..=dim).map(|k| g[k][d]).sum::<f64>();
    }
    g
}

/// Element stiffness matrix `|T| ∇λ_i · ∇λ_j`.
pub fn element_stiffness(p: &[Point], dim: usize, vol: f64) -> [[f64; 4]; 4] {
    let g = barycentric_gradients(p, dim);
    let mut k = [[0.0; 4]; 4];
    for i in 0..=dim {
        for j in 0..=dim {
            k[i][j] = vol * (g[i][0] * g[j][0] + g[i][1] * g[j][1] + g[i][2] * g[j][2]);
        }
    }
    k
}

/// Element mass matrix `|T| (1 + δ_ij) / ((d + 1)(d + 2))`.
pub fn element_mass(dim: usize, vol: f64) -> [[f64; 4]; 4] {
    let scale = vol / ((dim + 1) * (dim + 2)) as f64;
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate().take(dim + 1) {
        for (j, v) in row.iter_mut().enumerate().take(dim + 1) {
            *v = if i == j { 2.0 * scale } else { scale };
        }
    }
    m
}

/// Boundary facet mass matrix by the mid-side rule: Simpson's rule on
/// segments, edge midpoints on triangles. Both are exact for the quadratic
/// products of P1 functions.
pub fn facet_mass(dim: usize, measure: f64) -> [[f64; 3]; 3] {
    let mut b = [[0.0; 3]; 3];
    match dim {
        2 => {
            // nodes: endpoints (weight 1/6) and midpoint (weight 4/6)
            let pts: [([f64; 2], f64); 3] = [
                ([1.0, 0.0], 1.0 / 6.0),
                ([0.5, 0.5], 4.0 / 6.0),
                ([0.0, 1.0], 1.0 / 6.0),
            ];
            for (phi, w) in pts {
                for i in 0..2 {
                    for j in 0..2 {
                        b[i][j] += measure * w * phi[i] * phi[j];
                    }
                }
            }
        }
        3 => {
            let pts: [[f64; 3]; 3] = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
            for phi in pts {
                for i in 0..3 {
                    for j in 0..3 {
                        b[i][j] += measure / 3.0 * phi[i] * phi[j];
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    b
}

/// Assembles stiffness, mass, boundary mass and lumped ω-mass.
pub fn assemble(mesh: &Mesh, sets: &IndexSets) -> Result<FemMatrices, AssemblyError> {
    let dim = mesh.dim();
    let n = mesh.num_nodes();
    let per = (dim + 1) * (dim + 1);
    let mut kt = Vec::with_capacity(per * mesh.num_cells());
    let mut mt = Vec::with_capacity(per * mesh.num_cells());
    for c in 0..mesh.num_cells() {
        let vol = mesh.signed_volume(c);
        if vol.abs() <= f64::EPSILON * mesh.h().powi(dim as i32) {
            return Err(AssemblyError::DegenerateCell(c));
        }
        let vol = vol.abs();
        let pts = mesh.cell_points(c);
        let ke = element_stiffness(&pts[..dim + 1], dim, vol);
        let me = element_mass(dim, vol);
        let cell = mesh.cell(c);
        for i in 0..=dim {
            for j in 0..=dim {
                kt.push((cell[i], cell[j], ke[i][j]));
                mt.push((cell[i], cell[j], me[i][j]));
            }
        }
    }
    let mut bt = Vec::with_capacity(dim * dim * mesh.boundary_facets().len());
    for f in 0..mesh.boundary_facets().len() {
        let nodes = mesh.facet_nodes(f);
        let pts: Vec<Point> = nodes.iter().map(|&v| *mesh.node(v)).collect();
        let be = facet_mass(dim, facet_measure(&pts, dim));
        for i in 0..dim {
            for j in 0..dim {
                bt.push((nodes[i], nodes[j], be[i][j]));
            }
        }
    }
    let k = CsrMatrix::from_triplets(n, n, kt);
    let m = CsrMatrix::from_triplets(n, n, mt);
    let b = CsrMatrix::from_triplets(n, n, bt);
    let sums = m.row_sums();
    let mut lumped = vec![0.0; n];
    for &j in &sets.omega {
        lumped[j] = sums[j];
    }
    Ok(FemMatrices { k, m, b, lumped })
}

/// Load vector `∫ g e_j` using the degree-5 rule, with cells cut along the
/// jump of step functions.
pub fn load_vector(mesh: &Mesh, g: &ScalarFn) -> Vec<f64> {
    let dim = mesh.dim();
    let rule = SimplexRule::default_for(dim);
    let mut rhs = vec![0.0; mesh.num_nodes()];
    for c in 0..mesh.num_cells() {
        let pts = mesh.cell_points(c);
        let cell = mesh.cell(c);
        for (lambda, w) in cell_nodes(mesh, c, &rule, g.discontinuity()) {
            let val = g.eval(&bary_to_point(&pts[..dim + 1], &lambda));
            for k in 0..=dim {
                rhs[cell[k]] += w * val * lambda[k];
            }
        }
    }
    rhs
}

/// `L²(Ω)` projection of `g` onto the P1 space.
///
/// Affine data lies in the P1 space already and is interpolated at the nodes.
pub fn project_target(mesh: &Mesh, fem: &FemMatrices, g: &ScalarFn) -> Result<Vec<f64>, AssemblyError> {
    if g.is_affine() {
        return Ok(mesh.nodes().iter().map(|p| g.eval(p)).collect());
    }
    let rhs = load_vector(mesh, g);
    let solver = SpdSolver::new(&fem.m)?;
    Ok(solver.solve(&rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Region;
    use crate::mesh::{build_cube_mesh, build_pentagon_mesh, classify_indices};

    #[test]
    fn unit_triangle_mass() {
        let m = element_mass(2, 0.5);
        assert!((m[0][0] - 0.5 / 6.0).abs() < 1e-16);
        assert!((m[0][1] - 0.5 / 12.0).abs() < 1e-16);
    }

    #[test]
    fn unit_triangle_stiffness() {
        let p = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let k = element_stiffness(&p, 2, 0.5);
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - expected[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn reference_tet_stiffness_rows_sum_to_zero() {
        let p = [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        let k = element_stiffness(&p, 3, 1.0 / 6.0);
        assert!((k[1][1] - 1.0 / 6.0).abs() < 1e-15);
        assert!((k[0][0] - 0.5).abs() < 1e-15);
        for row in k {
            assert!(row.iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn naive_segment_boundary_mass() {
        // Γ = [−1, 1] with nodes {−1, 0, 1}: two unit segments.
        let e = facet_mass(2, 1.0);
        let mut b = [[0.0; 3]; 3];
        for idx in [[0usize, 1usize], [1, 2]] {
            for a in 0..2 {
                for c in 0..2 {
                    b[idx[a]][idx[c]] += e[a][c];
                }
            }
        }
        let expected = [[2.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((b[i][j] - expected[i][j] / 6.0).abs() < 1e-16);
            }
        }
    }

    #[test]
    fn triangle_facet_mass_matches_closed_form() {
        let b = facet_mass(3, 0.3);
        for i in 0..3 {
            for j in 0..3 {
                let exact = 0.3 * if i == j { 2.0 } else { 1.0 } / 12.0;
                assert!((b[i][j] - exact).abs() < 1e-16);
            }
        }
    }

    #[test]
    fn constant_quadratic_forms_give_measures() {
        for mesh in [build_pentagon_mesh(8).unwrap(), build_cube_mesh(3).unwrap()] {
            let sets = classify_indices(&mesh, None).unwrap();
            let fem = assemble(&mesh, &sets).unwrap();
            let one = vec![1.0; mesh.num_nodes()];
            assert!((fem.m.bilinear(&one, &one) - mesh.volume()).abs() < 1e-12);
            assert!((fem.b.bilinear(&one, &one) - mesh.boundary_measure()).abs() < 1e-12);
            let k1 = fem.k.mul_vec(&one);
            assert!(k1.iter().all(|v| v.abs() < 1e-12));
            assert!(fem.k.is_symmetric(1e-14) && fem.m.is_symmetric(1e-14));
            for &i in &sets.interior {
                assert_eq!(fem.b.row(i).0.len(), 0);
            }
        }
    }

    #[test]
    fn lumped_mass_is_row_sum_on_omega() {
        let mesh = build_pentagon_mesh(16).unwrap();
        let region = Region::Ball {
            center: [-0.1, -0.1, 0.0],
            radius: 0.2,
        };
        let sets = classify_indices(&mesh, Some(&region)).unwrap();
        let fem = assemble(&mesh, &sets).unwrap();
        let sums = fem.m.row_sums();
        let mut in_omega = vec![false; mesh.num_nodes()];
        for &j in &sets.omega {
            in_omega[j] = true;
            assert!(fem.lumped[j] > 0.0);
            assert!((fem.lumped[j] - sums[j]).abs() < 1e-16);
        }
        for (j, &l) in fem.lumped.iter().enumerate() {
            if !in_omega[j] {
                assert_eq!(l, 0.0);
            }
        }
    }

    #[test]
    fn projection_of_affine_data_is_interpolation() {
        let mesh = build_pentagon_mesh(4).unwrap();
        let sets = classify_indices(&mesh, None).unwrap();
        let fem = assemble(&mesh, &sets).unwrap();
        let ones = project_target(&mesh, &fem, &ScalarFn::constant(1.0)).unwrap();
        assert!(ones.iter().all(|&v| v == 1.0));
        let x1 = ScalarFn::Affine {
            offset: 0.0,
            grad: [1.0, 0.0, 0.0],
        };
        let y = project_target(&mesh, &fem, &x1).unwrap();
        // the quadrature route must agree with nodal interpolation
        let via_solve = SpdSolver::new(&fem.m).unwrap().solve(&load_vector(&mesh, &x1));
        for ((p, a), b) in mesh.nodes().iter().zip(&y).zip(&via_solve) {
            assert!((p[0] - a).abs() < 1e-12);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_of_squared_norm_solves_mass_system() {
        let mesh = build_pentagon_mesh(8).unwrap();
        let sets = classify_indices(&mesh, None).unwrap();
        let fem = assemble(&mesh, &sets).unwrap();
        let g = ScalarFn::SquaredNorm;
        let y = project_target(&mesh, &fem, &g).unwrap();
        let rhs = load_vector(&mesh, &g);
        let my = fem.m.mul_vec(&y);
        let err: f64 = my.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-14);
        // ∫ |x|² e_j summed over j is ∫ |x|² over the pentagon:
        // ∫ over the unit square is 1/6, minus the corner triangle.
        let total: f64 = rhs.iter().sum();
        let corner = {
            // triangle with vertices (0.5,0), (0.5,0.5), (0,0.5); exact by
            // the degree-2 edge-midpoint rule
            let mids = [[0.5, 0.25], [0.25, 0.5], [0.25, 0.25]];
            mids.iter().map(|m| m[0] * m[0] + m[1] * m[1]).sum::<f64>() / 3.0 * 0.125
        };
        assert!((total - (1.0 / 6.0 - corner)).abs() < 1e-14);
    }
}
