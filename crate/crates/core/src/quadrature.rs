//! Quadrature on simplices.
//!
//! Rules are stored in barycentric coordinates with weights normalized to
//! sum to one, so the integral over a simplex `T` is `|T| Σ w_q f(x_q)`.

use crate::mesh::{signed_simplex_volume, Mesh, Point};

/// A quadrature rule on the reference `dim`-simplex.
#[derive(Debug, Clone)]
pub struct SimplexRule {
    dim: usize,
    degree: usize,
    points: Vec<[f64; 4]>,
    weights: Vec<f64>,
}

impl SimplexRule {
    /// Grundmann–Möller rule of degree `2s + 1`.
    ///
    /// Some weights are negative for `s >= 1`.
    pub fn grundmann_moller(dim: usize, s: usize) -> Self {
        assert!((1..=3).contains(&dim), "dimension {dim} not supported");
        let d = 2 * s + 1;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for i in 0..=s {
            let denom = (d + dim - 2 * i) as f64;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            // Normalized so the weights sum to one instead of 1/dim!.
            let w = sign * 2f64.powi(-(2 * s as i32)) * denom.powi(d as i32)
                / (factorial(i) * factorial(d + dim - i))
                * factorial(dim);
            for beta in compositions(s - i, dim + 1) {
                let mut p = [0.0; 4];
                for (k, &b) in beta.iter().enumerate() {
                    p[k] = (2 * b + 1) as f64 / denom;
                }
                points.push(p);
                weights.push(w);
            }
        }
        SimplexRule {
            dim,
            degree: d,
            points,
            weights,
        }
    }

    /// The rule used for data integrals: degree 5.
    pub fn default_for(dim: usize) -> Self {
        Self::grundmann_moller(dim, 2)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> &[[f64; 4]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// All ways to write `total` as an ordered sum of `parts` non-negative
/// integers.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// A sub-simplex of a cell, given by the barycentric coordinates (with
/// respect to the cell) of its vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub vertices: [[f64; 4]; 4],
}

impl Piece {
    fn whole(dim: usize) -> Self {
        let mut vertices = [[0.0; 4]; 4];
        for (k, v) in vertices.iter_mut().enumerate().take(dim + 1) {
            v[k] = 1.0;
        }
        Piece { vertices }
    }

    /// Maps barycentric coordinates inside the piece to barycentric
    /// coordinates of the parent cell.
    pub fn to_parent(&self, xi: &[f64; 4], dim: usize) -> [f64; 4] {
        let mut out = [0.0; 4];
        for k in 0..=dim {
            for (o, v) in out.iter_mut().zip(&self.vertices[k]) {
                *o += xi[k] * v;
            }
        }
        out
    }
}

pub(crate) fn bary_to_point(cell: &[Point], lambda: &[f64; 4]) -> Point {
    let mut p = [0.0; 3];
    for (k, v) in cell.iter().enumerate() {
        for d in 0..3 {
            p[d] += lambda[k] * v[d];
        }
    }
    p
}

/// Splits a simplex into sub-simplices none of which crosses the plane
/// `x[axis] = t`.
///
/// Edges crossing the plane are bisected at the intersection point one at a
/// time, which terminates because every cut replaces a crossing edge by two
/// edges ending on the plane.
pub fn split_by_plane(cell: &[Point], dim: usize, axis: usize, t: f64) -> Vec<Piece> {
    let mut done = Vec::new();
    let mut stack = vec![Piece::whole(dim)];
    while let Some(piece) = stack.pop() {
        let side: Vec<f64> = (0..=dim)
            .map(|k| bary_to_point(cell, &piece.vertices[k])[axis] - t)
            .collect();
        let crossing = (0..=dim)
            .flat_map(|a| ((a + 1)..=dim).map(move |b| (a, b)))
            .find(|&(a, b)| side[a] * side[b] < 0.0);
        match crossing {
            None => done.push(piece),
            Some((a, b)) => {
                let s = side[a] / (side[a] - side[b]);
                let mut cut = [0.0; 4];
                for (k, c) in cut.iter_mut().enumerate() {
                    *c = (1.0 - s) * piece.vertices[a][k] + s * piece.vertices[b][k];
                }
                let mut left = piece;
                left.vertices[b] = cut;
                let mut right = piece;
                right.vertices[a] = cut;
                stack.push(left);
                stack.push(right);
            }
        }
    }
    done
}

/// Quadrature nodes of one cell: barycentric coordinates in the cell and
/// absolute weights (already multiplied by the piece volume).
///
/// With `split = Some((axis, t))` the cell is first cut along the plane
/// `x[axis] = t`, so integrands that jump across it are integrated exactly.
pub fn cell_nodes(
    mesh: &Mesh,
    c: usize,
    rule: &SimplexRule,
    split: Option<(usize, f64)>,
) -> Vec<([f64; 4], f64)> {
    let dim = mesh.dim();
    let pts = mesh.cell_points(c);
    let cell = &pts[..dim + 1];
    let pieces = match split {
        Some((axis, t)) => split_by_plane(cell, dim, axis, t),
        None => vec![Piece::whole(dim)],
    };
    let mut out = Vec::with_capacity(pieces.len() * rule.len());
    for piece in &pieces {
        let mut corners = [[0.0; 3]; 4];
        for k in 0..=dim {
            corners[k] = bary_to_point(cell, &piece.vertices[k]);
        }
        let vol = signed_simplex_volume(&corners[..dim + 1], dim).abs();
        for (xi, w) in rule.points().iter().zip(rule.weights()) {
            out.push((piece.to_parent(xi, dim), w * vol));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of a barycentric monomial over a simplex of volume
    /// `vol`: `d! α! vol / (d + |α|)!`.
    fn monomial_exact(alpha: &[usize], dim: usize, vol: f64) -> f64 {
        let num: f64 = alpha.iter().map(|&a| factorial(a)).product();
        let total: usize = alpha.iter().sum();
        factorial(dim) * num * vol / factorial(dim + total)
    }

    #[test]
    fn gm_is_exact_up_to_its_degree() {
        for dim in 1..=3 {
            for s in 0..=2 {
                let rule = SimplexRule::grundmann_moller(dim, s);
                let sum: f64 = rule.weights().iter().sum();
                assert!((sum - 1.0).abs() < 1e-13, "dim {dim} s {s}: sum {sum}");
                for total in 0..=rule.degree() {
                    for alpha in compositions(total, dim + 1) {
                        let q: f64 = rule
                            .points()
                            .iter()
                            .zip(rule.weights())
                            .map(|(p, w)| {
                                w * alpha
                                    .iter()
                                    .enumerate()
                                    .map(|(k, &a)| p[k].powi(a as i32))
                                    .product::<f64>()
                            })
                            .sum();
                        let exact = monomial_exact(&alpha, dim, 1.0);
                        assert!(
                            (q - exact).abs() < 1e-13,
                            "dim {dim} s {s} alpha {alpha:?}: {q} vs {exact}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn gm_degree_five_is_not_exact_for_degree_six() {
        let rule = SimplexRule::grundmann_moller(2, 2);
        let q: f64 = rule
            .points()
            .iter()
            .zip(rule.weights())
            .map(|(p, w)| w * p[0].powi(6))
            .sum();
        assert!((q - monomial_exact(&[6, 0, 0], 2, 1.0)).abs() > 1e-8);
    }

    #[test]
    fn plane_split_preserves_volume_and_separates_sides() {
        let tri = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let pieces = split_by_plane(&tri, 2, 0, 0.25);
        assert_eq!(pieces.len(), 3);
        let tet = [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [1.0, 1.0, 1.0],
        ];
        for (axis, t) in [(0, 0.3), (1, 0.5), (2, 0.1), (0, 1.5)] {
            let pieces = split_by_plane(&tet, 3, axis, t);
            let mut total = 0.0;
            for p in &pieces {
                let mut corners = [[0.0; 3]; 4];
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for k in 0..4 {
                    corners[k] = bary_to_point(&tet, &p.vertices[k]);
                    lo = lo.min(corners[k][axis] - t);
                    hi = hi.max(corners[k][axis] - t);
                }
                assert!(lo >= -1e-15 || hi <= 1e-15);
                total += signed_simplex_volume(&corners, 3).abs();
            }
            assert!((total - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn split_integrates_step_exactly() {
        // ∫ over the unit right triangle of [x > 0.25]:
        // area of the part with x > 0.25 is 0.75² / 2.
        let tri = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let rule = SimplexRule::default_for(2);
        let mut q = 0.0;
        for piece in split_by_plane(&tri, 2, 0, 0.25) {
            let mut corners = [[0.0; 3]; 3];
            for k in 0..3 {
                corners[k] = bary_to_point(&tri, &piece.vertices[k]);
            }
            let vol = signed_simplex_volume(&corners, 2).abs();
            for (xi, w) in rule.points().iter().zip(rule.weights()) {
                let x = bary_to_point(&tri, &piece.to_parent(xi, 2));
                if x[0] > 0.25 {
                    q += w * vol;
                }
            }
        }
        assert!((q - 0.28125).abs() < 1e-15);
    }
}
