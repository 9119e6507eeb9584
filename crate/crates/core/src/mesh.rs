//! Structured simplicial meshes of the example domains, uniform refinement
//! and node classification.

use std::collections::HashMap;

use crate::error::MeshError;
use crate::field::Region;

/// Node coordinates. Two-dimensional meshes keep `z = 0`.
pub type Point = [f64; 3];

/// Which structured family a mesh belongs to; refinement depends on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFamily {
    /// Convex pentagon with vertices (−½,−½), (½,−½), (½,0), (0,½), (−½,½),
    /// built on a grid with `n` intervals per axis.
    Pentagon { n: usize },
    /// Cube (−½,½)³ with `n` Kuhn-split cubes per axis.
    Cube { n: usize },
}

/// A facet on the boundary together with the cell it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFacet {
    pub nodes: [usize; 3],
    pub cell: usize,
}

/// Conforming simplicial mesh.
#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    nodes: Vec<Point>,
    cells: Vec<[usize; 4]>,
    boundary_facets: Vec<BoundaryFacet>,
    h: f64,
    level: usize,
    family: MeshFamily,
    /// For a refined mesh: the two coarse nodes each node interpolates from.
    /// Coarse nodes point at themselves.
    parents: Option<Vec<[usize; 2]>>,
    coarse_nodes: usize,
}

impl Mesh {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Point {
        &self.nodes[i]
    }

    /// Node indices of cell `c` (`dim + 1` entries).
    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c][..self.dim + 1]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.cells.iter().map(move |c| &c[..self.dim + 1])
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    /// Node indices of boundary facet `f` (`dim` entries).
    pub fn facet_nodes(&self, f: usize) -> &[usize] {
        &self.boundary_facets[f].nodes[..self.dim]
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn family(&self) -> MeshFamily {
        self.family
    }

    pub fn parents(&self) -> Option<&[[usize; 2]]> {
        self.parents.as_deref()
    }

    /// Number of leading nodes inherited from the parent mesh.
    pub fn coarse_nodes(&self) -> usize {
        self.coarse_nodes
    }

    pub fn cell_points(&self, c: usize) -> [Point; 4] {
        let mut pts = [[0.0; 3]; 4];
        for (k, &v) in self.cell(c).iter().enumerate() {
            pts[k] = self.nodes[v];
        }
        pts
    }

    /// Signed volume (area in 2D) of a cell.
    pub fn signed_volume(&self, c: usize) -> f64 {
        let p = self.cell_points(c);
        signed_simplex_volume(&p[..self.dim + 1], self.dim)
    }

    /// Measure of a boundary facet.
    pub fn facet_measure(&self, f: usize) -> f64 {
        let nodes = self.facet_nodes(f);
        let pts: Vec<Point> = nodes.iter().map(|&i| self.nodes[i]).collect();
        facet_measure(&pts, self.dim)
    }

    /// Measure of the domain.
    pub fn volume(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.signed_volume(c)).sum()
    }

    /// Measure of the boundary.
    pub fn boundary_measure(&self) -> f64 {
        (0..self.boundary_facets.len())
            .map(|f| self.facet_measure(f))
            .sum()
    }

    fn from_parts(
        dim: usize,
        nodes: Vec<Point>,
        cells: Vec<[usize; 4]>,
        h: f64,
        level: usize,
        family: MeshFamily,
    ) -> Self {
        let boundary_facets = find_boundary_facets(dim, &cells);
        let coarse_nodes = nodes.len();
        Mesh {
            dim,
            nodes,
            cells,
            boundary_facets,
            h,
            level,
            family,
            parents: None,
            coarse_nodes,
        }
    }
}

pub(crate) fn signed_simplex_volume(p: &[Point], dim: usize) -> f64 {
    match dim {
        2 => {
            let a = [p[1][0] - p[0][0], p[1][1] - p[0][1]];
            let b = [p[2][0] - p[0][0], p[2][1] - p[0][1]];
            0.5 * (a[0] * b[1] - a[1] * b[0])
        }
        3 => {
            let a = sub(&p[1], &p[0]);
            let b = sub(&p[2], &p[0]);
            let c = sub(&p[3], &p[0]);
            dot(&a, &cross(&b, &c)) / 6.0
        }
        _ => unreachable!("unsupported dimension {dim}"),
    }
}

pub(crate) fn facet_measure(p: &[Point], dim: usize) -> f64 {
    match dim {
        2 => {
            let d = sub(&p[1], &p[0]);
            dot(&d, &d).sqrt()
        }
        3 => {
            let n = cross(&sub(&p[1], &p[0]), &sub(&p[2], &p[0]));
            0.5 * dot(&n, &n).sqrt()
        }
        _ => unreachable!("unsupported dimension {dim}"),
    }
}

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Facets owned by exactly one cell, in cell order.
fn find_boundary_facets(dim: usize, cells: &[[usize; 4]]) -> Vec<BoundaryFacet> {
    let mut count: HashMap<[usize; 3], (usize, usize, [usize; 3])> = HashMap::new();
    for (c, cell) in cells.iter().enumerate() {
        let cell = &cell[..dim + 1];
        for skip in 0..=dim {
            let mut facet = [usize::MAX; 3];
            let mut k = 0;
            for (i, &v) in cell.iter().enumerate() {
                if i != skip {
                    facet[k] = v;
                    k += 1;
                }
            }
            let mut key = facet;
            key[..dim].sort_unstable();
            count
                .entry(key)
                .and_modify(|e| e.0 += 1)
                .or_insert((1, c, facet));
        }
    }
    let mut facets: Vec<BoundaryFacet> = count
        .into_values()
        .filter(|(n, _, _)| *n == 1)
        .map(|(_, cell, nodes)| BoundaryFacet { nodes, cell })
        .collect();
    facets.sort_by_key(|f| (f.cell, f.nodes));
    facets
}

/// Structured triangulation of the pentagon.
///
/// The square `[−½,½]²` is divided into `n × n` squares, each cut along the
/// diagonal parallel to the line `x + y = ½`; triangles above that line are
/// dropped.
pub fn build_pentagon_mesh(n: usize) -> Result<Mesh, MeshError> {
    if n < 2 || n % 2 != 0 {
        return Err(MeshError::InvalidParameter(format!(
            "pentagon subdivision must be even and >= 2, got {n}"
        )));
    }
    let limit = 3 * n / 2;
    let mut index = vec![usize::MAX; (n + 1) * (n + 1)];
    let mut nodes = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            if i + j <= limit {
                index[j * (n + 1) + i] = nodes.len();
                let g = grid_point(i, j, 0, n);
                nodes.push([g[0], g[1], 0.0]);
            }
        }
    }
    let id = |i: usize, j: usize| index[j * (n + 1) + i];
    let mut cells = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if i + j + 1 <= limit {
                cells.push([id(i, j), id(i + 1, j), id(i, j + 1), 0]);
            }
            if i + j + 2 <= limit {
                cells.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1), 0]);
            }
        }
    }
    Ok(Mesh::from_parts(
        2,
        nodes,
        cells,
        1.0 / n as f64,
        0,
        MeshFamily::Pentagon { n },
    ))
}

fn grid_point(i: usize, j: usize, k: usize, n: usize) -> Point {
    let n = n as f64;
    [
        -0.5 + i as f64 / n,
        -0.5 + j as f64 / n,
        -0.5 + k as f64 / n,
    ]
}

/// Kuhn triangulation of the cube `(−½,½)³` with `n` cubes per axis.
///
/// Every cube is split into the six tetrahedra that share its
/// (0,0,0)–(1,1,1) diagonal, one per ordering of the coordinate axes.
pub fn build_cube_mesh(n: usize) -> Result<Mesh, MeshError> {
    if n < 1 {
        return Err(MeshError::InvalidParameter(
            "cube subdivision must be >= 1".into(),
        ));
    }
    let m = n + 1;
    let mut nodes = Vec::with_capacity(m * m * m);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                nodes.push(grid_point(i, j, k, n));
            }
        }
    }
    let cells = kuhn_cells(n, |i, j, k| (k * m + j) * m + i, &nodes);
    Ok(Mesh::from_parts(
        3,
        nodes,
        cells,
        1.0 / n as f64,
        0,
        MeshFamily::Cube { n },
    ))
}

const AXIS_ORDERS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

fn kuhn_cells(n: usize, id: impl Fn(usize, usize, usize) -> usize, nodes: &[Point]) -> Vec<[usize; 4]> {
    let mut cells = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for order in AXIS_ORDERS {
                    let mut corner = [i, j, k];
                    let mut tet = [id(i, j, k), 0, 0, 0];
                    for (s, &axis) in order.iter().enumerate() {
                        corner[axis] += 1;
                        tet[s + 1] = id(corner[0], corner[1], corner[2]);
                    }
                    let pts = [nodes[tet[0]], nodes[tet[1]], nodes[tet[2]], nodes[tet[3]]];
                    if signed_simplex_volume(&pts, 3) < 0.0 {
                        tet.swap(2, 3);
                    }
                    cells.push(tet);
                }
            }
        }
    }
    cells
}

/// Uniform refinement halving `h`.
///
/// Triangles are split into four through their edge midpoints. Cube meshes
/// are rebuilt with twice as many cubes per axis; every new node is then the
/// midpoint of an edge of the coarse Kuhn mesh. In both cases the coarse
/// nodes come first, with unchanged indices and coordinates.
pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    match mesh.family {
        MeshFamily::Pentagon { n } => refine_red(mesh, MeshFamily::Pentagon { n: 2 * n }),
        MeshFamily::Cube { n } => refine_cube(mesh, n),
    }
}

fn refine_red(mesh: &Mesh, family: MeshFamily) -> Mesh {
    let nc = mesh.num_nodes();
    let mut nodes = mesh.nodes.clone();
    let mut parents: Vec<[usize; 2]> = (0..nc).map(|i| [i, i]).collect();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, nodes: &mut Vec<Point>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoint.entry(key).or_insert_with(|| {
            let pa = nodes[a];
            let pb = nodes[b];
            nodes.push([
                0.5 * (pa[0] + pb[0]),
                0.5 * (pa[1] + pb[1]),
                0.5 * (pa[2] + pb[2]),
            ]);
            parents.push([key.0, key.1]);
            nodes.len() - 1
        })
    };
    let mut cells = Vec::with_capacity(4 * mesh.num_cells());
    for cell in mesh.cells() {
        let (a, b, c) = (cell[0], cell[1], cell[2]);
        let ab = mid(a, b, &mut nodes);
        let bc = mid(b, c, &mut nodes);
        let ca = mid(c, a, &mut nodes);
        cells.push([a, ab, ca, 0]);
        cells.push([ab, b, bc, 0]);
        cells.push([ca, bc, c, 0]);
        cells.push([ab, bc, ca, 0]);
    }
    let mut fine = Mesh::from_parts(2, nodes, cells, 0.5 * mesh.h, mesh.level + 1, family);
    fine.parents = Some(parents);
    fine.coarse_nodes = nc;
    fine
}

fn refine_cube(mesh: &Mesh, n: usize) -> Mesh {
    let nf = 2 * n;
    let m = nf + 1;
    let grid = |p: &Point| -> [usize; 3] {
        let g = |x: f64| ((x + 0.5) * nf as f64).round() as usize;
        [g(p[0]), g(p[1]), g(p[2])]
    };
    let mut index = vec![usize::MAX; m * m * m];
    let flat = |g: [usize; 3]| (g[2] * m + g[1]) * m + g[0];
    let mut nodes = mesh.nodes.clone();
    for (i, p) in mesh.nodes.iter().enumerate() {
        index[flat(grid(p))] = i;
    }
    let mut parents: Vec<[usize; 2]> = (0..mesh.num_nodes()).map(|i| [i, i]).collect();
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                let g = [i, j, k];
                if index[flat(g)] != usize::MAX {
                    continue;
                }
                let odd = [i % 2, j % 2, k % 2];
                let lo = [i - odd[0], j - odd[1], k - odd[2]];
                let hi = [i + odd[0], j + odd[1], k + odd[2]];
                index[flat(g)] = nodes.len();
                nodes.push(grid_point(i, j, k, nf));
                let (a, b) = (index[flat(lo)], index[flat(hi)]);
                parents.push([a.min(b), a.max(b)]);
            }
        }
    }
    let cells = kuhn_cells(nf, |i, j, k| index[(k * m + j) * m + i], &nodes);
    let mut fine = Mesh::from_parts(
        3,
        nodes,
        cells,
        0.5 * mesh.h,
        mesh.level + 1,
        MeshFamily::Cube { n: nf },
    );
    fine.parents = Some(parents);
    fine.coarse_nodes = mesh.num_nodes();
    fine
}

/// Position of a node inside the interior or boundary index lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior(usize),
    Boundary(usize),
}

/// Interior, boundary and constraint-region node index sets.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSets {
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
    /// Nodes in the closed constraint region (all interior).
    pub omega: Vec<usize>,
    class: Vec<NodeClass>,
}

impl IndexSets {
    pub fn class(&self, node: usize) -> NodeClass {
        self.class[node]
    }

    pub fn num_nodes(&self) -> usize {
        self.class.len()
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }

    /// Local boundary position of a node, if it is a boundary node.
    pub fn boundary_pos(&self, node: usize) -> Option<usize> {
        match self.class[node] {
            NodeClass::Boundary(k) => Some(k),
            NodeClass::Interior(_) => None,
        }
    }

    pub fn interior_pos(&self, node: usize) -> Option<usize> {
        match self.class[node] {
            NodeClass::Interior(k) => Some(k),
            NodeClass::Boundary(_) => None,
        }
    }

    /// Scatter interior and boundary parts into a full nodal vector.
    pub fn join(&self, interior: &[f64], boundary: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.class.len()];
        for (k, &i) in self.interior.iter().enumerate() {
            y[i] = interior[k];
        }
        for (k, &i) in self.boundary.iter().enumerate() {
            y[i] = boundary[k];
        }
        y
    }

    pub fn restrict_boundary(&self, y: &[f64]) -> Vec<f64> {
        self.boundary.iter().map(|&i| y[i]).collect()
    }

    pub fn restrict_interior(&self, y: &[f64]) -> Vec<f64> {
        self.interior.iter().map(|&i| y[i]).collect()
    }
}

/// Splits nodes into boundary (on some boundary facet) and interior ones and
/// collects the interior nodes inside `omega`.
pub fn classify_indices(mesh: &Mesh, omega: Option<&Region>) -> Result<IndexSets, MeshError> {
    let n = mesh.num_nodes();
    let mut on_boundary = vec![false; n];
    for f in 0..mesh.boundary_facets.len() {
        for &v in mesh.facet_nodes(f) {
            on_boundary[v] = true;
        }
    }
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    let mut class = Vec::with_capacity(n);
    for (i, &b) in on_boundary.iter().enumerate() {
        if b {
            class.push(NodeClass::Boundary(boundary.len()));
            boundary.push(i);
        } else {
            class.push(NodeClass::Interior(interior.len()));
            interior.push(i);
        }
    }
    let mut omega_nodes = Vec::new();
    if let Some(region) = omega {
        for (i, p) in mesh.nodes.iter().enumerate() {
            if region.contains(p) {
                if on_boundary[i] {
                    return Err(MeshError::OmegaTouchesBoundary(i));
                }
                omega_nodes.push(i);
            }
        }
    }
    Ok(IndexSets {
        interior,
        boundary,
        omega: omega_nodes,
        class,
    })
}

fn check_nested<'a>(coarse: &Mesh, fine: &'a Mesh) -> Result<&'a [[usize; 2]], MeshError> {
    let parents = fine
        .parents
        .as_deref()
        .ok_or_else(|| MeshError::NotNested("fine mesh was not produced by refinement".into()))?;
    if fine.coarse_nodes != coarse.num_nodes() {
        return Err(MeshError::NotNested(format!(
            "fine mesh inherits {} nodes, coarse mesh has {}",
            fine.coarse_nodes,
            coarse.num_nodes()
        )));
    }
    if fine.nodes[..coarse.num_nodes()] != coarse.nodes[..] {
        return Err(MeshError::NotNested(
            "coarse node coordinates differ".into(),
        ));
    }
    Ok(parents)
}

/// Pointwise P1 interpolation of a nodal field onto a refined mesh.
pub fn prolong(values: &[f64], coarse: &Mesh, fine: &Mesh) -> Result<Vec<f64>, MeshError> {
    if values.len() != coarse.num_nodes() {
        return Err(MeshError::Length {
            expected: coarse.num_nodes(),
            got: values.len(),
        });
    }
    let parents = check_nested(coarse, fine)?;
    Ok(parents
        .iter()
        .map(|&[a, b]| 0.5 * (values[a] + values[b]))
        .collect())
}

/// Pointwise P1 interpolation of boundary coefficients onto a refined mesh,
/// optionally clamped nodewise into `[lower, upper]` (fine boundary order).
pub fn prolong_boundary(
    values: &[f64],
    coarse: &Mesh,
    coarse_sets: &IndexSets,
    fine: &Mesh,
    fine_sets: &IndexSets,
    clamp: Option<(&[f64], &[f64])>,
) -> Result<Vec<f64>, MeshError> {
    if values.len() != coarse_sets.n_boundary() {
        return Err(MeshError::Length {
            expected: coarse_sets.n_boundary(),
            got: values.len(),
        });
    }
    let parents = check_nested(coarse, fine)?;
    let coarse_value = |node: usize| -> Result<f64, MeshError> {
        coarse_sets
            .boundary_pos(node)
            .map(|k| values[k])
            .ok_or_else(|| {
                MeshError::NotNested(format!("boundary node inherits from interior node {node}"))
            })
    };
    let mut out = Vec::with_capacity(fine_sets.n_boundary());
    for (k, &node) in fine_sets.boundary.iter().enumerate() {
        let [a, b] = parents[node];
        let mut v = 0.5 * (coarse_value(a)? + coarse_value(b)?);
        if let Some((lo, hi)) = clamp {
            v = v.max(lo[k]).min(hi[k]);
        }
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_conforming(mesh: &Mesh) {
        let dim = mesh.dim();
        let mut count: HashMap<Vec<usize>, usize> = HashMap::new();
        for cell in mesh.cells() {
            for skip in 0..=dim {
                let mut f: Vec<usize> = cell
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != skip)
                    .map(|(_, &v)| v)
                    .collect();
                f.sort_unstable();
                *count.entry(f).or_default() += 1;
            }
        }
        let boundary: usize = count.values().filter(|&&c| c == 1).count();
        assert!(count.values().all(|&c| c == 1 || c == 2));
        assert_eq!(boundary, mesh.boundary_facets().len());
        for c in 0..mesh.num_cells() {
            assert!(mesh.signed_volume(c) > 0.0, "cell {c} not positive");
        }
    }

    #[test]
    fn pentagon_n2_counts() {
        let m = build_pentagon_mesh(2).unwrap();
        assert_eq!(m.num_cells(), 7);
        assert_eq!(m.num_nodes(), 8);
        assert!((m.volume() - 0.875).abs() < 1e-14);
        assert_conforming(&m);
    }

    #[test]
    fn pentagon_rejects_odd_or_small() {
        assert!(build_pentagon_mesh(3).is_err());
        assert!(build_pentagon_mesh(0).is_err());
        assert!(build_pentagon_mesh(1).is_err());
    }

    #[test]
    fn pentagon_boundary_nodes_match_facet_walk() {
        // Brute force: count grid nodes lying on one of the five edges.
        let n = 4;
        let m = build_pentagon_mesh(n).unwrap();
        let sets = classify_indices(&m, None).unwrap();
        let on_edge = |p: &Point| {
            let eps = 1e-12;
            (p[1] + 0.5).abs() < eps
                || (p[0] + 0.5).abs() < eps
                || ((p[0] - 0.5).abs() < eps && p[1] <= eps)
                || ((p[1] - 0.5).abs() < eps && p[0] <= eps)
                || (p[0] + p[1] - 0.5).abs() < eps
        };
        let brute = m.nodes().iter().filter(|p| on_edge(p)).count();
        assert_eq!(sets.n_boundary(), brute);
        // 4 + 2 + 2 + 2 + 4 intervals on the five edges.
        assert_eq!(brute, 14);
        let perimeter = 2.0 + 1.0 + 0.5f64.sqrt();
        assert!((m.boundary_measure() - perimeter).abs() < 1e-12);
    }

    #[test]
    fn cube_counts() {
        let m = build_cube_mesh(1).unwrap();
        assert_eq!(m.num_nodes(), 8);
        assert_eq!(m.num_cells(), 6);
        for c in 0..6 {
            assert!((m.signed_volume(c) - 1.0 / 6.0).abs() < 1e-15);
        }
        let m = build_cube_mesh(2).unwrap();
        assert!((m.volume() - 1.0).abs() < 1e-14);
        assert!((m.boundary_measure() - 6.0).abs() < 1e-12);
        assert_conforming(&m);
        let sets = classify_indices(&m, None).unwrap();
        assert_eq!(sets.n_boundary(), 26);
        assert_eq!(sets.interior, vec![13]);
    }

    #[test]
    fn cube_sixteen_matches_published_sizes() {
        let m = build_cube_mesh(16).unwrap();
        let sets = classify_indices(&m, None).unwrap();
        assert_eq!(m.num_nodes(), 4913);
        assert_eq!(sets.n_interior(), 3375);
        assert_eq!(sets.n_boundary(), 1538);
        assert_eq!(m.num_cells(), 6 * 16 * 16 * 16);
    }

    #[test]
    fn cube_formula_holds() {
        for n in 1..6 {
            let m = build_cube_mesh(n).unwrap();
            let sets = classify_indices(&m, None).unwrap();
            assert_eq!(m.num_nodes(), (n + 1).pow(3));
            let inner = if n >= 1 { (n - 1).pow(3) } else { 0 };
            assert_eq!(sets.n_boundary(), (n + 1).pow(3) - inner);
        }
    }

    #[test]
    fn red_refinement_reproduces_structured_mesh() {
        let coarse = build_pentagon_mesh(2).unwrap();
        let fine = refine_uniform(&coarse);
        let direct = build_pentagon_mesh(4).unwrap();
        assert_eq!(fine.num_cells(), 4 * coarse.num_cells());
        assert_eq!(fine.boundary_facets().len(), 2 * coarse.boundary_facets().len());
        assert_eq!(fine.h(), coarse.h() / 2.0);
        assert_eq!(fine.num_nodes(), direct.num_nodes());
        let key = |p: &Point| ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64);
        let mut a: Vec<_> = fine.nodes().iter().map(key).collect();
        let mut b: Vec<_> = direct.nodes().iter().map(key).collect();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
        assert_eq!(&fine.nodes()[..coarse.num_nodes()], coarse.nodes());
        assert_conforming(&fine);
    }

    #[test]
    fn cube_refinement_is_nested() {
        let coarse = build_cube_mesh(2).unwrap();
        let fine = refine_uniform(&coarse);
        assert_eq!(fine.num_nodes(), 125);
        assert_eq!(&fine.nodes()[..coarse.num_nodes()], coarse.nodes());
        assert_conforming(&fine);
        let again = refine_uniform(&fine);
        assert_eq!(&again.nodes()[..fine.num_nodes()], fine.nodes());
        assert!((again.volume() - 1.0).abs() < 1e-13);
        // every new node sits at its parents' midpoint
        for (i, &[a, b]) in again.parents().unwrap().iter().enumerate() {
            let p = again.node(i);
            let q = again.node(a);
            let r = again.node(b);
            for d in 0..3 {
                assert!((p[d] - 0.5 * (q[d] + r[d])).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn omega_nodes_are_interior() {
        let region = Region::Ball {
            center: [-0.1, -0.1, 0.0],
            radius: 0.2,
        };
        for n in [10, 20, 40] {
            let m = build_pentagon_mesh(n).unwrap();
            let sets = classify_indices(&m, Some(&region)).unwrap();
            assert!(!sets.omega.is_empty());
            for &j in &sets.omega {
                assert!(sets.interior_pos(j).is_some());
                assert!(region.signed_distance(m.node(j)) <= 1e-15);
            }
            assert_eq!(sets.n_interior() + sets.n_boundary(), m.num_nodes());
        }
        let m = build_pentagon_mesh(4).unwrap();
        assert!(classify_indices(&m, None).unwrap().omega.is_empty());
    }

    #[test]
    fn omega_on_boundary_is_rejected() {
        let m = build_pentagon_mesh(4).unwrap();
        let region = Region::Ball {
            center: [-0.5, -0.5, 0.0],
            radius: 0.1,
        };
        assert!(matches!(
            classify_indices(&m, Some(&region)),
            Err(MeshError::OmegaTouchesBoundary(_))
        ));
    }

    #[test]
    fn prolongation_reproduces_linears() {
        let coarse = build_pentagon_mesh(4).unwrap();
        let fine = refine_uniform(&coarse);
        let f = |p: &Point| 0.3 + 2.0 * p[0] - p[1];
        let v: Vec<f64> = coarse.nodes().iter().map(f).collect();
        let w = prolong(&v, &coarse, &fine).unwrap();
        for (p, x) in fine.nodes().iter().zip(&w) {
            assert!((f(p) - x).abs() < 1e-14);
        }
        let c = prolong(&vec![2.5; coarse.num_nodes()], &coarse, &fine).unwrap();
        assert!(c.iter().all(|&x| x == 2.5));
    }

    #[test]
    fn boundary_prolongation_clamps() {
        let coarse = build_pentagon_mesh(2).unwrap();
        let fine = refine_uniform(&coarse);
        let cs = classify_indices(&coarse, None).unwrap();
        let fs = classify_indices(&fine, None).unwrap();
        let mut u = vec![0.0; cs.n_boundary()];
        u[0] = 1.0;
        let hi = vec![0.16; fs.n_boundary()];
        let lo = vec![-1.0; fs.n_boundary()];
        let w = prolong_boundary(&u, &coarse, &cs, &fine, &fs, Some((&lo, &hi))).unwrap();
        let node0 = cs.boundary[0];
        assert_eq!(w[fs.boundary_pos(node0).unwrap()], 0.16);
        assert!(w.iter().all(|&x| x <= 0.16));
    }

    #[test]
    fn prolongation_rejects_unrelated_meshes() {
        let a = build_pentagon_mesh(4).unwrap();
        let b = build_pentagon_mesh(8).unwrap();
        assert!(prolong(&vec![0.0; a.num_nodes()], &a, &b).is_err());
        let c = refine_uniform(&build_pentagon_mesh(2).unwrap());
        assert!(prolong(&vec![0.0; a.num_nodes()], &a, &c).is_err());
    }
}
