//! Legacy ASCII VTK output of nodal fields on a mesh.

use std::io::{self, Write};

use crate::mesh::Mesh;

/// Writes `mesh` as an unstructured grid (triangles or tetrahedra) with one
/// scalar point-data array per entry of `fields`.
///
/// Every field must have one value per mesh node.
pub fn write_vtk<W: Write>(out: &mut W, mesh: &Mesh, title: &str, fields: &[(&str, &[f64])]) -> io::Result<()> {
    let n = mesh.num_nodes();
    for (name, values) in fields {
        if values.len() != n {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!("field {name} has {} values for {n} nodes", values.len()),
            ));
        }
    }
    let dim = mesh.dim();
    let (k, cell_type) = if dim == 2 { (3, 5) } else { (4, 10) };
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{title}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {n} double")?;
    for p in mesh.nodes() {
        writeln!(out, "{:e} {:e} {:e}", p[0], p[1], p[2])?;
    }
    let nc = mesh.num_cells();
    writeln!(out, "CELLS {nc} {}", nc * (k + 1))?;
    for cell in mesh.cells() {
        write!(out, "{k}")?;
        for v in cell {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    writeln!(out, "CELL_TYPES {nc}")?;
    for _ in 0..nc {
        writeln!(out, "{cell_type}")?;
    }
    if !fields.is_empty() {
        writeln!(out, "POINT_DATA {n}")?;
    }
    for (name, values) in fields {
        let name: String = name.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect();
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for v in *values {
            writeln!(out, "{v:e}")?;
        }
    }
    Ok(())
}
