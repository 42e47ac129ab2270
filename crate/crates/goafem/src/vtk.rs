//! Legacy ASCII VTK export of meshes with per-element scalar fields.
//!
//! The output is a `DATASET UNSTRUCTURED_GRID` file: 1D intervals become
//! `VTK_LINE` (type 3) cells and triangles become `VTK_TRIANGLE` (type 5)
//! cells, with vertices padded to three coordinates. Any number of
//! element-wise scalar fields (estimator indicators, say) are appended as
//! `CELL_DATA`.

use std::io::{self, Write};

use crate::mesh::{Cells, Mesh};

/// Write `mesh` (plus optional per-element scalar fields) in legacy ASCII
/// VTK format. Every field must have exactly one value per element.
pub fn write_vtk(
    mesh: &Mesh,
    cell_data: &[(&str, &[f64])],
    out: &mut impl Write,
) -> io::Result<()> {
    for (name, values) in cell_data {
        if values.len() != mesh.n_elements() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!(
                    "cell field '{name}' has {} values for {} elements",
                    values.len(),
                    mesh.n_elements()
                ),
            ));
        }
    }

    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "goafem mesh")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;

    writeln!(out, "POINTS {} double", mesh.n_vertices())?;
    for v in &mesh.vertices {
        writeln!(out, "{:.16e} {:.16e} {:.16e}", v[0], v[1], 0.0)?;
    }

    let (per_cell, cell_type) = match mesh.cells {
        Cells::Intervals(_) => (2usize, 3u8),
        Cells::Triangles(_) => (3usize, 5u8),
    };
    let n = mesh.n_elements();
    writeln!(out, "CELLS {} {}", n, n * (per_cell + 1))?;
    for t in 0..n {
        let verts = mesh.element_vertices(t);
        write!(out, "{per_cell}")?;
        for v in verts {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    writeln!(out, "CELL_TYPES {n}")?;
    for _ in 0..n {
        writeln!(out, "{cell_type}")?;
    }

    if !cell_data.is_empty() {
        writeln!(out, "CELL_DATA {n}")?;
        for (name, values) in cell_data {
            writeln!(out, "SCALARS {name} double 1")?;
            writeln!(out, "LOOKUP_TABLE default")?;
            for v in *values {
                writeln!(out, "{v:.16e}")?;
            }
        }
    }
    Ok(())
}

/// The VTK file as a string.
pub fn vtk_string(mesh: &Mesh, cell_data: &[(&str, &[f64])]) -> String {
    let mut buf = Vec::new();
    write_vtk(mesh, cell_data, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("VTK output is ASCII")
}
