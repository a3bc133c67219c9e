//! Legacy-format (ASCII) visualization output: triangulations as
//! unstructured grids, with optional per-vertex scalar fields.
//!
//! Values are printed with fixed scientific formatting, so repeated writes
//! of the same data are byte-identical.

use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::mesh::Mesh;

fn write_header(out: &mut impl Write, mesh: &Mesh) -> std::io::Result<()> {
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "plate-vi output")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.vertices.len())?;
    for p in &mesh.vertices {
        writeln!(out, "{:.16e} {:.16e} 0", p[0], p[1])?;
    }
    writeln!(out, "CELLS {} {}", mesh.triangles.len(), 4 * mesh.triangles.len())?;
    for t in &mesh.triangles {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {}", mesh.triangles.len())?;
    for _ in &mesh.triangles {
        writeln!(out, "5")?;
    }
    Ok(())
}

/// Writes the mesh alone.
pub fn write_mesh(path: &Path, mesh: &Mesh) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_header(&mut out, mesh)?;
    out.flush()?;
    Ok(())
}

/// Writes the mesh with named per-vertex scalar fields (one SCALARS block
/// per field under a single POINT_DATA section). Each field must supply
/// one value per mesh vertex.
pub fn write_point_data(path: &Path, mesh: &Mesh, fields: &[(&str, &[f64])]) -> Result<()> {
    for (name, values) in fields {
        if values.len() != mesh.vertices.len() {
            return Err(crate::error::Error::InvalidArgument(format!(
                "field '{name}' has {} values for {} vertices",
                values.len(),
                mesh.vertices.len()
            )));
        }
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_header(&mut out, mesh)?;
    writeln!(out, "POINT_DATA {}", mesh.vertices.len())?;
    for (name, values) in fields {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for v in *values {
            writeln!(out, "{v:.16e}")?;
        }
    }
    out.flush()?;
    Ok(())
}
