//! Legacy ASCII VTK output of quadratic-triangle fields.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::{Voigt, IPS_PER_ELEMENT};
use crate::mesh::Mesh;

const QUADRATIC_TRIANGLE: u8 = 22;

/// Fields written alongside a T6 mesh.
#[derive(Debug, Clone, Copy)]
pub struct VtkFields<'a> {
    /// One value per vertex; midside values are edge averages.
    pub phi: &'a [f64],
    /// Interleaved `[ux, uy]` per node.
    pub displacement: &'a [f64],
    pub stress: &'a [Voigt],
    pub eps_p_eq: &'a [f64],
    pub uncertainty: &'a [f64],
}

fn ip_average(values: impl Fn(usize) -> f64, element: usize) -> f64 {
    (0..IPS_PER_ELEMENT).map(|q| values(element * IPS_PER_ELEMENT + q)).sum::<f64>() / IPS_PER_ELEMENT as f64
}

pub fn to_vtk(mesh: &Mesh, fields: &VtkFields, title: &str) -> Result<String> {
    if !mesh.is_quadratic() {
        return Err(Error::InvalidMesh("VTK output expects a quadratic mesh".into()));
    }
    let n = mesh.n_nodes();
    let n_ips = mesh.n_elements() * IPS_PER_ELEMENT;
    if fields.phi.len() != mesh.n_vertices()
        || fields.displacement.len() != 2 * n
        || fields.stress.len() != n_ips
        || fields.eps_p_eq.len() != n_ips
        || fields.uncertainty.len() != n_ips
    {
        return Err(Error::InvalidInput("VTK field sizes do not match the mesh".into()));
    }
    let mut phi = fields.phi.to_vec();
    phi.resize(n, 0.0);
    for t in mesh.t6_elements() {
        for k in 0..3 {
            phi[t[3 + k]] = 0.5 * (fields.phi[t[k]] + fields.phi[t[(k + 1) % 3]]);
        }
    }

    let mut s = String::new();
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {n} double");
    for p in mesh.nodes() {
        let _ = writeln!(s, "{:e} {:e} 0", p[0], p[1]);
    }
    let m = mesh.n_elements();
    let _ = writeln!(s, "CELLS {m} {}", 7 * m);
    for t in mesh.t6_elements() {
        let _ = writeln!(s, "6 {} {} {} {} {} {}", t[0], t[1], t[2], t[3], t[4], t[5]);
    }
    let _ = writeln!(s, "CELL_TYPES {m}");
    for _ in 0..m {
        let _ = writeln!(s, "{QUADRATIC_TRIANGLE}");
    }

    let _ = writeln!(s, "POINT_DATA {n}");
    let scalar = |s: &mut String, name: &str, values: &mut dyn Iterator<Item = f64>| {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in values {
            let _ = writeln!(s, "{v:e}");
        }
    };
    scalar(&mut s, "phi", &mut phi.iter().copied());
    scalar(&mut s, "u_x", &mut (0..n).map(|i| fields.displacement[2 * i]));
    scalar(&mut s, "u_y", &mut (0..n).map(|i| fields.displacement[2 * i + 1]));

    let _ = writeln!(s, "CELL_DATA {m}");
    for (c, name) in ["sxx", "syy", "sxy"].iter().enumerate() {
        scalar(&mut s, name, &mut (0..m).map(|e| ip_average(|i| fields.stress[i][c], e)));
    }
    scalar(&mut s, "eps_p_eq", &mut (0..m).map(|e| ip_average(|i| fields.eps_p_eq[i], e)));
    scalar(&mut s, "uncertainty", &mut (0..m).map(|e| ip_average(|i| fields.uncertainty[i], e)));
    Ok(s)
}

pub fn write_vtk(path: impl AsRef<Path>, mesh: &Mesh, fields: &VtkFields, title: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_vtk(mesh, fields, title)?).map_err(|e| Error::io(path, e))
}
