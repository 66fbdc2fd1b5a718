//! VTK legacy (ASCII POLYDATA) snapshots of `Γ_h` and CSV diagnostics tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::cut::cut_triangles;
use crate::diagnostics::DiagnosticsRow;
use crate::error::Result;
use crate::fe::FeFunction;
use crate::forms::Discretization;
use crate::stepper::State;

/// Writes `Γ_h` with the fields of `state`. Each triangle carries its own three points, so the
/// point count is three times the triangle count.
pub fn write_vtk(disc: &Discretization, state: &State, vorticity: &FeFunction, path: &Path) -> Result<()> {
    let mut points = Vec::new();
    let mut owner = Vec::new();
    for a in 0..disc.active.len() {
        for tri in cut_triangles(&disc.active, a, disc.surf.sublevels) {
            for x in tri {
                points.push(x);
                owner.push(a);
            }
        }
    }
    let n = points.len();
    let mut c = Vec::with_capacity(n);
    let mut mu = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    for (x, &a) in points.iter().zip(&owner) {
        let bary = disc.active.geoms[a].barycentric(x);
        c.push(disc.phase.eval_scalar(a, &bary, &state.c.coeffs).0);
        mu.push(disc.phase.eval_scalar(a, &bary, &state.mu.coeffs).0);
        w.push(disc.phase.eval_scalar(a, &bary, &vorticity.coeffs).0);
        p.push(disc.pres.eval_scalar(a, &bary, &state.p.coeffs).0);
        u.push(disc.vel.eval_vector(a, &bary, &state.u.coeffs).0);
    }

    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "# vtk DataFile Version 3.0")?;
    writeln!(f, "surface fields t={} step={}", state.t, state.n)?;
    writeln!(f, "ASCII")?;
    writeln!(f, "DATASET POLYDATA")?;
    writeln!(f, "POINTS {n} double")?;
    for x in &points {
        writeln!(f, "{} {} {}", x[0], x[1], x[2])?;
    }
    let ntri = n / 3;
    writeln!(f, "POLYGONS {ntri} {}", 4 * ntri)?;
    for t in 0..ntri {
        writeln!(f, "3 {} {} {}", 3 * t, 3 * t + 1, 3 * t + 2)?;
    }
    writeln!(f, "POINT_DATA {n}")?;
    for (name, vals) in [("c", &c), ("mu", &mu), ("p", &p), ("vorticity", &w)] {
        writeln!(f, "SCALARS {name} double 1")?;
        writeln!(f, "LOOKUP_TABLE default")?;
        for v in vals.iter() {
            writeln!(f, "{v}")?;
        }
    }
    writeln!(f, "VECTORS u double")?;
    for v in &u {
        writeln!(f, "{} {} {}", v[0], v[1], v[2])?;
    }
    f.flush()?;
    Ok(())
}

pub fn write_csv(rows: &[DiagnosticsRow], path: &Path) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    write_csv_header(&mut f)?;
    for r in rows {
        write_csv_row(&mut f, r)?;
    }
    f.flush()?;
    Ok(())
}

pub fn write_csv_header(w: &mut impl Write) -> Result<()> {
    writeln!(w, "{}", DiagnosticsRow::HEADER.join(","))?;
    Ok(())
}

pub fn write_csv_row(w: &mut impl Write, r: &DiagnosticsRow) -> Result<()> {
    let v = r.values();
    let mut line = format!("{},{}", r.step, v[1]);
    for x in &v[2..] {
        line.push(',');
        line.push_str(&x.to_string());
    }
    writeln!(w, "{line}")?;
    Ok(())
}
