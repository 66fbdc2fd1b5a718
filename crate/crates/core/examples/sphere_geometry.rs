//! Cut geometry of the unit sphere and the asymmetric torus: active tetrahedra, band volume
//! and the area of the piecewise planar surface for a few levels and sublevels.
//!
//!     cargo run --release --example sphere_geometry

use std::f64::consts::PI;

use surface_nsch::cut::surface_area;
use surface_nsch::mesh::build_active;
use surface_nsch::surface::{make_asymmetric_torus, make_sphere};

fn main() -> surface_nsch::Result<()> {
    let sphere = make_sphere();
    println!("sphere  level sublevels  active      h       |A_h - 4pi|");
    for (level, sub) in [(2, 0), (3, 1), (4, 2), (5, 2)] {
        let active = build_active(&sphere, level)?;
        let err = (surface_area(&active, sub) - 4.0 * PI).abs();
        println!("        {level:5} {sub:9} {:7} {:8.5} {err:12.4e}", active.len(), active.h());
    }

    let torus = make_asymmetric_torus(1.0, 0.3, 0.6)?;
    println!("torus   level  active   band volume   area (sublevels 2)");
    for level in 3..=5 {
        let active = build_active(&torus, level)?;
        println!(
            "        {level:5} {:7} {:13.6} {:14.6}",
            active.len(),
            active.band_volume(),
            surface_area(&active, 2)
        );
    }
    Ok(())
}
