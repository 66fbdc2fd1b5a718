//! Surface vorticity of a rigid rotation and of a surface gradient, exported to VTK. The
//! rotation about the x-axis has vorticity -2x; the gradient field has none.
//!
//!     cargo run --release --example vorticity_vtk -- out/vorticity

use std::path::PathBuf;

use surface_nsch::config::{RunConfig, Scenario};
use surface_nsch::diagnostics::vorticity;
use surface_nsch::geometry::{Point, Vec3};
use surface_nsch::output::write_vtk;
use surface_nsch::scenarios::{build_discretization, build_stepper};
use surface_nsch::stepper::State;

fn main() -> surface_nsch::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/vorticity".into()));
    std::fs::create_dir_all(&out)?;
    let mut cfg = RunConfig::preset(Scenario::Convergence);
    cfg.level = 3;
    cfg.sublevels = 1;
    let disc = build_discretization(&cfg)?;
    let stepper = build_stepper(&cfg, disc.clone())?;

    let fields: [(&str, Box<dyn Fn(&Point) -> Vec3>); 2] = [
        ("rotation", Box::new(|x: &Point| Vec3::new(0.0, -x[2], x[1]) / x.norm())),
        ("gradient", Box::new(|x: &Point| {
            let n = x / x.norm();
            Vec3::z() - n * n[2]
        })),
    ];
    for (name, f) in fields {
        let u = disc.vel.interpolate_vec(f);
        let w = vorticity(&stepper, &u, &cfg.solver())?;
        let err = disc
            .integrate(|a, sp| {
                let exact = if name == "rotation" { -2.0 * sp.x[0] / sp.x.norm() } else { 0.0 };
                (disc.eval_phase(a, sp, &w).0 - exact).powi(2)
            })
            .sqrt();
        println!("{name}: L2 error of the projected vorticity {err:.4e}");
        let state = State {
            t: 0.0,
            n: 0,
            u,
            p: disc.pres.zero(),
            c: disc.phase.zero(),
            mu: disc.phase.zero(),
            c_prev: None,
        };
        write_vtk(&disc, &state, &w, &out.join(format!("{name}.vtk")))?;
    }
    Ok(())
}
