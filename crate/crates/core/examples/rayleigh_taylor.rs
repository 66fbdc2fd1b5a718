//! Rayleigh-Taylor fingering on the sphere: heavy phase on top, gravity along -z. Prints the
//! height of the heavy phase as it falls.
//!
//!     cargo run --release --example rayleigh_taylor -- out/rt 5.0

use std::path::PathBuf;

use surface_nsch::config::{RunConfig, Scenario};
use surface_nsch::diagnostics::heavy_phase_height;
use surface_nsch::scenarios::{build_discretization, build_stepper, initial_state};

fn main() -> surface_nsch::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/rayleigh_taylor".into()));
    let t_end: f64 = args.next().map(|s| s.parse().expect("t_end")).unwrap_or(5.0);

    let mut cfg = RunConfig::preset(Scenario::RtSphere);
    cfg.level = 3;
    cfg.t_end = t_end;
    cfg.validate()?;

    let disc = build_discretization(&cfg)?;
    let mut stepper = build_stepper(&cfg, disc.clone())?;
    let mut state = initial_state(&cfg, &stepper)?;
    std::fs::create_dir_all(&out)?;
    println!("t      height");
    for k in 0..=cfg.n_steps() {
        if k > 0 {
            state = stepper.advance(&state)?.0;
        }
        if k % 10 == 0 {
            println!("{:5.1}  {:.5}", state.t, heavy_phase_height(&stepper, &state.c)?);
        }
    }
    let w = surface_nsch::diagnostics::vorticity(&stepper, &state.u, &cfg.solver())?;
    surface_nsch::output::write_vtk(&disc, &state, &w, &out.join("final.vtk"))?;
    Ok(())
}
