//! Tabulates the cut-off and smoothed densities, θ² and the truncated double-well derivative
//! for the Rayleigh-Taylor densities (phase 2 heavy, so the phases are relabeled internally).
//!
//!     cargo run --example material_laws

use surface_nsch::materials::{MaterialParams, Materials};

fn main() -> surface_nsch::Result<()> {
    let m = Materials::new(MaterialParams {
        rho1: 1.0,
        rho2: 3.0,
        ..MaterialParams::default()
    })?;
    println!("L = {}, branch points {:?}", m.lipschitz(), m.branch_points());
    println!("    c   rho_cut  rho_smooth  theta^2   f0'_trunc");
    for i in 0..=16 {
        let c = -0.6 + 0.1375 * i as f64;
        println!(
            "{c:6.3}  {:7.4}  {:10.6}  {:7.4}  {:10.6}",
            m.density_cutoff(c),
            m.density_smooth(c),
            m.theta_sq(c),
            m.f0_prime_trunc(c)
        );
    }
    Ok(())
}
