//! Refinement study of the rotating interface with the default steps and sublevels.
//!
//!     cargo run --release --example rotating_convergence -- 3 4

use surface_nsch::config::{RunConfig, Scenario};
use surface_nsch::driver::run_study;

fn main() -> surface_nsch::Result<()> {
    let levels: Vec<u32> = std::env::args().skip(1).map(|a| a.parse().expect("level")).collect();
    let levels = if levels.is_empty() { vec![2, 3] } else { levels };
    let base = RunConfig::preset(Scenario::Convergence);
    let rows = run_study(&base, &levels, None, None)?;
    println!("level  sublevels  dt        u H1        rate   u L2        rate   c L2        rate   |n.u|");
    let r = |v: Option<f64>| v.map(|x| format!("{x:5.2}")).unwrap_or_else(|| "    -".into());
    for row in &rows {
        let e = &row.errors;
        println!(
            "{:5}  {:9}  {:.5}  {:.4e}  {}  {:.4e}  {}  {:.4e}  {}  {:.3e}",
            e.level,
            e.sublevels,
            e.dt,
            e.u_h1,
            r(row.rate_u_h1),
            e.u_l2,
            r(row.rate_u_l2),
            e.c_l2,
            r(row.rate_c_l2),
            e.tangential
        );
    }
    Ok(())
}
