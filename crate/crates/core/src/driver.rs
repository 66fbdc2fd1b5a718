//! Time loop of a configured run with diagnostics, snapshots and a summary, and the
//! multi-level refinement study.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::config::{RunConfig, Scenario};
use crate::diagnostics::{compute_row, heavy_phase_height, vorticity, DiagnosticsRow, StabilityMonitor};
use crate::error::Result;
use crate::output::{write_csv_header, write_csv_row, write_vtk};
use crate::scenarios::{
    build_discretization, build_stepper, convergence_config, convergence_errors, exact_solution, initial_state,
    rate, run_convergence_level, ConvergenceErrors,
};
use crate::stepper::State;

#[derive(Clone, Debug, Default, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub t_final: f64,
    pub mass_initial: f64,
    pub mass_final: f64,
    /// `|∫c^N - ∫c^0| / |∫c^0|`.
    pub mass_drift: f64,
    /// Largest `theorem_lhs / theorem_K` over the run.
    pub max_stability_ratio: f64,
    pub heavy_height_initial: Option<f64>,
    pub heavy_height_final: Option<f64>,
    pub errors: Option<ConvergenceErrors>,
    pub ns_iterations: usize,
    pub rows: Vec<DiagnosticsRow>,
}

/// Runs `cfg` to `t_end`. With `out`, writes `config.json`, `diagnostics.csv`,
/// `summary.json` and VTK snapshots into that directory.
pub fn run(cfg: &RunConfig, out: Option<&Path>) -> Result<RunSummary> {
    cfg.validate()?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.json"), cfg.to_canonical_json())?;
    }
    let disc = build_discretization(cfg)?;
    let mut stepper = build_stepper(cfg, disc.clone())?;
    let mut state = initial_state(cfg, &stepper)?;
    let mut monitor = StabilityMonitor::default();
    let mut csv = match out {
        Some(dir) => {
            let mut w = BufWriter::new(fs::File::create(dir.join("diagnostics.csv"))?);
            write_csv_header(&mut w)?;
            Some(w)
        }
        None => None,
    };
    let rt = matches!(cfg.scenario, Scenario::RtSphere | Scenario::RtTorus);
    let mut summary = RunSummary::default();
    if rt {
        summary.heavy_height_initial = Some(heavy_phase_height(&stepper, &state.c)?);
    }
    let n_steps = cfg.n_steps();
    let snapshot = |state: &State, stepper: &crate::stepper::Stepper| -> Result<()> {
        if let (Some(dir), true) = (out, cfg.vtk) {
            let w = vorticity(stepper, &state.u, &stepper.solver)?;
            write_vtk(&disc, state, &w, &dir.join(format!("state_{:06}.vtk", state.n)))?;
        }
        Ok(())
    };
    let mut record = |row: DiagnosticsRow, summary: &mut RunSummary| -> Result<()> {
        if let Some(w) = csv.as_mut() {
            write_csv_row(w, &row)?;
        }
        if row.theorem_k > 0.0 {
            summary.max_stability_ratio = summary.max_stability_ratio.max(row.theorem_lhs / row.theorem_k);
        }
        summary.rows.push(row);
        Ok(())
    };
    let row0 = compute_row(&stepper, &state, &mut monitor)?;
    record(row0, &mut summary)?;
    snapshot(&state, &stepper)?;
    for k in 1..=n_steps {
        let (next, info) = stepper.advance(&state)?;
        state = next;
        monitor.record_step(cfg.dt, cfg.sigma_gamma, &info);
        summary.ns_iterations += info.ns.iterations;
        let row = compute_row(&stepper, &state, &mut monitor)?;
        log::info!(
            "step {k}/{n_steps} t={:.4} ch_it={} ns_it={} kinetic={:.6e} mass={:.12}",
            state.t,
            info.ch.iterations,
            info.ns.iterations,
            row.kinetic,
            row.mass
        );
        record(row, &mut summary)?;
        let due = cfg.vtk_every > 0 && k % cfg.vtk_every == 0;
        if due || k == n_steps {
            snapshot(&state, &stepper)?;
        }
    }
    if let Some(mut w) = csv {
        w.flush()?;
    }
    summary.steps = n_steps;
    summary.t_final = state.t;
    summary.mass_initial = summary.rows[0].mass;
    summary.mass_final = state_mass(&summary);
    summary.mass_drift = (summary.mass_final - summary.mass_initial).abs() / summary.mass_initial.abs();
    if rt {
        summary.heavy_height_final = Some(heavy_phase_height(&stepper, &state.c)?);
    }
    if cfg.scenario == Scenario::Convergence {
        let mut e = convergence_errors(&disc, &exact_solution(cfg), &state);
        e.dt = cfg.dt;
        summary.errors = Some(e);
    }
    if let Some(dir) = out {
        let mut s = serde_json::to_value(&summary)?;
        if let Some(m) = s.as_object_mut() {
            m.remove("rows");
        }
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&s)?)?;
    }
    Ok(summary)
}

fn state_mass(s: &RunSummary) -> f64 {
    s.rows.last().map(|r| r.mass).unwrap_or(0.0)
}

/// One line of the refinement table; rates are relative to the previous level.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StudyRow {
    pub errors: ConvergenceErrors,
    pub rate_u_h1: Option<f64>,
    pub rate_u_l2: Option<f64>,
    pub rate_c_l2: Option<f64>,
}

/// Runs the rotating scenario at each level with the default step and sublevels unless given.
pub fn run_study(
    base: &RunConfig,
    levels: &[u32],
    sublevels: Option<&[u32]>,
    dts: Option<&[f64]>,
) -> Result<Vec<StudyRow>> {
    let mut rows: Vec<StudyRow> = Vec::new();
    for (i, &level) in levels.iter().enumerate() {
        let cfg = convergence_config(base, level, sublevels.map(|s| s[i]), dts.map(|d| d[i]));
        let e = run_convergence_level(&cfg)?;
        log::info!("level {level}: {e:?}");
        let prev = rows.last().map(|r| r.errors);
        rows.push(StudyRow {
            errors: e,
            rate_u_h1: prev.map(|p| rate(p.u_h1, e.u_h1)),
            rate_u_l2: prev.map(|p| rate(p.u_l2, e.u_l2)),
            rate_c_l2: prev.map(|p| rate(p.c_l2, e.c_l2)),
        });
    }
    Ok(rows)
}

pub fn write_study_csv(rows: &[StudyRow], path: &Path) -> Result<()> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    writeln!(f, "level,sublevels,h,dt,u_h1,rate_u_h1,u_l2,rate_u_l2,c_l2,rate_c_l2,tangential")?;
    let opt = |r: Option<f64>| r.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        let e = &r.errors;
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{},{},{}",
            e.level,
            e.sublevels,
            e.h,
            e.dt,
            e.u_h1,
            opt(r.rate_u_h1),
            e.u_l2,
            opt(r.rate_u_l2),
            e.c_l2,
            opt(r.rate_c_l2),
            e.tangential
        )?;
    }
    f.flush()?;
    Ok(())
}
