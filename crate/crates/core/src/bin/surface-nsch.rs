use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use surface_nsch::config::{named_preset, RunConfig, PRESET_NAMES};
use surface_nsch::driver::{run, run_study, write_study_csv};
use surface_nsch::Error;

#[derive(Parser)]
#[command(name = "surface-nsch", version, about = "Two-phase surface flow simulations")]
struct Cli {
    /// Force the fixed-order single-threaded code path (the only one implemented).
    #[arg(long, global = true)]
    deterministic: bool,
    /// Seed of the initial-noise generator; overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured scenario.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Refinement study of the rotating-interface scenario.
    Convergence {
        #[arg(long, num_args = 1.., required = true)]
        levels: Vec<u32>,
        #[arg(long, num_args = 1..)]
        sublevels: Option<Vec<u32>>,
        #[arg(long, num_args = 1..)]
        dts: Option<Vec<f64>>,
        /// Base configuration (defaults to the convergence preset).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a named preset as a loadable configuration.
    Preset { name: String },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Json(_)
        | Error::InvalidSurface(_)
        | Error::LevelTooLarge(_)
        | Error::SurfaceOutsideDomain(_)
        | Error::Unsupported { .. } => 3,
        _ => 2,
    }
}

fn apply_flags(mut cfg: RunConfig, cli: &Cli) -> RunConfig {
    if cli.deterministic {
        cfg.deterministic = true;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg
}

fn execute(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Run { config, out } => {
            let cfg = apply_flags(RunConfig::load(config)?, cli);
            let s = run(&cfg, Some(out))?;
            println!(
                "steps {} t {} mass drift {:.3e} max stability ratio {:.6}",
                s.steps, s.t_final, s.mass_drift, s.max_stability_ratio
            );
            if let (Some(a), Some(b)) = (s.heavy_height_initial, s.heavy_height_final) {
                println!("heavy-phase height {a:.6} -> {b:.6}");
            }
            if let Some(e) = s.errors {
                println!("errors u H1 {:.6e} u L2 {:.6e} c L2 {:.6e}", e.u_h1, e.u_l2, e.c_l2);
            }
        }
        Command::Convergence {
            levels,
            sublevels,
            dts,
            config,
            out,
        } => {
            for (name, len) in [("sublevels", sublevels.as_ref().map(Vec::len)), ("dts", dts.as_ref().map(Vec::len))] {
                if len.is_some_and(|l| l != levels.len()) {
                    return Err(Error::Config(format!("--{name} must have one entry per level")));
                }
            }
            let base = match config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::preset(surface_nsch::config::Scenario::Convergence),
            };
            let base = apply_flags(base, cli);
            std::fs::create_dir_all(out)?;
            let rows = run_study(&base, levels, sublevels.as_deref(), dts.as_deref())?;
            write_study_csv(&rows, &out.join("convergence.csv"))?;
            for r in &rows {
                let e = &r.errors;
                println!(
                    "level {} sublevels {} u H1 {:.6e} ({}) u L2 {:.6e} ({}) c L2 {:.6e} ({})",
                    e.level,
                    e.sublevels,
                    e.u_h1,
                    fmt_rate(r.rate_u_h1),
                    e.u_l2,
                    fmt_rate(r.rate_u_l2),
                    e.c_l2,
                    fmt_rate(r.rate_c_l2)
                );
            }
        }
        Command::Preset { name } => {
            let cfg = named_preset(name).ok_or_else(|| {
                Error::Config(format!("unknown preset `{name}`; known: {}", PRESET_NAMES.join(", ")))
            })?;
            println!("{}", apply_flags(cfg, cli).to_canonical_json());
        }
    }
    Ok(())
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
