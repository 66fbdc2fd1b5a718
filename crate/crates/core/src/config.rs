//! Run configuration: named presets overridden by flat, dot-namespaced JSON keys.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::forms::ElementPair;
use crate::materials::MaterialParams;
use crate::solver::SolverOptions;
use crate::stepper::SchemeParams;

/// Largest accepted refinement level.
pub const MAX_LEVEL: u32 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Rotating interface driven by a manufactured phase source; exact solution known.
    Convergence,
    KelvinHelmholtz,
    RtSphere,
    RtTorus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceChoice {
    Sphere,
    Torus,
}

/// How the interface offset of the Rayleigh-Taylor initial state is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// One draw per interpolation node.
    Nodal,
    /// A single draw shared by all nodes.
    Global,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(rename = "surface.kind")]
    pub surface: SurfaceChoice,
    #[serde(rename = "surface.torus_major")]
    pub torus_major: f64,
    #[serde(rename = "surface.torus_r_min")]
    pub torus_r_min: f64,
    #[serde(rename = "surface.torus_r_max")]
    pub torus_r_max: f64,
    #[serde(rename = "mesh.level")]
    pub level: u32,
    #[serde(rename = "mesh.sublevels")]
    pub sublevels: u32,
    #[serde(rename = "quadrature.surface_degree")]
    pub surface_degree: u32,
    #[serde(rename = "quadrature.bulk_degree")]
    pub bulk_degree: u32,
    #[serde(rename = "fe.element_pair")]
    pub element_pair: ElementPair,
    #[serde(rename = "time.dt")]
    pub dt: f64,
    #[serde(rename = "time.t_end")]
    pub t_end: f64,
    #[serde(rename = "time.bdf_order_ch")]
    pub bdf_order_ch: u32,
    #[serde(rename = "model.rho1")]
    pub rho1: f64,
    #[serde(rename = "model.rho2")]
    pub rho2: f64,
    #[serde(rename = "model.eta1")]
    pub eta1: f64,
    #[serde(rename = "model.eta2")]
    pub eta2: f64,
    #[serde(rename = "model.alpha_smooth")]
    pub alpha_smooth: f64,
    #[serde(rename = "model.alpha_trunc")]
    pub alpha_trunc: f64,
    #[serde(rename = "model.truncate")]
    pub truncate: bool,
    #[serde(rename = "model.sigma_gamma")]
    pub sigma_gamma: f64,
    #[serde(rename = "model.mobility")]
    pub mobility: f64,
    #[serde(rename = "model.epsilon")]
    pub epsilon: f64,
    /// `null` selects the Lipschitz constant of the truncated well.
    #[serde(rename = "model.gamma_c")]
    pub gamma_c: Option<f64>,
    #[serde(rename = "model.gravity")]
    pub gravity: [f64; 3],
    #[serde(rename = "kh.delta_v")]
    pub kh_delta_v: f64,
    #[serde(rename = "kh.eps_p")]
    pub kh_eps_p: f64,
    #[serde(rename = "kh.m")]
    pub kh_m: u32,
    #[serde(rename = "rt.noise")]
    pub rt_noise: NoiseMode,
    /// Write a VTK snapshot every this many steps (0: initial and final only).
    #[serde(rename = "output.vtk_every")]
    pub vtk_every: usize,
    #[serde(rename = "output.vtk")]
    pub vtk: bool,
    #[serde(rename = "run.seed")]
    pub seed: u64,
    #[serde(rename = "run.deterministic")]
    pub deterministic: bool,
    #[serde(rename = "solver.rtol")]
    pub rtol: f64,
    #[serde(rename = "solver.max_iterations")]
    pub max_iterations: usize,
    #[serde(rename = "solver.gmres_restart")]
    pub gmres_restart: usize,
    #[serde(rename = "solver.direct_limit")]
    pub direct_limit: usize,
}

impl RunConfig {
    /// Parameter sets of the rotating-interface, Kelvin-Helmholtz and Rayleigh-Taylor
    /// experiments.
    pub fn preset(scenario: Scenario) -> Self {
        let solver = SolverOptions::default();
        let base = Self {
            scenario,
            surface: SurfaceChoice::Sphere,
            torus_major: 1.0,
            torus_r_min: 0.3,
            torus_r_max: 0.6,
            level: 4,
            sublevels: 2,
            surface_degree: 4,
            bulk_degree: 2,
            element_pair: ElementPair::TaylorHood,
            dt: 1.0 / 100.0,
            t_end: 1.0,
            bdf_order_ch: 2,
            rho1: 1.0,
            rho2: 1.0,
            eta1: 1.0,
            eta2: 1.0,
            alpha_smooth: 0.1,
            alpha_trunc: 2.0,
            truncate: true,
            sigma_gamma: 0.0,
            mobility: 0.05,
            epsilon: 0.05,
            gamma_c: None,
            gravity: [0.0; 3],
            kh_delta_v: 0.05,
            kh_eps_p: 0.01,
            kh_m: 4,
            rt_noise: NoiseMode::Nodal,
            vtk_every: 0,
            vtk: true,
            seed: 0,
            deterministic: true,
            rtol: solver.rtol,
            max_iterations: solver.max_iterations,
            gmres_restart: solver.gmres_restart,
            direct_limit: solver.direct_limit,
        };
        match scenario {
            // The γ_c Δt/ε [c]_t term is first order in Δt and, at γ_c = L, dominates the
            // error of the BDF2 phase step on this smooth solution.
            Scenario::Convergence => Self {
                gamma_c: Some(0.0),
                ..base
            },
            Scenario::KelvinHelmholtz => Self {
                level: 6,
                sublevels: 1,
                dt: 1.0 / 640.0,
                t_end: 10.0,
                bdf_order_ch: 1,
                eta1: 1e-5,
                eta2: 1e-5,
                sigma_gamma: 0.01,
                mobility: 0.01,
                epsilon: 0.01,
                vtk_every: 160,
                ..base
            },
            Scenario::RtSphere => Self {
                level: 5,
                sublevels: 1,
                dt: 0.1,
                t_end: 55.0,
                bdf_order_ch: 1,
                rho1: 1.0,
                rho2: 3.0,
                eta1: 1e-2,
                eta2: 1e-2,
                sigma_gamma: 0.025,
                mobility: 0.0025,
                epsilon: 0.025,
                gravity: [0.0, 0.0, -1.0],
                vtk_every: 10,
                ..base
            },
            Scenario::RtTorus => Self {
                surface: SurfaceChoice::Torus,
                t_end: 160.0,
                ..Self::preset(Scenario::RtSphere)
            },
        }
    }

    /// Builds a configuration from a JSON object of flat keys. `scenario` selects the preset
    /// (default `convergence`); every other key overrides one preset entry.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        let Value::Object(map) = value else {
            return Err(Error::Config("configuration must be a JSON object".into()));
        };
        Self::from_overrides(&map)
    }

    pub fn from_overrides(map: &Map<String, Value>) -> Result<Self> {
        let scenario = match map.get("scenario") {
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("scenario: {e}")))?,
            None => Scenario::Convergence,
        };
        let preset = Self::preset(scenario);
        let Value::Object(mut merged) = serde_json::to_value(&preset)? else {
            unreachable!("config serializes to an object");
        };
        for (k, v) in map {
            match merged.get_mut(k) {
                Some(slot) => *slot = v.clone(),
                None => return Err(Error::Config(format!("unknown key `{k}`"))),
            }
        }
        let cfg: Self =
            serde_json::from_value(Value::Object(merged)).map_err(|e| Error::Config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Pretty JSON with every key, reloadable by [`Self::from_json`].
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.level > MAX_LEVEL {
            return Err(Error::Config(format!("mesh.level must be at most {MAX_LEVEL}, got {}", self.level)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("time.t_end must be nonnegative, got {}", self.t_end)));
        }
        if self.sublevels > 6 {
            return Err(Error::Config(format!("mesh.sublevels must be at most 6, got {}", self.sublevels)));
        }
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            return Err(Error::Config(format!("solver.rtol must lie in (0, 1), got {}", self.rtol)));
        }
        if self.gmres_restart == 0 || self.max_iterations == 0 {
            return Err(Error::Config("solver.gmres_restart and solver.max_iterations must be positive".into()));
        }
        if !(self.kh_delta_v > 0.0) {
            return Err(Error::Config("kh.delta_v must be positive".into()));
        }
        if matches!(self.scenario, Scenario::Convergence | Scenario::KelvinHelmholtz) && self.surface != SurfaceChoice::Sphere {
            return Err(Error::Config(format!("{:?} requires the sphere", self.scenario)));
        }
        self.scheme().validate()?;
        crate::materials::Materials::new(self.materials())?;
        Ok(())
    }

    pub fn materials(&self) -> MaterialParams {
        MaterialParams {
            rho1: self.rho1,
            rho2: self.rho2,
            eta1: self.eta1,
            eta2: self.eta2,
            alpha_smooth: self.alpha_smooth,
            alpha_trunc: self.alpha_trunc,
            truncate: self.truncate,
        }
    }

    pub fn scheme(&self) -> SchemeParams {
        SchemeParams {
            dt: self.dt,
            gamma_c: self.gamma_c,
            bdf_order_ch: self.bdf_order_ch,
            sigma_gamma: self.sigma_gamma,
            mobility: self.mobility,
            epsilon: self.epsilon,
            gravity: self.gravity,
        }
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            rtol: self.rtol,
            max_iterations: self.max_iterations,
            gmres_restart: self.gmres_restart,
            direct_limit: self.direct_limit,
            ..SolverOptions::default()
        }
    }

    /// Number of steps to reach `t_end`, rounding to the nearest whole step.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Named configurations shipped with the driver.
pub fn named_preset(name: &str) -> Option<RunConfig> {
    let with = |s: Scenario, f: &dyn Fn(&mut RunConfig)| {
        let mut c = RunConfig::preset(s);
        f(&mut c);
        c
    };
    Some(match name {
        "convergence" => RunConfig::preset(Scenario::Convergence),
        "kh_sigma0" => with(Scenario::KelvinHelmholtz, &|c| c.sigma_gamma = 0.0),
        "kh_sigma0.01" => RunConfig::preset(Scenario::KelvinHelmholtz),
        "kh_sigma0.1" => with(Scenario::KelvinHelmholtz, &|c| c.sigma_gamma = 0.1),
        "rt_sphere_sigma0" => with(Scenario::RtSphere, &|c| c.sigma_gamma = 0.0),
        "rt_sphere_sigma0.025" => RunConfig::preset(Scenario::RtSphere),
        "rt_torus_eta0.01" => RunConfig::preset(Scenario::RtTorus),
        "rt_torus_eta0.1" => with(Scenario::RtTorus, &|c| {
            c.eta1 = 0.1;
            c.eta2 = 0.1;
        }),
        "rt_torus_eta1" => with(Scenario::RtTorus, &|c| {
            c.eta1 = 1.0;
            c.eta2 = 1.0;
        }),
        _ => return None,
    })
}

pub const PRESET_NAMES: [&str; 9] = [
    "convergence",
    "kh_sigma0",
    "kh_sigma0.01",
    "kh_sigma0.1",
    "rt_sphere_sigma0",
    "rt_sphere_sigma0.025",
    "rt_torus_eta0.01",
    "rt_torus_eta0.1",
    "rt_torus_eta1",
];
