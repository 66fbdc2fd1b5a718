//! Scenario setup: the rotating-interface solution with its manufactured phase source, the
//! Kelvin-Helmholtz and Rayleigh-Taylor initial states, and the refinement study.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{NoiseMode, RunConfig, Scenario, SurfaceChoice};
use crate::error::Result;
use crate::fe::FeFunction;
use crate::forms::Discretization;
use crate::geometry::{projector, Mat3, Point, Vec3};
use crate::mesh::build_active;
use crate::stepper::{PhaseForcing, State, Stepper};
use crate::surface::{make_asymmetric_torus, make_sphere, LevelSetSurface};

/// `Δ_Γ G(a·x)` on the unit sphere for a profile with derivatives `g1 = G'`, `g2 = G''`.
#[inline]
pub fn sphere_profile_laplacian(w: f64, g1: f64, g2: f64) -> f64 {
    (1.0 - w * w) * g2 - 2.0 * w * g1
}

/// Interface profile rotated rigidly about the x axis on the unit sphere:
/// `c* = g(a(t)·x)`, `g(w) = ½(1 + tanh(w/(2√2ε)))`, `a(t) = (0, -sin πt, cos πt)`,
/// carried by `u* = π(0, -z, y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactRotatingSolution {
    pub epsilon: f64,
    pub mobility: f64,
}

impl ExactRotatingSolution {
    pub fn new(epsilon: f64, mobility: f64) -> Self {
        Self { epsilon, mobility }
    }

    pub fn axis(t: f64) -> Vec3 {
        Vec3::new(0.0, -(PI * t).sin(), (PI * t).cos())
    }

    fn delta(&self) -> f64 {
        2.0 * 2f64.sqrt() * self.epsilon
    }

    /// `a(t)·x/|x|`; the radial normalization extends the profile constantly off the sphere.
    pub fn w(t: f64, x: &Point) -> f64 {
        Self::axis(t).dot(x) / x.norm()
    }

    /// `(g, 1 - g)` without cancellation in the saturated tails.
    fn split(&self, w: f64) -> (f64, f64) {
        let e = (-2.0 * w.abs() / self.delta()).exp();
        let (big, small) = (1.0 / (1.0 + e), e / (1.0 + e));
        if w >= 0.0 {
            (big, small)
        } else {
            (small, big)
        }
    }

    /// `g` and its first four derivatives at `w`.
    pub fn profile(&self, w: f64) -> [f64; 5] {
        let d = self.delta();
        let (g, h) = self.split(w);
        let s = g - h;
        let q = 4.0 * g * h;
        [
            g,
            q / (2.0 * d),
            -s * q / (d * d),
            -q * (1.0 - 3.0 * s * s) / d.powi(3),
            4.0 * s * q * (2.0 - 3.0 * s * s) / d.powi(4),
        ]
    }

    pub fn phase(&self, t: f64, x: &Point) -> f64 {
        self.profile(Self::w(t, x))[0]
    }

    /// `π(0, -z, y)` at `x/|x|`, constant along the normal.
    pub fn velocity(x: &Point) -> Vec3 {
        let r = x.norm();
        PI * Vec3::new(0.0, -x[2], x[1]) / r
    }

    /// Jacobian of [`Self::velocity`]: `π R (I - x̂x̂ᵀ)/|x|`, `R` the rotation generator.
    pub fn velocity_jacobian(x: &Point) -> Mat3 {
        let r = x.norm();
        let y = x / r;
        PI * Mat3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0) * (Mat3::identity() - y * y.transpose()) / r
    }

    /// Pressure balancing the centripetal acceleration at unit density, zero mean on the sphere.
    pub fn pressure(x: &Point) -> f64 {
        let y = x / x.norm();
        PI * PI * (0.5 * (y[1] * y[1] + y[2] * y[2]) - 1.0 / 3.0)
    }

    /// `μ*` together with `dμ*/dw` and `d²μ*/dw²`.
    fn chemical_potential_jet(&self, w: f64) -> [f64; 3] {
        let [g, g1, g2, g3, g4] = self.profile(w);
        let eps = self.epsilon;
        let f = -g * self.split(w).1 * (g - 0.5);
        let f1 = 3.0 * g * g - 3.0 * g + 0.5;
        let f2 = 6.0 * g - 3.0;
        let l = (1.0 - w * w) * g2 - 2.0 * w * g1;
        let l1 = (1.0 - w * w) * g3 - 4.0 * w * g2 - 2.0 * g1;
        let l2 = (1.0 - w * w) * g4 - 6.0 * w * g3 - 6.0 * g2;
        [
            f / eps - eps * l,
            f1 * g1 / eps - eps * l1,
            (f2 * g1 * g1 + f1 * g2) / eps - eps * l2,
        ]
    }

    pub fn chemical_potential(&self, t: f64, x: &Point) -> f64 {
        self.chemical_potential_jet(Self::w(t, x))[0]
    }

    /// Phase source `f = -M Δ_Γ μ*`; the transport terms cancel because `w` is constant along
    /// the rotation.
    pub fn forcing(&self, t: f64, x: &Point) -> f64 {
        let w = Self::w(t, x);
        let [_, m1, m2] = self.chemical_potential_jet(w);
        -self.mobility * sphere_profile_laplacian(w, m1, m2)
    }
}

/// Base shear flow plus the azimuthal perturbation of the Kelvin-Helmholtz state, at the
/// radial projection of `x` onto the unit sphere.
pub fn kh_velocity(x: &Point, delta_v: f64, eps_p: f64, m: u32) -> Vec3 {
    kh_base_velocity(x, delta_v) + kh_perturbation(x, delta_v, eps_p, m)
}

pub fn kh_base_velocity(x: &Point, delta_v: f64) -> Vec3 {
    let y = x / x.norm();
    let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
    if r < 1e-14 {
        return Vec3::zeros();
    }
    let e_phi = Vec3::new(-y[1], y[0], 0.0) / r;
    e_phi * ((y[2] / (2.0 * delta_v)).tanh() * r)
}

pub fn kh_perturbation(x: &Point, delta_v: f64, eps_p: f64, m: u32) -> Vec3 {
    let y = x / x.norm();
    let e = projector(&y) * Vec3::new(0.0, 0.0, 1.0);
    let en = e.norm();
    if en < 1e-14 {
        return Vec3::zeros();
    }
    let phi = y[1].atan2(y[0]);
    e / en * (eps_p * (-(y[2] / delta_v).powi(2)).exp() * (m as f64 * phi).cos())
}

/// `½(1 + tanh(z/(2√2ε)))`.
pub fn kh_phase(x: &Point, epsilon: f64) -> f64 {
    let y = x / x.norm();
    0.5 * (1.0 + (y[2] / (2.0 * 2f64.sqrt() * epsilon)).tanh())
}

/// Interface offsets `z_rand ∈ (-0.1ε, 0.1ε)`, one per node or one shared draw.
pub fn rt_offsets(n: usize, epsilon: f64, mode: NoiseMode, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = 0.1 * epsilon;
    let mut draw = || {
        // Open interval: resample the (measure zero) endpoint.
        loop {
            let v: f64 = rng.random_range(-amp..amp);
            if v > -amp {
                return v;
            }
        }
    };
    match mode {
        NoiseMode::Nodal => (0..n).map(|_| draw()).collect(),
        NoiseMode::Global => vec![draw(); n],
    }
}

/// Rayleigh-Taylor phase field with the heavy phase (`c = 0` for the heavy phase 2) on top:
/// `c0 = ½(1 - tanh((z + z_rand)/(2√2ε)))`.
pub fn rt_phase(z: f64, z_rand: f64, epsilon: f64) -> f64 {
    0.5 * (1.0 - ((z + z_rand) / (2.0 * 2f64.sqrt() * epsilon)).tanh())
}

pub fn build_surface(cfg: &RunConfig) -> Result<LevelSetSurface> {
    match cfg.surface {
        SurfaceChoice::Sphere => Ok(make_sphere()),
        SurfaceChoice::Torus => make_asymmetric_torus(cfg.torus_major, cfg.torus_r_min, cfg.torus_r_max),
    }
}

pub fn build_discretization(cfg: &RunConfig) -> Result<Arc<Discretization>> {
    let surface = build_surface(cfg)?;
    let active = Arc::new(build_active(&surface, cfg.level)?);
    Ok(Arc::new(Discretization::new(
        active,
        cfg.element_pair,
        cfg.sublevels,
        cfg.surface_degree,
        cfg.bulk_degree,
        cfg.epsilon,
    )?))
}

pub fn exact_solution(cfg: &RunConfig) -> ExactRotatingSolution {
    ExactRotatingSolution::new(cfg.epsilon, cfg.mobility)
}

pub fn build_stepper(cfg: &RunConfig, disc: Arc<Discretization>) -> Result<Stepper> {
    let forcing: Option<PhaseForcing> = match cfg.scenario {
        Scenario::Convergence => {
            let exact = exact_solution(cfg);
            Some(Arc::new(move |t, x: &Point| exact.forcing(t, x)))
        }
        _ => None,
    };
    Stepper::new(disc, cfg.materials(), cfg.scheme(), cfg.solver(), forcing)
}

/// Initial fields of the configured scenario; `μ0` is the discrete chemical potential of `c0`.
pub fn initial_state(cfg: &RunConfig, stepper: &Stepper) -> Result<State> {
    let d = &stepper.disc;
    let (u, p, c) = match cfg.scenario {
        Scenario::Convergence => {
            let exact = exact_solution(cfg);
            (
                d.vel.interpolate_vec(ExactRotatingSolution::velocity),
                d.pres.interpolate(ExactRotatingSolution::pressure),
                d.phase.interpolate(|x| exact.phase(0.0, x)),
            )
        }
        Scenario::KelvinHelmholtz => (
            d.vel
                .interpolate_vec(|x| kh_velocity(x, cfg.kh_delta_v, cfg.kh_eps_p, cfg.kh_m)),
            d.pres.zero(),
            d.phase.interpolate(|x| kh_phase(x, cfg.epsilon)),
        ),
        Scenario::RtSphere | Scenario::RtTorus => {
            let nodes = d.phase.node_points();
            let offsets = rt_offsets(nodes.len(), cfg.epsilon, cfg.rt_noise, cfg.seed);
            let coeffs = nodes
                .iter()
                .zip(&offsets)
                .map(|(x, zr)| rt_phase(x[2], *zr, cfg.epsilon))
                .collect();
            (d.vel.zero(), d.pres.zero(), FeFunction::from_coeffs(1, coeffs))
        }
    };
    let mu = stepper.initial_mu(&c)?;
    Ok(State {
        t: 0.0,
        n: 0,
        u,
        p,
        c,
        mu,
        c_prev: None,
    })
}

/// Errors against the rotating solution at the time of `state`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ConvergenceErrors {
    pub level: u32,
    pub sublevels: u32,
    pub h: f64,
    pub dt: f64,
    pub u_h1: f64,
    pub u_l2: f64,
    pub c_l2: f64,
    pub tangential: f64,
}

/// `‖u* - u_h‖_{H¹(Γ_h)}` (all components, tangential derivatives), `‖u* - u_h‖_{L²}`,
/// `‖c* - c_h‖_{L²}` and `‖n·u_h‖_{L²}`.
pub fn convergence_errors(disc: &Discretization, exact: &ExactRotatingSolution, state: &State) -> ConvergenceErrors {
    let (mut u_l2, mut u_semi, mut c_l2, mut tang) = (0.0, 0.0, 0.0, 0.0);
    for a in 0..disc.active.len() {
        for sp in disc.surf.tet_points(a) {
            let (uh, jh) = disc.eval_velocity(a, sp, &state.u);
            let (ch, _) = disc.eval_phase(a, sp, &state.c);
            let e = uh - ExactRotatingSolution::velocity(&sp.x);
            let je = (jh - ExactRotatingSolution::velocity_jacobian(&sp.x)) * projector(&sp.n);
            u_l2 += sp.weight * e.norm_squared();
            u_semi += sp.weight * je.norm_squared();
            c_l2 += sp.weight * (ch - exact.phase(state.t, &sp.x)).powi(2);
            tang += sp.weight * uh.dot(&sp.n).powi(2);
        }
    }
    ConvergenceErrors {
        level: disc.active.mesh.level,
        sublevels: disc.surf.sublevels,
        h: disc.h(),
        dt: 0.0,
        u_h1: (u_l2 + u_semi).sqrt(),
        u_l2: u_l2.sqrt(),
        c_l2: c_l2.sqrt(),
        tangential: tang.sqrt(),
    }
}

/// Default step of the refinement study, `1/(25·2^(ℓ-2))`.
pub fn convergence_dt(level: u32) -> f64 {
    1.0 / (25.0 * 2f64.powi(level as i32 - 2))
}

/// Sublevels used at each level of the refinement study.
pub fn convergence_sublevels(level: u32) -> u32 {
    match level {
        0..=3 => 1,
        4 => 2,
        _ => 4,
    }
}

/// Observed order `log2(e_coarse/e_fine)` between consecutive levels.
pub fn rate(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Runs the rotating scenario to `cfg.t_end` and returns the final errors.
pub fn run_convergence_level(cfg: &RunConfig) -> Result<ConvergenceErrors> {
    let disc = build_discretization(cfg)?;
    let mut stepper = build_stepper(cfg, disc.clone())?;
    let mut state = initial_state(cfg, &stepper)?;
    for _ in 0..cfg.n_steps() {
        state = stepper.advance(&state)?.0;
    }
    let mut e = convergence_errors(&disc, &exact_solution(cfg), &state);
    e.dt = cfg.dt;
    Ok(e)
}

/// Configuration of one level of the refinement study.
pub fn convergence_config(base: &RunConfig, level: u32, sublevels: Option<u32>, dt: Option<f64>) -> RunConfig {
    RunConfig {
        scenario: Scenario::Convergence,
        level,
        sublevels: sublevels.unwrap_or_else(|| convergence_sublevels(level)),
        dt: dt.unwrap_or_else(|| convergence_dt(level)),
        ..base.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_is_unit() {
        for t in [0.0, 0.3, 1.7] {
            assert!((ExactRotatingSolution::axis(t).norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn profile_on_equator_is_half() {
        let s = ExactRotatingSolution::new(0.05, 0.05);
        assert_eq!(s.phase(0.0, &Point::new(0.0, 1.0, 0.0)), 0.5);
    }

    #[test]
    fn identity_profile_has_eigenvalue_minus_two() {
        for w in [-0.7, 0.0, 0.2, 0.9] {
            assert!((sphere_profile_laplacian(w, 1.0, 0.0) + 2.0 * w).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_pressure_has_zero_mean_on_sphere() {
        // ∫(y²+z²)/2 = 4π/3 on the unit sphere.
        let mean = PI * PI * (0.5 * (8.0 * PI / 3.0) - 4.0 * PI / 3.0);
        assert!(mean.abs() < 1e-12);
        assert!((ExactRotatingSolution::pressure(&Point::new(1.0, 0.0, 0.0)) + PI * PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn kh_base_flow_profile() {
        let z: f64 = 0.5;
        let x = Point::new((1.0 - z * z).sqrt(), 0.0, z);
        let speed = kh_base_velocity(&x, 0.05).norm();
        assert!((0.85..=0.87).contains(&speed), "{speed}");
        let xm = Point::new(x[0], 0.0, -z);
        assert!((kh_base_velocity(&x, 0.05) + kh_base_velocity(&xm, 0.05)).norm() < 1e-12);
        assert_eq!(kh_base_velocity(&Point::new(1.0, 0.0, 0.0), 0.05).norm(), 0.0);
    }

    #[test]
    fn kh_phase_saturates_at_poles() {
        assert!((kh_phase(&Point::new(0.0, 0.0, 1.0), 0.01) - 1.0).abs() < 1e-9);
        assert!(kh_phase(&Point::new(0.0, 0.0, -1.0), 0.01).abs() < 1e-9);
    }

    #[test]
    fn rt_offsets_are_seeded_and_bounded() {
        let a = rt_offsets(1000, 0.025, NoiseMode::Nodal, 7);
        assert_eq!(a, rt_offsets(1000, 0.025, NoiseMode::Nodal, 7));
        assert_ne!(a, rt_offsets(1000, 0.025, NoiseMode::Nodal, 8));
        assert!(a.iter().all(|v| v.abs() < 0.0025));
        let g = rt_offsets(10, 0.025, NoiseMode::Global, 7);
        assert!(g.iter().all(|v| *v == g[0]));
    }

    #[test]
    fn rate_is_log2_ratio() {
        assert!((rate(0.08, 0.02) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn default_steps_of_the_study() {
        assert_eq!(convergence_dt(4), 0.01);
        assert_eq!(convergence_dt(3), 0.02);
        assert_eq!(convergence_dt(5), 0.005);
    }
}
