//! Energies, dissipation, the discrete stability functional, mass, tangentiality and the
//! scalar surface vorticity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fe::FeFunction;
use crate::geometry::{projector, Mat3, Vec3};
use crate::materials::f0;
use crate::solver::{solve_direct, SolverOptions};
use crate::stepper::{State, StepInfo, Stepper};

/// One line of the diagnostics table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    pub step: usize,
    pub time: f64,
    /// `∫ ½ρ|ū|²`.
    pub kinetic: f64,
    /// `σ_γ ∫ (f0(c)/ε + ε/2 |∇_Γ c|²)` with the untruncated well.
    pub gl_energy: f64,
    pub total: f64,
    /// `∫ 2η |E_s(ū)|²`.
    pub visc_diss: f64,
    /// `σ_γ ∫ M |∇_Γ μ|²`.
    pub chem_diss: f64,
    pub mass: f64,
    /// `‖n·u‖_{L²(Γ_h)}`.
    pub tangential: f64,
    pub theorem_lhs: f64,
    #[serde(rename = "theorem_K")]
    pub theorem_k: f64,
}

impl DiagnosticsRow {
    pub const HEADER: [&'static str; 11] = [
        "step",
        "time",
        "kinetic",
        "gl_energy",
        "total",
        "visc_diss",
        "chem_diss",
        "mass",
        "tangential",
        "theorem_lhs",
        "theorem_K",
    ];

    pub fn values(&self) -> [f64; 11] {
        [
            self.step as f64,
            self.time,
            self.kinetic,
            self.gl_energy,
            self.total,
            self.visc_diss,
            self.chem_diss,
            self.mass,
            self.tangential,
            self.theorem_lhs,
            self.theorem_k,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

/// Running state of the stability functional
/// `∫ρ|ū|² + (2σ_γ/ε)∫F0(c) + σ_γ a_c(c,c) + 2 Σ Δt (a(u,u) + σ_γ a_μ(μ,μ) + s(p,p))`,
/// with `F0` the antiderivative of the truncated well derivative; `K` is its value at step 0.
#[derive(Clone, Copy, Debug, Default)]
pub struct StabilityMonitor {
    pub k: Option<f64>,
    pub dissipation_sum: f64,
}

impl StabilityMonitor {
    pub fn record_step(&mut self, dt: f64, sigma_gamma: f64, info: &StepInfo) {
        self.dissipation_sum += 2.0 * dt * (info.a_uu + sigma_gamma * info.a_mumu + info.s_pp);
    }
}

/// `∫ ρ(c)|ū|²` etc. evaluated once per row.
pub fn compute_row(stepper: &Stepper, state: &State, monitor: &mut StabilityMonitor) -> Result<DiagnosticsRow> {
    let d = &stepper.disc;
    let mats = &stepper.mats;
    let eps = stepper.params.epsilon;
    let sigma = stepper.params.sigma_gamma;
    let mobility = stepper.params.mobility;
    let mut kinetic2 = 0.0;
    let mut well = 0.0;
    let mut well_trunc = 0.0;
    let mut grad_c = 0.0;
    let mut visc = 0.0;
    let mut chem = 0.0;
    let mut mass = 0.0;
    let mut normal = 0.0;
    for a in 0..d.active.len() {
        for sp in d.surf.tet_points(a) {
            let w = sp.weight;
            let p = projector(&sp.n);
            let (c, gc) = d.eval_phase(a, sp, &state.c);
            let (_, gmu) = d.eval_phase(a, sp, &state.mu);
            let (u, gu) = d.covariant_gradient(a, sp, &state.u);
            let ubar = p * u;
            let e = 0.5 * (gu + gu.transpose());
            kinetic2 += w * mats.density_smooth(c) * ubar.norm_squared();
            well += w * f0(c);
            well_trunc += w * mats.f0_trunc(c);
            grad_c += w * (p * gc).norm_squared();
            visc += w * 2.0 * mats.viscosity_cutoff(c) * e.norm_squared();
            chem += w * mobility * (p * gmu).norm_squared();
            mass += w * c;
            normal += w * u.dot(&sp.n).powi(2);
        }
    }
    let kinetic = 0.5 * kinetic2;
    let gl_energy = sigma * (well / eps + 0.5 * eps * grad_c);
    let a_c = stepper.a_c_matrix().bilinear(&state.c.coeffs, &state.c.coeffs);
    let energy = kinetic2 + 2.0 * sigma / eps * well_trunc + sigma * a_c;
    let k = *monitor.k.get_or_insert(energy);
    let row = DiagnosticsRow {
        step: state.n,
        time: state.t,
        kinetic,
        gl_energy,
        total: kinetic + gl_energy,
        visc_diss: visc,
        chem_diss: sigma * chem,
        mass,
        tangential: normal.sqrt(),
        theorem_lhs: energy + monitor.dissipation_sum,
        theorem_k: k,
    };
    if !row.is_finite() {
        return Err(Error::NonFinite {
            field: "diagnostics",
            step: state.n,
        });
    }
    Ok(row)
}

/// `∫ c ds`.
pub fn phase_mass(stepper: &Stepper, c: &FeFunction) -> f64 {
    let d = &stepper.disc;
    d.integrate(|a, sp| d.eval_phase(a, sp, c).0)
}

/// Surface curl `ω = div_Γ(n × u)` projected into the P1 space:
/// `(ω_h, g) + h ∫_band (n·∇ω_h)(n·∇g) = (ω, g)`.
pub fn vorticity(stepper: &Stepper, u: &FeFunction, opts: &SolverOptions) -> Result<FeFunction> {
    let d = &stepper.disc;
    let rhs = d.assemble_scalar_load(&d.phase, |a, sp| surface_curl(stepper, a, sp, u));
    if rhs.iter().all(|v| *v == 0.0) {
        return Ok(d.phase.zero());
    }
    let mut m = stepper.phase_mass().clone();
    m.axpy(1.0, &d.assemble_normal_gradient(&d.phase, d.h()));
    let (x, rep) = solve_direct(&m, &rhs, opts)?;
    if !rep.converged {
        return Err(Error::Solver(format!("vorticity projection: {rep:?}")));
    }
    Ok(FeFunction::from_coeffs(1, x))
}

/// `div_Γ(n × u)` at a surface quadrature point, with `∇n` taken from the shape operator.
pub fn surface_curl(stepper: &Stepper, a: usize, sp: &crate::cut::SurfacePoint, u: &FeFunction) -> f64 {
    let d = &stepper.disc;
    let (uv, ju) = d.eval_velocity(a, sp, u);
    let n = sp.n;
    let p = projector(&n);
    // ∂_l v_i with v = n × u: ε_ijk (∂_l n_j u_k + n_j ∂_l u_k).
    let cross_cols = |m: &Mat3, left: &Vec3| -> Mat3 {
        let mut out = Mat3::zeros();
        for l in 0..3 {
            let col = m.column(l).into_owned();
            let c = left.cross(&col);
            out.set_column(l, &c);
        }
        out
    };
    let dn = sp.h;
    let mut grad_v = cross_cols(&ju, &n);
    for l in 0..3 {
        let dnl = dn.column(l).into_owned();
        let c = dnl.cross(&uv);
        for i in 0..3 {
            grad_v[(i, l)] += c[i];
        }
    }
    (grad_v * p).trace()
}

/// Height of the heavy phase: `∫ z w(c) / ∫ w(c)`, `w` the clamped heavy-phase fraction.
pub fn heavy_phase_height(stepper: &Stepper, c: &FeFunction) -> Result<f64> {
    let d = &stepper.disc;
    let mats = &stepper.mats;
    let mut num = 0.0;
    let mut den = 0.0;
    for a in 0..d.active.len() {
        for sp in d.surf.tet_points(a) {
            let w = mats.heavy_fraction(d.eval_phase(a, sp, c).0) * sp.weight;
            num += w * sp.x[2];
            den += w;
        }
    }
    if den < 1e-12 * stepper.area() {
        return Err(Error::DegenerateWeight(den));
    }
    Ok(num / den)
}
