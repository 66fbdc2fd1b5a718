//! Decoupled linear time stepping: a Cahn-Hilliard solve for `(c, μ)` followed by a
//! linearized Navier-Stokes solve for `(u, p)`.
//!
//! Phase fields are stored in the user's orientation. When the user's phase 1 is the light
//! one, both solves run on `c̃ = 1 - c`, `μ̃ = -μ` with the relabeled material laws so that the
//! density is nondecreasing in the internal variable.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe::FeFunction;
use crate::forms::Discretization;
use crate::geometry::{Point, Vec3};
use crate::materials::{MaterialParams, Materials};
use crate::solver::{
    gmres, solve_direct, solve_with_factor, symbolic_lu, CholeskyFactor, LuFactor, SaddlePreconditioner,
    SolveReport, SolverOptions,
};
use crate::sparse::CsrMatrix;

/// Saddle systems up to this size fall back to a bordered direct solve when the Krylov
/// solve does not converge.
const DIRECT_FALLBACK_LIMIT: usize = 80_000;
/// Rebuild the stale block preconditioner once a solve needs more iterations than this.
const PRECOND_REFRESH_ITERATIONS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeParams {
    pub dt: f64,
    /// Weight of the Cahn-Hilliard stabilization; `None` selects the Lipschitz constant `L`.
    pub gamma_c: Option<f64>,
    pub bdf_order_ch: u32,
    pub sigma_gamma: f64,
    pub mobility: f64,
    pub epsilon: f64,
    pub gravity: [f64; 3],
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self {
            dt: 0.01,
            gamma_c: None,
            bdf_order_ch: 1,
            sigma_gamma: 0.0,
            mobility: 0.05,
            epsilon: 0.05,
            gravity: [0.0; 3],
        }
    }
}

impl SchemeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.mobility >= 0.0) || !(self.sigma_gamma >= 0.0) {
            return Err(Error::Config("mobility and sigma_gamma must be nonnegative".into()));
        }
        if let Some(g) = self.gamma_c {
            if !(g >= 0.0) {
                return Err(Error::Config(format!("gamma_c must be nonnegative, got {g}")));
            }
        }
        if !matches!(self.bdf_order_ch, 1 | 2) {
            return Err(Error::Config(format!(
                "bdf_order_ch must be 1 or 2, got {}",
                self.bdf_order_ch
            )));
        }
        Ok(())
    }
}

/// Fields at one time level, phase variables in the user's orientation.
#[derive(Clone, Debug)]
pub struct State {
    pub t: f64,
    pub n: usize,
    pub u: FeFunction,
    pub p: FeFunction,
    pub c: FeFunction,
    pub mu: FeFunction,
    pub c_prev: Option<FeFunction>,
}

/// Manufactured source for the phase field equation, `f(t, x)`.
pub type PhaseForcing = Arc<dyn Fn(f64, &Point) -> f64 + Send + Sync>;

/// Solver statistics and the dissipation terms of one step.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct StepInfo {
    pub ch: SolveReport,
    pub ns: SolveReport,
    /// `a(η^{n+1}; u^{n+1}, u^{n+1})`.
    pub a_uu: f64,
    /// `a_μ(μ^{n+1}, μ^{n+1})`.
    pub a_mumu: f64,
    /// `s(p^{n+1}, p^{n+1})`.
    pub s_pp: f64,
}

struct SaddleCache {
    a_hat: CholeskyFactor,
    schur_mass: CholeskyFactor,
    schur_lap: CholeskyFactor,
}

/// Time stepper owning the discretization, caches of coefficient-independent matrices and
/// the solver state reused between steps.
pub struct Stepper {
    pub disc: Arc<Discretization>,
    /// Material laws in the user's orientation.
    pub mats: Materials,
    /// Relabeled laws used inside the solves.
    internal: Materials,
    pub params: SchemeParams,
    pub solver: SolverOptions,
    forcing: Option<PhaseForcing>,
    mass_phase: CsrMatrix,
    a_mu: CsrMatrix,
    a_c: CsrMatrix,
    mass_vel: CsrMatrix,
    mass_pres: CsrMatrix,
    lap_pres: CsrMatrix,
    b: CsrMatrix,
    bt: CsrMatrix,
    s: CsrMatrix,
    mean_weights: Vec<f64>,
    area: f64,
    fluid_a_uniform: Option<CsrMatrix>,
    ch_symbolic: Option<faer::sparse::linalg::solvers::SymbolicLu<usize>>,
    saddle: Option<SaddleCache>,
    last_ns_iterations: usize,
    warned: bool,
}

impl Stepper {
    pub fn new(
        disc: Arc<Discretization>,
        material_params: MaterialParams,
        params: SchemeParams,
        solver: SolverOptions,
        forcing: Option<PhaseForcing>,
    ) -> Result<Self> {
        params.validate()?;
        let mats = Materials::new(material_params)?;
        let mut swapped = material_params;
        if mats.orientation < 0.0 {
            swapped.rho1 = material_params.rho2;
            swapped.rho2 = material_params.rho1;
            swapped.eta1 = material_params.eta2;
            swapped.eta2 = material_params.eta1;
        }
        let internal = Materials::new(swapped)?;
        let d = &disc;
        let mass_phase = d.assemble_mass(&d.phase);
        let a_mu = d.assemble_a_mu(params.mobility);
        let a_c = d.assemble_a_c(params.epsilon);
        let mass_vel = d.assemble_mass(&d.vel);
        let mass_pres = d.assemble_mass(&d.pres);
        let lap_pres = d.assemble_scalar_stiffness(&d.pres, 1.0, 1.0 / d.h());
        let b = d.assemble_b();
        let bt = b.transpose();
        let s = d.assemble_s();
        let mean_weights = d.assemble_scalar_load(&d.pres, |_, _| 1.0);
        let area = d.surf.area();
        let fluid_a_uniform = if material_params.eta1 == material_params.eta2 {
            let eta = material_params.eta1;
            Some(d.assemble_fluid_a(|_, _| eta))
        } else {
            None
        };
        Ok(Self {
            disc,
            mats,
            internal,
            params,
            solver,
            forcing,
            mass_phase,
            a_mu,
            a_c,
            mass_vel,
            mass_pres,
            lap_pres,
            b,
            bt,
            s,
            mean_weights,
            area,
            fluid_a_uniform,
            ch_symbolic: None,
            saddle: None,
            last_ns_iterations: 0,
            warned: false,
        })
    }

    pub fn gamma_c(&self) -> f64 {
        self.params.gamma_c.unwrap_or_else(|| self.mats.lipschitz())
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn mean_weights(&self) -> &[f64] {
        &self.mean_weights
    }

    pub fn a_c_matrix(&self) -> &CsrMatrix {
        &self.a_c
    }

    pub fn a_mu_matrix(&self) -> &CsrMatrix {
        &self.a_mu
    }

    pub fn s_matrix(&self) -> &CsrMatrix {
        &self.s
    }

    pub fn phase_mass(&self) -> &CsrMatrix {
        &self.mass_phase
    }

    fn to_internal(&self, c: &FeFunction) -> FeFunction {
        if self.mats.orientation > 0.0 {
            c.clone()
        } else {
            FeFunction::from_coeffs(1, c.coeffs.iter().map(|v| 1.0 - v).collect())
        }
    }

    fn sign(&self, f: &FeFunction) -> FeFunction {
        if self.mats.orientation > 0.0 {
            f.clone()
        } else {
            FeFunction::from_coeffs(1, f.coeffs.iter().map(|v| -v).collect())
        }
    }

    /// Chemical potential consistent with `c`: `(μ, g) = (f0'(c)/ε, g) + a_c(c, g)`, solved with
    /// the band-stabilized mass matrix.
    pub fn initial_mu(&self, c: &FeFunction) -> Result<FeFunction> {
        let ci = self.to_internal(c);
        let eps = self.params.epsilon;
        let mut rhs = self.f0_load(&ci);
        for v in rhs.iter_mut() {
            *v /= eps;
        }
        let ac = self.a_c.matvec(&ci.coeffs);
        for (r, a) in rhs.iter_mut().zip(&ac) {
            *r += a;
        }
        let mut m = self.mass_phase.clone();
        m.axpy(1.0, &self.disc.assemble_normal_gradient(&self.disc.phase, self.disc.stab.tau_mu));
        let (mu, rep) = solve_direct(&m, &rhs, &self.solver)?;
        if !rep.converged {
            return Err(Error::Solver(format!("initial chemical potential: {rep:?}")));
        }
        Ok(self.sign(&FeFunction::from_coeffs(1, mu)))
    }

    /// `(f0'(c_h), v)` integrated by quadrature.
    fn f0_load(&self, c: &FeFunction) -> Vec<f64> {
        let d = &self.disc;
        let mats = &self.internal;
        d.assemble_scalar_load(&d.phase, |a, sp| {
            let (v, _) = d.eval_phase(a, sp, c);
            mats.f0_prime(v)
        })
    }

    fn check_finite(field: &'static str, v: &[f64], step: usize) -> Result<()> {
        if v.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite {
                field,
                step,
            })
        }
    }

    /// Step 1: solves for `(c^{n+1}, μ^{n+1})` given `u^n`, `c^n` and, for BDF2, `c^{n-1}`.
    pub fn ch_step(
        &mut self,
        u_n: &FeFunction,
        c_n: &FeFunction,
        c_prev: Option<&FeFunction>,
        t_new: f64,
    ) -> Result<(FeFunction, FeFunction, SolveReport)> {
        let d = self.disc.clone();
        let n = d.phase.n_coeffs();
        let dt = self.params.dt;
        let eps = self.params.epsilon;
        let gamma = self.gamma_c();
        let cn = self.to_internal(c_n);
        let cp = c_prev.map(|c| self.to_internal(c));
        let bdf2 = self.params.bdf_order_ch == 2 && cp.is_some();
        // Time derivative [c]_t = (a0 c^{n+1} - hist) / dt.
        let (a0, hist, c_explicit) = if bdf2 {
            let cp = cp.as_ref().unwrap();
            let hist: Vec<f64> = cn.coeffs.iter().zip(&cp.coeffs).map(|(a, b)| 0.5 * (4.0 * a - b)).collect();
            let ex: Vec<f64> = cn.coeffs.iter().zip(&cp.coeffs).map(|(a, b)| 2.0 * a - b).collect();
            (1.5, hist, FeFunction::from_coeffs(1, ex))
        } else {
            (1.0, cn.coeffs.clone(), cn.clone())
        };
        let k = d.assemble_advection_ch(u_n);
        let mut a11 = self.mass_phase.clone();
        a11.scale(a0 / dt);
        a11.axpy(-1.0, &k);
        let mut a21 = self.mass_phase.clone();
        a21.scale(-gamma * a0 / eps);
        a21.axpy(-1.0, &self.a_c);
        let sys = CsrMatrix::block(
            &[vec![Some(&a11), Some(&self.a_mu)], vec![Some(&a21), Some(&self.mass_phase)]],
            &[n, n],
            &[n, n],
        );
        let mh = self.mass_phase.matvec(&hist);
        let mut rhs = vec![0.0; 2 * n];
        for i in 0..n {
            rhs[i] = mh[i] / dt;
            rhs[n + i] = -gamma / eps * mh[i];
        }
        let f0 = self.f0_load(&c_explicit);
        for i in 0..n {
            rhs[n + i] += f0[i] / eps;
        }
        if let Some(f) = &self.forcing {
            let orientation = self.mats.orientation;
            let mut load = d.assemble_scalar_load(&d.phase, |_, sp| orientation * f(t_new, &sp.x));
            // Remove the discrete mean so that the source does not change the phase mass.
            let total: f64 = load.iter().sum();
            let ones = vec![1.0; n];
            let mean_basis = self.mass_phase.matvec(&ones);
            for (l, m) in load.iter_mut().zip(&mean_basis) {
                *l -= total / self.area * m;
            }
            for i in 0..n {
                rhs[i] += load[i];
            }
        }
        if self.ch_symbolic.is_none() {
            self.ch_symbolic = Some(symbolic_lu(&sys)?);
        }
        let lu = LuFactor::with_symbolic(&sys, self.ch_symbolic.as_ref())?;
        let (x, rep) = solve_with_factor(&sys, &rhs, &lu, &self.solver);
        if !rep.converged {
            return Err(Error::Solver(format!("phase field step: {rep:?}")));
        }
        let c_new = FeFunction::from_coeffs(1, x[..n].to_vec());
        let mu_new = FeFunction::from_coeffs(1, x[n..].to_vec());
        let c_new = if self.mats.orientation > 0.0 {
            c_new
        } else {
            self.to_internal(&c_new)
        };
        Ok((c_new, self.sign(&mu_new), rep))
    }

    /// Step 2: solves the linearized momentum/continuity system for `(u^{n+1}, p^{n+1})`.
    pub fn ns_step(
        &mut self,
        u_n: &FeFunction,
        p_n: &FeFunction,
        c_n: &FeFunction,
        c_new: &FeFunction,
        mu_new: &FeFunction,
    ) -> Result<(FeFunction, FeFunction, StepInfo)> {
        let d = self.disc.clone();
        let dt = self.params.dt;
        let mats = self.internal;
        let cn = self.to_internal(c_n);
        let c1 = self.to_internal(c_new);
        let mu1 = self.sign(mu_new);
        let nu = d.vel.n_coeffs();
        let np = d.pres.n_coeffs();
        let uniform_rho = mats.params.rho1 == mats.params.rho2;

        let mass_rho = if uniform_rho {
            let mut m = self.mass_vel.clone();
            m.scale(mats.params.rho1);
            m
        } else {
            d.assemble_weighted_mass(&d.vel, |a, sp| mats.density_smooth(d.eval_phase(a, sp, &cn).0))
        };
        let a_eta = match &self.fluid_a_uniform {
            Some(a) => a.clone(),
            None => d.assemble_fluid_a(|a, sp| mats.viscosity_cutoff(d.eval_phase(a, sp, &c1).0)),
        };
        let conv = d.assemble_c_form(&mats, &c1, u_n);
        let theta = FeFunction::from_coeffs(
            1,
            c1.coeffs.iter().map(|&c| mats.theta_sq(c).sqrt()).collect(),
        );
        let (tension, flux) = if uniform_rho {
            let load = if self.params.sigma_gamma != 0.0 {
                d.assemble_coupling(self.params.sigma_gamma, 0.0, 1.0, &c1, &mu1, &theta).0
            } else {
                vec![0.0; nu]
            };
            (load, None)
        } else {
            let (l, f) = d.assemble_coupling(
                self.params.sigma_gamma,
                self.params.mobility,
                mats.orientation,
                &c1,
                &mu1,
                &theta,
            );
            (l, Some(f))
        };

        let mut a = mass_rho.clone();
        a.scale(1.0 / dt);
        a.axpy(1.0, &a_eta);
        a.axpy(1.0, &conv);
        if let Some(f) = &flux {
            a.axpy(-1.0, f);
        }
        let mut neg_s = self.s.clone();
        neg_s.scale(-1.0);
        let k = CsrMatrix::block(
            &[vec![Some(&a), Some(&self.bt)], vec![Some(&self.b), Some(&neg_s)]],
            &[nu, np],
            &[nu, np],
        );
        let mut rhs = mass_rho.matvec(&u_n.coeffs);
        for (r, t) in rhs.iter_mut().zip(&tension) {
            *r = *r / dt + t;
        }
        let g = Vec3::from(self.params.gravity);
        if g != Vec3::zeros() {
            let gl = d.assemble_gravity(&mats, &c1, &g);
            for (r, v) in rhs.iter_mut().zip(&gl) {
                *r += v;
            }
        }
        rhs.resize(nu + np, 0.0);

        let refresh = self.saddle.is_none()
            || (!(uniform_rho && self.fluid_a_uniform.is_some())
                && self.last_ns_iterations > PRECOND_REFRESH_ITERATIONS);
        if refresh {
            self.saddle = Some(self.build_saddle_preconditioner(&mass_rho, &a_eta, &c1)?);
        }
        let cache = self.saddle.as_ref().unwrap();
        let pc = SaddlePreconditioner {
            a_hat: &cache.a_hat,
            bt: &self.bt,
            schur_mass: &cache.schur_mass,
            schur_lap: Some(&cache.schur_lap),
            nu,
        };
        let mut x0 = u_n.coeffs.clone();
        x0.extend_from_slice(&p_n.coeffs);
        let (mut x, mut rep) = gmres(&k, &rhs, Some(&x0), &pc, &self.solver);
        self.last_ns_iterations = rep.iterations;
        if !rep.converged && !refresh {
            log::info!("rebuilding saddle preconditioner after {} iterations", rep.iterations);
            self.saddle = Some(self.build_saddle_preconditioner(&mass_rho, &a_eta, &c1)?);
            let cache = self.saddle.as_ref().unwrap();
            let pc = SaddlePreconditioner {
                a_hat: &cache.a_hat,
                bt: &self.bt,
                schur_mass: &cache.schur_mass,
                schur_lap: Some(&cache.schur_lap),
                nu,
            };
            (x, rep) = gmres(&k, &rhs, Some(&x0), &pc, &self.solver);
            self.last_ns_iterations = rep.iterations;
        }
        if !rep.converged && nu + np <= DIRECT_FALLBACK_LIMIT {
            log::warn!("Krylov solve did not converge ({rep:?}); using bordered direct solve");
            (x, rep) = self.bordered_direct(&k, &rhs, nu, np)?;
        }
        if !rep.converged {
            return Err(Error::Solver(format!("fluid step: {rep:?}")));
        }
        let u = FeFunction::from_coeffs(3, x[..nu].to_vec());
        let p = crate::solver::fix_pressure_mean(&x[nu..], &self.mean_weights, self.area);
        let info = StepInfo {
            ns: rep,
            a_uu: a_eta.bilinear(&u.coeffs, &u.coeffs),
            s_pp: self.s.bilinear(&p, &p),
            ..Default::default()
        };
        Ok((u, FeFunction::from_coeffs(1, p), info))
    }

    fn build_saddle_preconditioner(
        &self,
        mass_rho: &CsrMatrix,
        a_eta: &CsrMatrix,
        c1: &FeFunction,
    ) -> Result<SaddleCache> {
        let d = &self.disc;
        let dt = self.params.dt;
        let mats = self.internal;
        let mut a_hat = mass_rho.clone();
        a_hat.scale(1.0 / dt);
        a_hat.axpy(1.0, a_eta);
        let graddiv = d.stab.graddiv;
        let eta_max = mats.params.eta1.max(mats.params.eta2);
        let rho_min = mats.params.rho1.min(mats.params.rho2);
        // Viscous part of the Schur complement: pressure mass weighted by 1/(2η + γ̂).
        let mut sm = if mats.params.eta1 == mats.params.eta2 {
            let mut m = self.mass_pres.clone();
            m.scale(1.0 / (2.0 * eta_max + graddiv));
            m
        } else {
            d.assemble_weighted_mass(&d.pres, |a, sp| {
                1.0 / (2.0 * mats.viscosity_cutoff(d.eval_phase(a, sp, c1).0) + graddiv)
            })
        };
        sm.axpy(1.0 / (2.0 * eta_max + graddiv), &self.s);
        // Inertial part: pressure Laplacian scaled by Δt/ρ, regularized by the mass.
        let mut sl = self.lap_pres.clone();
        sl.axpy(1.0, &self.mass_pres);
        sl.scale(dt / rho_min);
        let a_hat_f = match &self.saddle {
            Some(c) => CholeskyFactor::new(&a_hat, Some(c.a_hat.symbolic()))?,
            None => CholeskyFactor::new(&a_hat, None)?,
        };
        Ok(SaddleCache {
            a_hat: a_hat_f,
            schur_mass: CholeskyFactor::new(&sm, None)?,
            schur_lap: CholeskyFactor::new(&sl, None)?,
        })
    }

    /// Direct solve of the saddle system bordered by the pressure mean constraint.
    fn bordered_direct(
        &self,
        k: &CsrMatrix,
        rhs: &[f64],
        nu: usize,
        np: usize,
    ) -> Result<(Vec<f64>, SolveReport)> {
        let row: Vec<(usize, usize, f64)> = self
            .mean_weights
            .iter()
            .enumerate()
            .map(|(j, &w)| (0, nu + j, w))
            .collect();
        let row = CsrMatrix::from_triplets(1, nu + np, &row);
        let col = row.transpose();
        let kb = CsrMatrix::block(
            &[vec![Some(k), Some(&col)], vec![Some(&row), None]],
            &[nu + np, 1],
            &[nu + np, 1],
        );
        let mut b = rhs.to_vec();
        b.push(0.0);
        let (mut x, rep) = solve_direct(&kb, &b, &self.solver)?;
        x.truncate(nu + np);
        Ok((x, rep))
    }

    /// Checks the step-size conditions of the stability analysis with unit constants and logs
    /// a warning once when they are violated.
    pub fn monitor_conditions(&mut self) {
        if self.warned {
            return;
        }
        let h = self.disc.h();
        let dt = self.params.dt;
        let eps = self.params.epsilon;
        let lnh = h.ln().abs().max(f64::MIN_POSITIVE);
        let dt_ok = dt <= eps / lnh;
        let h_ok = h <= (dt.min(eps * dt.sqrt() / lnh.sqrt())) / lnh;
        if !(dt_ok && h_ok) {
            log::warn!(
                "step-size conditions of the stability analysis not met (dt ≤ ε/|ln h|: {dt_ok}, h bound: {h_ok}); continuing"
            );
        }
        self.warned = true;
    }

    /// One full step: phase field, then flow.
    pub fn advance(&mut self, state: &State) -> Result<(State, StepInfo)> {
        self.monitor_conditions();
        let step = state.n + 1;
        let t_new = state.t + self.params.dt;
        let (c, mu, ch) = self.ch_step(&state.u, &state.c, state.c_prev.as_ref(), t_new)?;
        Self::check_finite("c", &c.coeffs, step)?;
        Self::check_finite("mu", &mu.coeffs, step)?;
        let (u, p, mut info) = self.ns_step(&state.u, &state.p, &state.c, &c, &mu)?;
        Self::check_finite("u", &u.coeffs, step)?;
        Self::check_finite("p", &p.coeffs, step)?;
        info.ch = ch;
        let mui = self.sign(&mu);
        info.a_mumu = self.a_mu.bilinear(&mui.coeffs, &mui.coeffs);
        let next = State {
            t: t_new,
            n: step,
            u,
            p,
            c_prev: Some(state.c.clone()),
            c,
            mu,
        };
        Ok((next, info))
    }
}
