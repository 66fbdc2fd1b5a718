//! Assembly of all bilinear forms and load vectors of the trace finite element scheme.
//!
//! For a vector basis function `φ_i e_a` with `p_a = P e_a` and `g_i = P∇φ_i`, the covariant
//! gradient of its tangential part is `∇_Γ ū = p_a g_iᵀ - φ_i n_a H`, with `H` the shape
//! operator computed from the level set at each quadrature point.

use std::sync::Arc;

use crate::cut::{
    build_bulk_quadrature, build_surface_quadrature, BulkPoint, BulkQuadrature, SurfacePoint,
    SurfaceQuadrature,
};
use crate::error::Result;
use crate::fe::{FeFunction, FeSpace, MAX_LOCAL};
use crate::geometry::{projector, Mat3, Vec3};
use crate::materials::Materials;
use crate::mesh::ActiveMesh;
use crate::sparse::CsrMatrix;

/// Stabilization and penalty parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilizationParams {
    /// Tangential penalty `τ = h⁻²`.
    pub tau: f64,
    /// Velocity normal-gradient stabilization `β_u = h⁻¹`.
    pub beta_u: f64,
    /// Pressure stabilization `β_p = h`.
    pub beta_p: f64,
    /// Chemical potential normal-gradient stabilization `τ_μ = h`.
    pub tau_mu: f64,
    /// Phase field normal-gradient stabilization `τ_c = ε/h`.
    pub tau_c: f64,
    /// Grad-div weight `γ̂ = 1`.
    pub graddiv: f64,
}

impl StabilizationParams {
    pub fn new(h: f64, epsilon: f64) -> Self {
        Self {
            tau: h.powi(-2),
            beta_u: 1.0 / h,
            beta_p: h,
            tau_mu: h,
            tau_c: epsilon / h,
            graddiv: 1.0,
        }
    }
}

/// Velocity/pressure element pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementPair {
    /// P2 velocity, P1 pressure, normal-gradient pressure stabilization.
    TaylorHood,
    /// P1 velocity, P1 pressure, full-gradient pressure stabilization.
    EqualOrder,
}

/// Basis data of one space at one quadrature point.
#[derive(Clone, Copy, Debug)]
pub struct PointBasis {
    pub len: usize,
    pub val: [f64; MAX_LOCAL],
    pub grad: [Vec3; MAX_LOCAL],
    /// Tangential gradients `P ∇φ_i`.
    pub tgrad: [Vec3; MAX_LOCAL],
}

impl PointBasis {
    pub fn new(space: &FeSpace, a: usize, bary: &[f64; 4], p: &Mat3) -> Self {
        let mut b = Self {
            len: space.n_local(),
            val: [0.0; MAX_LOCAL],
            grad: [Vec3::zeros(); MAX_LOCAL],
            tgrad: [Vec3::zeros(); MAX_LOCAL],
        };
        space.basis_bary(a, bary, &mut b.val, &mut b.grad);
        for i in 0..b.len {
            b.tgrad[i] = p * b.grad[i];
        }
        b
    }

    /// Value and full gradient of a scalar field with global coefficients.
    pub fn scalar(&self, nodes: &[usize], coeffs: &[f64]) -> (f64, Vec3) {
        let mut v = 0.0;
        let mut g = Vec3::zeros();
        for k in 0..self.len {
            let c = coeffs[nodes[k]];
            v += self.val[k] * c;
            g += self.grad[k] * c;
        }
        (v, g)
    }

    /// Value and Jacobian `∂u_a/∂x_b` of a vector field with node-major coefficients.
    pub fn vector(&self, nodes: &[usize], coeffs: &[f64]) -> (Vec3, Mat3) {
        let mut v = Vec3::zeros();
        let mut j = Mat3::zeros();
        for k in 0..self.len {
            let n = nodes[k];
            let c = Vec3::new(coeffs[3 * n], coeffs[3 * n + 1], coeffs[3 * n + 2]);
            v += c * self.val[k];
            j += c * self.grad[k].transpose();
        }
        (v, j)
    }
}

/// Global indices of the local basis of `space` on tetrahedron `a`, component-major within
/// each node (`k * dim + comp`).
fn local_dofs(space: &FeSpace, a: usize, out: &mut Vec<usize>) {
    out.clear();
    let d = space.value_dim;
    for &n in space.tet_nodes(a) {
        for c in 0..d {
            out.push(n * d + c);
        }
    }
}

/// Meshes, quadratures and spaces shared by all forms.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub active: Arc<ActiveMesh>,
    pub surf: SurfaceQuadrature,
    pub bulk: BulkQuadrature,
    pub vel: FeSpace,
    pub pres: FeSpace,
    /// Space of the phase field and the chemical potential.
    pub phase: FeSpace,
    pub pair: ElementPair,
    pub stab: StabilizationParams,
    vel_pattern: CsrMatrix,
    vp_pattern: CsrMatrix,
    pres_pattern: CsrMatrix,
    phase_pattern: CsrMatrix,
}

impl Discretization {
    pub fn new(
        active: Arc<ActiveMesh>,
        pair: ElementPair,
        sublevels: u32,
        surface_degree: u32,
        bulk_degree: u32,
        epsilon: f64,
    ) -> Result<Self> {
        let surf = build_surface_quadrature(&active, sublevels, surface_degree)?;
        let bulk = build_bulk_quadrature(&active, bulk_degree)?;
        let vel_degree = match pair {
            ElementPair::TaylorHood => 2,
            ElementPair::EqualOrder => 1,
        };
        let vel = FeSpace::new(active.clone(), vel_degree, 3)?;
        let pres = FeSpace::new(active.clone(), 1, 1)?;
        let phase = FeSpace::new(active.clone(), 1, 1)?;
        let stab = StabilizationParams::new(active.h(), epsilon);
        let pattern = |r: &FeSpace, c: &FeSpace| {
            let mut rows = Vec::new();
            let mut cols = Vec::new();
            let lists: Vec<(Vec<usize>, Vec<usize>)> = (0..active.len())
                .map(|a| {
                    local_dofs(r, a, &mut rows);
                    local_dofs(c, a, &mut cols);
                    (rows.clone(), cols.clone())
                })
                .collect();
            CsrMatrix::from_elements(
                r.n_coeffs(),
                c.n_coeffs(),
                lists.iter().map(|(r, c)| (&r[..], &c[..])),
            )
        };
        let vel_pattern = pattern(&vel, &vel);
        let vp_pattern = pattern(&pres, &vel);
        let pres_pattern = pattern(&pres, &pres);
        let phase_pattern = pattern(&phase, &phase);
        Ok(Self {
            active,
            surf,
            bulk,
            vel,
            pres,
            phase,
            pair,
            stab,
            vel_pattern,
            vp_pattern,
            pres_pattern,
            phase_pattern,
        })
    }

    pub fn h(&self) -> f64 {
        self.active.h()
    }

    fn pattern_for(&self, rows: &FeSpace, cols: &FeSpace) -> CsrMatrix {
        let same = |x: &FeSpace, y: &FeSpace| std::ptr::eq(x, y);
        if same(rows, &self.vel) && same(cols, &self.vel) {
            self.vel_pattern.same_pattern()
        } else if same(rows, &self.pres) && same(cols, &self.vel) {
            self.vp_pattern.same_pattern()
        } else if same(rows, &self.pres) && same(cols, &self.pres) {
            self.pres_pattern.same_pattern()
        } else {
            self.phase_pattern.same_pattern()
        }
    }

    /// Generic surface assembly. The kernel receives the active tetrahedron, the point, the
    /// row and column bases and the local matrix (row-major) to accumulate into.
    pub fn assemble_surface<F>(&self, rows: &FeSpace, cols: &FeSpace, mut kernel: F) -> CsrMatrix
    where
        F: FnMut(usize, &SurfacePoint, &PointBasis, &PointBasis, &mut [f64]),
    {
        let mut m = self.pattern_for(rows, cols);
        let nr = rows.n_local() * rows.value_dim;
        let nc = cols.n_local() * cols.value_dim;
        let mut local = vec![0.0; nr * nc];
        let (mut rd, mut cd) = (Vec::new(), Vec::new());
        for a in 0..self.active.len() {
            let pts = self.surf.tet_points(a);
            if pts.is_empty() {
                continue;
            }
            local.iter_mut().for_each(|v| *v = 0.0);
            for sp in pts {
                let p = projector(&sp.n);
                let br = PointBasis::new(rows, a, &sp.bary, &p);
                let bc = if std::ptr::eq(rows, cols) {
                    br
                } else {
                    PointBasis::new(cols, a, &sp.bary, &p)
                };
                kernel(a, sp, &br, &bc, &mut local);
            }
            local_dofs(rows, a, &mut rd);
            local_dofs(cols, a, &mut cd);
            m.add_local(&rd, &cd, &local);
        }
        m
    }

    /// Generic assembly over the narrow band (whole active tetrahedra).
    pub fn assemble_bulk<F>(&self, rows: &FeSpace, cols: &FeSpace, mut kernel: F) -> CsrMatrix
    where
        F: FnMut(usize, &BulkPoint, &PointBasis, &PointBasis, &mut [f64]),
    {
        let mut m = self.pattern_for(rows, cols);
        let nr = rows.n_local() * rows.value_dim;
        let nc = cols.n_local() * cols.value_dim;
        let mut local = vec![0.0; nr * nc];
        let (mut rd, mut cd) = (Vec::new(), Vec::new());
        for a in 0..self.active.len() {
            local.iter_mut().for_each(|v| *v = 0.0);
            for bp in self.bulk.tet_points(a) {
                let p = projector(&bp.n);
                let br = PointBasis::new(rows, a, &bp.bary, &p);
                let bc = if std::ptr::eq(rows, cols) {
                    br
                } else {
                    PointBasis::new(cols, a, &bp.bary, &p)
                };
                kernel(a, bp, &br, &bc, &mut local);
            }
            local_dofs(rows, a, &mut rd);
            local_dofs(cols, a, &mut cd);
            m.add_local(&rd, &cd, &local);
        }
        m
    }

    /// Generic surface load vector.
    pub fn assemble_surface_vector<F>(&self, space: &FeSpace, mut kernel: F) -> Vec<f64>
    where
        F: FnMut(usize, &SurfacePoint, &PointBasis, &mut [f64]),
    {
        let mut out = vec![0.0; space.n_coeffs()];
        let n = space.n_local() * space.value_dim;
        let mut local = vec![0.0; n];
        let mut dofs = Vec::new();
        for a in 0..self.active.len() {
            let pts = self.surf.tet_points(a);
            if pts.is_empty() {
                continue;
            }
            local.iter_mut().for_each(|v| *v = 0.0);
            for sp in pts {
                let p = projector(&sp.n);
                let b = PointBasis::new(space, a, &sp.bary, &p);
                kernel(a, sp, &b, &mut local);
            }
            local_dofs(space, a, &mut dofs);
            for (k, &d) in dofs.iter().enumerate() {
                out[d] += local[k];
            }
        }
        out
    }

    /// Integral over `Γ_h` of a pointwise quantity.
    pub fn integrate<F>(&self, mut f: F) -> f64
    where
        F: FnMut(usize, &SurfacePoint) -> f64,
    {
        let mut s = 0.0;
        for a in 0..self.active.len() {
            for sp in self.surf.tet_points(a) {
                s += sp.weight * f(a, sp);
            }
        }
        s
    }

    // ------------------------------------------------------------------ scalar forms

    /// `∫_Γ κ ∇_Γ u · ∇_Γ v ds + β ∫_band (n·∇u)(n·∇v) dx` on a scalar space.
    pub fn assemble_scalar_stiffness(&self, space: &FeSpace, kappa: f64, beta: f64) -> CsrMatrix {
        let n = space.n_local();
        let mut m = self.assemble_surface(space, space, |_, sp, b, _, loc| {
            let w = sp.weight * kappa;
            for i in 0..n {
                for j in 0..n {
                    loc[i * n + j] += w * b.tgrad[i].dot(&b.tgrad[j]);
                }
            }
        });
        if beta != 0.0 {
            let s = self.assemble_normal_gradient(space, beta);
            m.axpy(1.0, &s);
        }
        m
    }

    /// `β ∫_band (n·∇u)(n·∇v) dx` on a scalar space.
    pub fn assemble_normal_gradient(&self, space: &FeSpace, beta: f64) -> CsrMatrix {
        let n = space.n_local();
        self.assemble_bulk(space, space, |_, bp, b, _, loc| {
            let w = bp.weight * beta;
            let mut dn = [0.0; MAX_LOCAL];
            for i in 0..n {
                dn[i] = bp.n.dot(&b.grad[i]);
            }
            for i in 0..n {
                for j in 0..n {
                    loc[i * n + j] += w * dn[i] * dn[j];
                }
            }
        })
    }

    /// `a_μ(μ, v) = ∫_Γ M ∇_Γ μ · ∇_Γ v + τ_μ ∫_band (n·∇μ)(n·∇v)`.
    pub fn assemble_a_mu(&self, mobility: f64) -> CsrMatrix {
        self.assemble_scalar_stiffness(&self.phase, mobility, self.stab.tau_mu)
    }

    /// `a_c(c, g) = ε ∫_Γ ∇_Γ c · ∇_Γ g + τ_c ∫_band (n·∇c)(n·∇g)`.
    pub fn assemble_a_c(&self, epsilon: f64) -> CsrMatrix {
        self.assemble_scalar_stiffness(&self.phase, epsilon, self.stab.tau_c)
    }

    /// `∫_Γ w u v ds` with a pointwise weight.
    pub fn assemble_weighted_mass<W>(&self, space: &FeSpace, mut weight: W) -> CsrMatrix
    where
        W: FnMut(usize, &SurfacePoint) -> f64,
    {
        let d = space.value_dim;
        let n = space.n_local();
        let nd = n * d;
        self.assemble_surface(space, space, |a, sp, b, _, loc| {
            let w = sp.weight * weight(a, sp);
            if w == 0.0 {
                return;
            }
            if d == 1 {
                for i in 0..n {
                    for j in 0..n {
                        loc[i * n + j] += w * b.val[i] * b.val[j];
                    }
                }
            } else {
                // Acts on tangential parts: ū·v̄ = Σ P_ab u_a v_b.
                let p = projector(&sp.n);
                for i in 0..n {
                    for j in 0..n {
                        let f = w * b.val[i] * b.val[j];
                        for ca in 0..3 {
                            for cb in 0..3 {
                                loc[(i * 3 + ca) * nd + j * 3 + cb] += f * p[(ca, cb)];
                            }
                        }
                    }
                }
            }
        })
    }

    pub fn assemble_mass(&self, space: &FeSpace) -> CsrMatrix {
        self.assemble_weighted_mass(space, |_, _| 1.0)
    }

    /// `K_ij = ∫_Γ φ_j (u·∇_Γ φ_i) ds`, so that `(u c, ∇_Γ v)` is `K c` tested with `v`.
    pub fn assemble_advection_ch(&self, u: &FeFunction) -> CsrMatrix {
        let n = self.phase.n_local();
        let vel = &self.vel;
        self.assemble_surface(&self.phase, &self.phase, |a, sp, b, _, loc| {
            let p = projector(&sp.n);
            let bu = PointBasis::new(vel, a, &sp.bary, &p);
            let (uv, _) = bu.vector(vel.tet_nodes(a), &u.coeffs);
            for i in 0..n {
                let ug = uv.dot(&b.tgrad[i]) * sp.weight;
                for j in 0..n {
                    loc[i * n + j] += ug * b.val[j];
                }
            }
        })
    }

    /// `∫_Γ w φ_i ds` for a pointwise weight.
    pub fn assemble_scalar_load<W>(&self, space: &FeSpace, mut weight: W) -> Vec<f64>
    where
        W: FnMut(usize, &SurfacePoint) -> f64,
    {
        let n = space.n_local();
        self.assemble_surface_vector(space, |a, sp, b, loc| {
            let w = sp.weight * weight(a, sp);
            for i in 0..n {
                loc[i] += w * b.val[i];
            }
        })
    }

    // ------------------------------------------------------------------ fluid forms

    /// Viscous part `∫_Γ 2η E_s(ū):E_s(v̄)` plus tangential penalty, grad-div and the band
    /// stabilization `β_u ∫ [(n·∇)u]·[(n·∇)v]`.
    pub fn assemble_fluid_a<E>(&self, eta: E) -> CsrMatrix
    where
        E: FnMut(usize, &SurfacePoint) -> f64,
    {
        let mut m = self.assemble_fluid_a_parts(eta, 1.0, self.stab.tau, self.stab.graddiv);
        m.axpy(1.0, &self.assemble_vector_normal_gradient(self.stab.beta_u));
        m
    }

    /// Surface parts of the a-form with separate weights for strain, penalty and grad-div.
    pub fn assemble_fluid_a_parts<E>(
        &self,
        mut eta: E,
        strain_weight: f64,
        tau: f64,
        graddiv: f64,
    ) -> CsrMatrix
    where
        E: FnMut(usize, &SurfacePoint) -> f64,
    {
        let n = self.vel.n_local();
        let nd = 3 * n;
        self.assemble_surface(&self.vel, &self.vel, |a, sp, b, _, loc| {
            let w = sp.weight;
            let two_eta = 2.0 * strain_weight * eta(a, sp) * w;
            let nv = sp.n;
            let h = &sp.h;
            let p = projector(&nv);
            let h_norm2 = h.norm_squared();
            let mut hg = [Vec3::zeros(); MAX_LOCAL];
            for i in 0..n {
                hg[i] = h * b.tgrad[i];
            }
            for i in 0..n {
                let gi = b.tgrad[i];
                let fi = b.val[i];
                for j in 0..n {
                    let gj = b.tgrad[j];
                    let fj = b.val[j];
                    let gg = gi.dot(&gj);
                    for ca in 0..3 {
                        let row = (i * 3 + ca) * nd + j * 3;
                        for cb in 0..3 {
                            let ee = 0.5 * p[(ca, cb)] * gg + 0.5 * gj[ca] * gi[cb]
                                - fj * nv[cb] * hg[i][ca]
                                - fi * nv[ca] * hg[j][cb]
                                + fi * fj * nv[ca] * nv[cb] * h_norm2;
                            loc[row + cb] += two_eta * ee
                                + tau * w * fi * fj * nv[ca] * nv[cb]
                                + graddiv * w * gi[ca] * gj[cb];
                        }
                    }
                }
            }
        })
    }

    /// `β ∫_band [(n·∇)u]·[(n·∇)v] dx` on the velocity space.
    pub fn assemble_vector_normal_gradient(&self, beta: f64) -> CsrMatrix {
        let n = self.vel.n_local();
        let nd = 3 * n;
        self.assemble_bulk(&self.vel, &self.vel, |_, bp, b, _, loc| {
            let w = bp.weight * beta;
            let mut dn = [0.0; MAX_LOCAL];
            for i in 0..n {
                dn[i] = bp.n.dot(&b.grad[i]);
            }
            for i in 0..n {
                for j in 0..n {
                    let v = w * dn[i] * dn[j];
                    for c in 0..3 {
                        loc[(i * 3 + c) * nd + j * 3 + c] += v;
                    }
                }
            }
        })
    }

    /// Convective form `c(ρ; w, u, v) = ∫_Γ ρ vᵀ(∇_Γ ū)w + ½ ∫_Γ ρ̂ (div_Γ w̄) ū·v̄` with
    /// `ρ`, `ρ̂` from the smoothed law of the phase field `c`.
    pub fn assemble_c_form(&self, mats: &Materials, c: &FeFunction, w: &FeFunction) -> CsrMatrix {
        let n = self.vel.n_local();
        let nd = 3 * n;
        let phase = &self.phase;
        self.assemble_surface(&self.vel, &self.vel, |a, sp, b, _, loc| {
            let p = projector(&sp.n);
            let (wv, wj) = b.vector(self.vel.tet_nodes(a), &w.coeffs);
            if wv == Vec3::zeros() && wj == Mat3::zeros() {
                return;
            }
            let bc = PointBasis::new(phase, a, &sp.bary, &p);
            let (cv, _) = bc.scalar(phase.tet_nodes(a), &c.coeffs);
            let rho = mats.density_smooth(cv) * sp.weight;
            let rho_hat = mats.rho_hat(cv) * sp.weight;
            let div_w = (p * wj).trace() - wv.dot(&sp.n) * sp.h.trace();
            let hw = sp.h * wv;
            let half = 0.5 * rho_hat * div_w;
            for i in 0..n {
                let fi = b.val[i];
                for j in 0..n {
                    let fj = b.val[j];
                    let gw = b.tgrad[j].dot(&wv);
                    for ca in 0..3 {
                        let row = (i * 3 + ca) * nd + j * 3;
                        for cb in 0..3 {
                            loc[row + cb] += rho * fi * (p[(ca, cb)] * gw - fj * sp.n[cb] * hw[ca])
                                + half * fi * fj * p[(ca, cb)];
                        }
                    }
                }
            }
        })
    }

    /// `B_kj = b(φ_j, ψ_k) = ∫_Γ φ_j · ∇_Γ ψ_k`, rows pressure, columns velocity.
    pub fn assemble_b(&self) -> CsrMatrix {
        let np = self.pres.n_local();
        let nu = self.vel.n_local();
        let nd = 3 * nu;
        self.assemble_surface(&self.pres, &self.vel, |_, sp, bp, bu, loc| {
            for k in 0..np {
                let g = bp.tgrad[k] * sp.weight;
                for j in 0..nu {
                    let f = bu.val[j];
                    for c in 0..3 {
                        loc[k * nd + j * 3 + c] += f * g[c];
                    }
                }
            }
        })
    }

    /// Pressure stabilization: normal-gradient variant for Taylor-Hood, full gradient for
    /// equal order.
    pub fn assemble_s(&self) -> CsrMatrix {
        let beta = self.stab.beta_p;
        match self.pair {
            ElementPair::TaylorHood => self.assemble_normal_gradient(&self.pres, beta),
            ElementPair::EqualOrder => {
                let n = self.pres.n_local();
                self.assemble_bulk(&self.pres, &self.pres, |_, bp, b, _, loc| {
                    for i in 0..n {
                        for j in 0..n {
                            loc[i * n + j] += bp.weight * beta * b.grad[i].dot(&b.grad[j]);
                        }
                    }
                })
            }
        }
    }

    /// Line tension load `-(σ_γ c ∇_Γ μ, v)` and the θ-flux matrix
    /// `Θ_(ia),(jb) = s M ∫ θ φ_i [(∇_Γ(θ ū_j)) ∇_Γ μ]_a` (orientation sign `s`), where θ is the
    /// P1 interpolant of `sqrt(θ²(c))`.
    pub fn assemble_coupling(
        &self,
        sigma_gamma: f64,
        mobility: f64,
        orientation: f64,
        c: &FeFunction,
        mu: &FeFunction,
        theta: &FeFunction,
    ) -> (Vec<f64>, CsrMatrix) {
        let n = self.vel.n_local();
        let nd = 3 * n;
        let phase = &self.phase;
        let load = self.assemble_surface_vector(&self.vel, |a, sp, b, loc| {
            if sigma_gamma == 0.0 {
                return;
            }
            let p = projector(&sp.n);
            let bc = PointBasis::new(phase, a, &sp.bary, &p);
            let nodes = phase.tet_nodes(a);
            let (cv, _) = bc.scalar(nodes, &c.coeffs);
            let (_, gmu) = bc.scalar(nodes, &mu.coeffs);
            let f = -sigma_gamma * cv * sp.weight * (p * gmu);
            for i in 0..n {
                for comp in 0..3 {
                    loc[i * 3 + comp] += b.val[i] * f[comp];
                }
            }
        });
        let scale = orientation * mobility;
        let theta_zero = theta.coeffs.iter().all(|&t| t == 0.0);
        let flux = self.assemble_surface(&self.vel, &self.vel, |a, sp, b, _, loc| {
            if theta_zero || scale == 0.0 {
                return;
            }
            let p = projector(&sp.n);
            let bc = PointBasis::new(phase, a, &sp.bary, &p);
            let nodes = phase.tet_nodes(a);
            let (th, gth) = bc.scalar(nodes, &theta.coeffs);
            let (_, gmu) = bc.scalar(nodes, &mu.coeffs);
            let gmu = p * gmu;
            let gth = p * gth;
            let hg = sp.h * gmu;
            let w = scale * th * sp.weight;
            let tg = gth.dot(&gmu);
            for i in 0..n {
                let fi = b.val[i] * w;
                for j in 0..n {
                    let fj = b.val[j];
                    let gjm = b.tgrad[j].dot(&gmu);
                    for ca in 0..3 {
                        let row = (i * 3 + ca) * nd + j * 3;
                        for cb in 0..3 {
                            loc[row + cb] += fi
                                * (th * (p[(ca, cb)] * gjm - fj * sp.n[cb] * hg[ca])
                                    + fj * p[(ca, cb)] * tg);
                        }
                    }
                }
            }
        });
        (load, flux)
    }

    /// Body force load `(ρ(c) P g, v)` with the smoothed density.
    pub fn assemble_gravity(&self, mats: &Materials, c: &FeFunction, g: &Vec3) -> Vec<f64> {
        let n = self.vel.n_local();
        let phase = &self.phase;
        self.assemble_surface_vector(&self.vel, |a, sp, b, loc| {
            let p = projector(&sp.n);
            let bc = PointBasis::new(phase, a, &sp.bary, &p);
            let (cv, _) = bc.scalar(phase.tet_nodes(a), &c.coeffs);
            let f = (p * g) * (mats.density_smooth(cv) * sp.weight);
            for i in 0..n {
                for comp in 0..3 {
                    loc[i * 3 + comp] += b.val[i] * f[comp];
                }
            }
        })
    }

    /// `∫_Γ f · v` for a pointwise vector field.
    pub fn assemble_vector_load<F>(&self, mut f: F) -> Vec<f64>
    where
        F: FnMut(usize, &SurfacePoint) -> Vec3,
    {
        let n = self.vel.n_local();
        self.assemble_surface_vector(&self.vel, |a, sp, b, loc| {
            let v = f(a, sp) * sp.weight;
            for i in 0..n {
                for comp in 0..3 {
                    loc[i * 3 + comp] += b.val[i] * v[comp];
                }
            }
        })
    }

    // ------------------------------------------------------------------ pointwise evaluation

    /// Value and gradient of a phase-space function at a surface point.
    pub fn eval_phase(&self, a: usize, sp: &SurfacePoint, f: &FeFunction) -> (f64, Vec3) {
        self.phase.eval_scalar(a, &sp.bary, &f.coeffs)
    }

    pub fn eval_pressure(&self, a: usize, sp: &SurfacePoint, f: &FeFunction) -> (f64, Vec3) {
        self.pres.eval_scalar(a, &sp.bary, &f.coeffs)
    }

    pub fn eval_velocity(&self, a: usize, sp: &SurfacePoint, u: &FeFunction) -> (Vec3, Mat3) {
        self.vel.eval_vector(a, &sp.bary, &u.coeffs)
    }

    /// Covariant gradient `∇_Γ ū = P(∇u)P - (u·n)H` of a velocity at a surface point.
    pub fn covariant_gradient(&self, a: usize, sp: &SurfacePoint, u: &FeFunction) -> (Vec3, Mat3) {
        let (v, j) = self.eval_velocity(a, sp, u);
        let p = projector(&sp.n);
        (v, p * j * p - sp.h * v.dot(&sp.n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_active;
    use crate::surface::make_sphere;

    fn disc(level: u32) -> Discretization {
        let a = Arc::new(build_active(&make_sphere(), level).unwrap());
        Discretization::new(a, ElementPair::TaylorHood, 1, 4, 2, 0.05).unwrap()
    }

    #[test]
    fn stabilization_values() {
        let s = StabilizationParams::new(0.1, 0.05);
        assert!((s.tau - 100.0).abs() < 1e-12);
        assert!((s.beta_u - 10.0).abs() < 1e-12);
        assert_eq!(s.beta_p, 0.1);
        assert_eq!(s.tau_mu, 0.1);
        assert!((s.tau_c - 0.5).abs() < 1e-15);
        assert_eq!(s.graddiv, 1.0);
    }

    #[test]
    fn scalar_forms_have_constant_kernel() {
        let d = disc(2);
        let one = vec![1.0; d.phase.n_coeffs()];
        for m in [d.assemble_a_mu(0.05), d.assemble_a_c(0.05), d.assemble_s()] {
            let r = m.matvec(&one);
            let rmax = r.iter().fold(0.0f64, |x, v| x.max(v.abs()));
            assert!(rmax <= 1e-10 * m.norm_max());
            assert!(m.asymmetry() <= 1e-12 * m.norm_max());
        }
    }

    #[test]
    fn mass_total_is_area() {
        let d = disc(2);
        let m = d.assemble_mass(&d.phase);
        let one = vec![1.0; d.phase.n_coeffs()];
        assert!((m.bilinear(&one, &one) - d.surf.area()).abs() < 1e-12 * d.surf.area());
    }

    #[test]
    fn pressure_constant_not_seen_by_b() {
        let d = disc(2);
        let b = d.assemble_b();
        let one = vec![1.0; d.pres.n_coeffs()];
        let bt1 = b.transpose().matvec(&one);
        assert!(bt1.iter().all(|v| v.abs() < 1e-12));
    }
}
