//! Oracles for the manufactured phase source of the rotating-interface solution.
//!
//! Route 1 applies a tangent-plane five-point stencil to the closed-form `μ*`.
//! Route 2 propagates truncated Taylor series in `w` and applies `Δ_Γ` in divergence form,
//! `d/dw[(1 - w²) G'(w)]`.

use std::f64::consts::PI;

use surface_nsch::geometry::{Point, Vec3};
use surface_nsch::scenarios::ExactRotatingSolution;

fn tangent_basis(p: &Vec3) -> (Vec3, Vec3) {
    let a = if p[0].abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = (a - p * p.dot(&a)).normalize();
    (e1, p.cross(&e1))
}

/// For a function constant along rays, `Δ_Γ F(p)` on the unit sphere equals the planar
/// Laplacian in the tangent plane at `p`.
fn fd_laplacian(f: impl Fn(&Point) -> f64, p: &Vec3, h: f64) -> f64 {
    let (e1, e2) = tangent_basis(p);
    let f0 = f(p);
    (f(&(p + e1 * h)) + f(&(p - e1 * h)) + f(&(p + e2 * h)) + f(&(p - e2 * h)) - 4.0 * f0) / (h * h)
}

#[test]
fn forcing_at_pole_matches_five_point_stencil() {
    let s = ExactRotatingSolution::new(0.05, 0.05);
    let pole = Vec3::new(0.0, 0.0, 1.0);
    let closed = s.forcing(0.0, &pole);
    let fd = -0.05 * fd_laplacian(|x| s.chemical_potential(0.0, x), &pole, 1e-4);
    let rel = (closed - fd).abs() / closed.abs();
    assert!(rel < 1e-5, "closed {closed:e} fd {fd:e} rel {rel:e}");
}

#[test]
fn closed_form_laplacians_match_stencil_across_the_interface() {
    let s = ExactRotatingSolution::new(0.05, 0.05);
    for (t, p) in [
        (0.0, Vec3::new(0.3, 0.2, 0.05)),
        (0.3, Vec3::new(-0.5, 0.4, 0.6)),
        (0.7, Vec3::new(0.1, -0.8, 0.3)),
        (1.0, Vec3::new(0.9, 0.1, -0.1)),
    ] {
        let p = p.normalize();
        let scale = s.forcing(t, &p).abs().max(1e-3);
        let fd = -0.05 * fd_laplacian(|x| s.chemical_potential(t, x), &p, 1e-4);
        assert!((s.forcing(t, &p) - fd).abs() < 1e-4 * scale, "t={t} p={p:?}");
    }
}

#[test]
fn degree_one_harmonic_has_eigenvalue_minus_two() {
    let p = Vec3::new(0.2, -0.4, 0.7).normalize();
    let lap = fd_laplacian(|x| x[2] / x.norm(), &p, 1e-4);
    assert!((lap + 2.0 * p[2]).abs() < 1e-6);
}

const N: usize = 7;

/// Truncated Taylor series `Σ a_k s^k` around a base point.
#[derive(Clone, Copy, Debug)]
struct Jet([f64; N]);

impl Jet {
    fn var(w: f64) -> Self {
        let mut a = [0.0; N];
        a[0] = w;
        a[1] = 1.0;
        Jet(a)
    }
    fn constant(c: f64) -> Self {
        let mut a = [0.0; N];
        a[0] = c;
        Jet(a)
    }
    fn add(&self, o: &Jet) -> Jet {
        let mut a = self.0;
        for k in 0..N {
            a[k] += o.0[k];
        }
        Jet(a)
    }
    fn scale(&self, c: f64) -> Jet {
        Jet(self.0.map(|v| v * c))
    }
    fn mul(&self, o: &Jet) -> Jet {
        let mut a = [0.0; N];
        for i in 0..N {
            for j in 0..N - i {
                a[i + j] += self.0[i] * o.0[j];
            }
        }
        Jet(a)
    }
    /// `d/ds`, losing the top coefficient.
    fn deriv(&self) -> Jet {
        let mut a = [0.0; N];
        for k in 1..N {
            a[k - 1] = k as f64 * self.0[k];
        }
        Jet(a)
    }
    /// `y = tanh(u)` from `y' = (1 - y²) u'`.
    fn tanh(&self) -> Jet {
        let u = &self.0;
        let mut y = [0.0; N];
        let mut q = [0.0; N]; // 1 - y²
        y[0] = u[0].tanh();
        q[0] = 1.0 - y[0] * y[0];
        for k in 1..N {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * u[j] * q[k - j];
            }
            y[k] = acc / k as f64;
            let mut sq = 0.0;
            for i in 0..=k {
                sq += y[i] * y[k - i];
            }
            q[k] = -sq;
        }
        Jet(y)
    }
}

/// `Δ_Γ G` for a profile jet, in divergence form.
fn profile_laplacian(g: &Jet, w: &Jet) -> Jet {
    let one_minus_w2 = Jet::constant(1.0).add(&w.mul(w).scale(-1.0));
    one_minus_w2.mul(&g.deriv()).deriv()
}

fn forcing_by_jets(eps: f64, mobility: f64, w0: f64) -> f64 {
    let w = Jet::var(w0);
    let delta = 2.0 * 2f64.sqrt() * eps;
    let g = Jet::constant(1.0).add(&w.scale(1.0 / delta).tanh()).scale(0.5);
    // f0'(c) = c(c - 1)(c - 1/2)
    let cubic = g.mul(&g.add(&Jet::constant(-1.0))).mul(&g.add(&Jet::constant(-0.5)));
    let mu = cubic.scale(1.0 / eps).add(&profile_laplacian(&g, &w).scale(-eps));
    profile_laplacian(&mu, &w).scale(-mobility).0[0]
}

#[test]
fn forcing_matches_taylor_jets() {
    for (eps, m) in [(0.05, 0.05), (0.025, 0.0025), (0.1, 1.0)] {
        let s = ExactRotatingSolution::new(eps, m);
        for t in [0.0, 0.25, 0.6] {
            for x in [
                Vec3::new(0.0, 0.0, 1.0),
                Vec3::new(0.1, 0.3, 0.2),
                Vec3::new(-0.7, 0.1, -0.3),
                Vec3::new(0.2, -0.05, 0.01),
            ] {
                let x = x.normalize();
                let w0 = ExactRotatingSolution::axis(t).dot(&x);
                let jet = forcing_by_jets(eps, m, w0);
                let closed = s.forcing(t, &x);
                let scale = jet.abs().max(1e-12);
                assert!((closed - jet).abs() <= 1e-10 * scale.max(1.0), "eps={eps} t={t} w={w0}: {closed} vs {jet}");
            }
        }
    }
}

#[test]
fn transport_cancels_along_the_rotation() {
    // d/dt w(t, X(t)) = 0 for the flow of u*.
    let x0 = Vec3::new(0.3, -0.5, 0.7).normalize();
    let flow = |t: f64| {
        let (c, s) = ((PI * t).cos(), (PI * t).sin());
        Vec3::new(x0[0], c * x0[1] - s * x0[2], s * x0[1] + c * x0[2])
    };
    let w = |t: f64| ExactRotatingSolution::axis(t).dot(&flow(t));
    for t in [0.0, 0.3, 0.9] {
        let h = 1e-5;
        assert!(((w(t + h) - w(t - h)) / (2.0 * h)).abs() < 1e-9);
        let v = (flow(t + h) - flow(t - h)) / (2.0 * h);
        assert!((v - ExactRotatingSolution::velocity(&flow(t))).norm() < 1e-8);
    }
}

#[test]
fn frozen_values() {
    let s = ExactRotatingSolution::new(0.05, 0.05);
    let pole = Vec3::new(0.0, 0.0, 1.0);
    assert_eq!(s.phase(0.0, &Vec3::new(0.0, 1.0, 0.0)), 0.5);
    let f = s.forcing(0.0, &pole);
    assert!((f - FROZEN_POLE_FORCING).abs() < 1e-12 * f.abs(), "{f:e}");
}

const FROZEN_POLE_FORCING: f64 = 7.418035839487324e-6;
