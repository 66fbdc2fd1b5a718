//! Constitutive laws: clipped and smoothed density, clipped viscosity, the double-well
//! potential and its truncated derivative.
//!
//! All functions take the phase field `c` in the user's orientation. When the user's
//! `rho1 < rho2` the laws are evaluated on `1 - c` with both material pairs swapped, so that
//! the internal density is nondecreasing in its argument.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    pub rho1: f64,
    pub rho2: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub alpha_smooth: f64,
    pub alpha_trunc: f64,
    /// Use the truncated derivative of the double well (otherwise the plain cubic).
    pub truncate: bool,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            rho1: 1.0,
            rho2: 1.0,
            eta1: 1.0,
            eta2: 1.0,
            alpha_smooth: 0.1,
            alpha_trunc: 2.0,
            truncate: true,
        }
    }
}

/// Validated material laws with the phase relabeling applied.
#[derive(Clone, Copy, Debug)]
pub struct Materials {
    pub params: MaterialParams,
    /// `+1` if the user's phase 1 is the heavy one, `-1` otherwise.
    pub orientation: f64,
    heavy_rho: f64,
    light_rho: f64,
    heavy_eta: f64,
    light_eta: f64,
    /// Branch points `(1 ∓ α)/2` of the truncated potential.
    c_lo: f64,
    c_hi: f64,
}

/// `ln cosh x` without overflow.
fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Untruncated cubic `f0'(c) = c (c - 1)(c - 1/2)`.
pub fn f0_prime_cubic(c: f64) -> f64 {
    c * (c - 1.0) * (c - 0.5)
}

/// `f0(c) = c²(1 - c)²/4`.
pub fn f0(c: f64) -> f64 {
    0.25 * c * c * (1.0 - c) * (1.0 - c)
}

fn f0_second(c: f64) -> f64 {
    3.0 * c * c - 3.0 * c + 0.5
}

impl Materials {
    pub fn new(params: MaterialParams) -> Result<Self> {
        let p = params;
        for (name, v) in [
            ("rho1", p.rho1),
            ("rho2", p.rho2),
            ("eta1", p.eta1),
            ("eta2", p.eta2),
            ("alpha_smooth", p.alpha_smooth),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(p.alpha_trunc > 1.0 && p.alpha_trunc.is_finite()) {
            return Err(Error::Config(format!(
                "alpha_trunc must exceed 1, got {}",
                p.alpha_trunc
            )));
        }
        let swap = p.rho1 < p.rho2;
        let (heavy_rho, light_rho, heavy_eta, light_eta) = if swap {
            (p.rho2, p.rho1, p.eta2, p.eta1)
        } else {
            (p.rho1, p.rho2, p.eta1, p.eta2)
        };
        Ok(Self {
            params: p,
            orientation: if swap { -1.0 } else { 1.0 },
            heavy_rho,
            light_rho,
            heavy_eta,
            light_eta,
            c_lo: 0.5 * (1.0 - p.alpha_trunc),
            c_hi: 0.5 * (1.0 + p.alpha_trunc),
        })
    }

    /// Phase variable in the internal orientation.
    #[inline]
    pub fn canonical(&self, c: f64) -> f64 {
        if self.orientation > 0.0 {
            c
        } else {
            1.0 - c
        }
    }

    /// Fraction of the heavy phase carried by `c`, clamped to `[0, 1]`.
    pub fn heavy_fraction(&self, c: f64) -> f64 {
        self.canonical(c).clamp(0.0, 1.0)
    }

    pub fn density_cutoff(&self, c: f64) -> f64 {
        let t = self.canonical(c);
        if t <= 0.0 {
            self.light_rho
        } else {
            t * self.heavy_rho + (1.0 - t) * self.light_rho
        }
    }

    pub fn viscosity_cutoff(&self, c: f64) -> f64 {
        let t = self.canonical(c);
        if t <= 0.0 {
            self.light_eta
        } else {
            t * self.heavy_eta + (1.0 - t) * self.light_eta
        }
    }

    /// `θ² = (ρ1 - ρ2)/2 (tanh(c/α) + 1)` in the internal orientation; always `≥ 0`.
    pub fn theta_sq(&self, c: f64) -> f64 {
        let t = self.canonical(c);
        let d = self.heavy_rho - self.light_rho;
        0.5 * d * ((t / self.params.alpha_smooth).tanh() + 1.0)
    }

    /// `ρ(c) = ρ2 + ∫₀^c θ²`, smooth, convex and monotone in the internal orientation.
    pub fn density_smooth(&self, c: f64) -> f64 {
        let t = self.canonical(c);
        let a = self.params.alpha_smooth;
        let d = self.heavy_rho - self.light_rho;
        0.5 * d * (a * ln_cosh(t / a) + t) + self.light_rho
    }

    /// `dρ/dc` in the user's orientation: `orientation · θ²`.
    pub fn density_slope(&self, c: f64) -> f64 {
        self.orientation * self.theta_sq(c)
    }

    /// `ρ̂ = ρ - (dρ/dc) c`.
    pub fn rho_hat(&self, c: f64) -> f64 {
        self.density_smooth(c) - self.density_slope(c) * c
    }

    /// Lipschitz constant `L = (3α² - 1)/4` of the truncated potential derivative.
    pub fn lipschitz(&self) -> f64 {
        let a = self.params.alpha_trunc;
        0.25 * (3.0 * a * a - 1.0)
    }

    /// Derivative of the double well used by the scheme: cubic in `[(1-α)/2, (1+α)/2]`,
    /// continued linearly (C¹) outside, or the plain cubic if truncation is disabled.
    pub fn f0_prime(&self, c: f64) -> f64 {
        if !self.params.truncate {
            return f0_prime_cubic(c);
        }
        self.f0_prime_trunc(c)
    }

    pub fn f0_prime_trunc(&self, c: f64) -> f64 {
        let l = self.lipschitz();
        if c > self.c_hi {
            f0_prime_cubic(self.c_hi) + l * (c - self.c_hi)
        } else if c < self.c_lo {
            f0_prime_cubic(self.c_lo) + l * (c - self.c_lo)
        } else {
            f0_prime_cubic(c)
        }
    }

    /// Antiderivative of [`Self::f0_prime_trunc`] agreeing with `f0` in the middle branch.
    pub fn f0_trunc(&self, c: f64) -> f64 {
        if !self.params.truncate {
            return f0(c);
        }
        let l = self.lipschitz();
        let quad = |c0: f64| {
            let d = c - c0;
            f0(c0) + f0_prime_cubic(c0) * d + 0.5 * l * d * d
        };
        if c > self.c_hi {
            quad(self.c_hi)
        } else if c < self.c_lo {
            quad(self.c_lo)
        } else {
            f0(c)
        }
    }

    /// Slope of the truncated derivative (for Newton-free checks and tests).
    pub fn f0_second_trunc(&self, c: f64) -> f64 {
        if c > self.c_hi || c < self.c_lo {
            self.lipschitz()
        } else {
            f0_second(c)
        }
    }

    pub fn branch_points(&self) -> (f64, f64) {
        (self.c_lo, self.c_hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mats(rho1: f64, rho2: f64) -> Materials {
        Materials::new(MaterialParams {
            rho1,
            rho2,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn cutoff_examples() {
        let m = mats(3.0, 1.0);
        assert_eq!(m.density_cutoff(-0.2), 1.0);
        assert_eq!(m.density_cutoff(0.5), 2.0);
        assert!((m.density_cutoff(1.2) - 3.4).abs() < 1e-15);
    }

    #[test]
    fn smooth_examples() {
        let m = mats(3.0, 1.0);
        assert_eq!(m.theta_sq(0.0), 1.0);
        // (2/2)(tanh(5) + 1)
        assert!((m.theta_sq(0.5) - 1.999_909_204_262_595).abs() < 1e-12);
        assert_eq!(m.density_smooth(0.0), 1.0);
    }

    #[test]
    fn potential_examples() {
        let m = mats(1.0, 1.0);
        assert_eq!(f0(0.5), 1.0 / 64.0);
        assert_eq!(m.f0_prime_trunc(0.5), 0.0);
        assert_eq!(m.lipschitz(), 2.75);
        // Upper linear branch as written in closed form for α = 2.
        let a: f64 = 2.0;
        for c in [1.6, 2.0, 5.0] {
            let lin = (3.0 * a * a - 1.0) / 4.0 * c - (a.powi(3) / 4.0 + 3.0 / 8.0 * a * a - 1.0 / 8.0);
            assert!((m.f0_prime_trunc(c) - lin).abs() < 1e-12);
        }
    }

    #[test]
    fn relabeling_keeps_user_orientation() {
        let heavy_second = mats(1.0, 3.0);
        assert_eq!(heavy_second.orientation, -1.0);
        assert_eq!(heavy_second.density_cutoff(0.0), 3.0);
        assert_eq!(heavy_second.density_cutoff(1.0), 1.0);
        assert_eq!(heavy_second.density_smooth(1.0), 1.0);
        assert!(heavy_second.density_slope(0.5) < 0.0);
        let heavy_first = mats(3.0, 1.0);
        for c in [-0.3, 0.1, 0.5, 0.9, 1.4] {
            assert!(
                (heavy_second.density_smooth(c) - heavy_first.density_smooth(1.0 - c)).abs()
                    < 1e-15
            );
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(Materials::new(MaterialParams {
            rho1: 0.0,
            ..Default::default()
        })
        .is_err());
        assert!(Materials::new(MaterialParams {
            alpha_trunc: 1.0,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn ln_cosh_is_stable() {
        assert!((ln_cosh(0.0)).abs() < 1e-16);
        assert!((ln_cosh(1.0) - 1f64.cosh().ln()).abs() < 1e-15);
        assert!((ln_cosh(800.0) - (800.0 - std::f64::consts::LN_2)).abs() < 1e-12);
    }
}
