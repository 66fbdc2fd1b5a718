//! Implicitly defined closed surfaces `Γ = {φ = 0}`.
//!
//! Presets carry analytic gradients; user supplied level sets are differentiated by
//! central differences with a step proportional to the size of the bounding box.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{projector, Aabb, Mat3, Point, Vec3};

/// Gradients below this norm are treated as degenerate.
pub const MIN_GRADIENT_NORM: f64 = 1e-10;

type ScalarField = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum SurfaceKind {
    Sphere { center: Point, radius: f64 },
    AsymmetricTorus { major: f64, r_min: f64, r_max: f64 },
    Custom { phi: ScalarField, fd_step: f64 },
}

impl fmt::Debug for SurfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SurfaceKind::Sphere { center, radius } => f
                .debug_struct("Sphere")
                .field("center", center)
                .field("radius", radius)
                .finish(),
            SurfaceKind::AsymmetricTorus { major, r_min, r_max } => f
                .debug_struct("AsymmetricTorus")
                .field("major", major)
                .field("r_min", r_min)
                .field("r_max", r_max)
                .finish(),
            SurfaceKind::Custom { fd_step, .. } => {
                f.debug_struct("Custom").field("fd_step", fd_step).finish()
            }
        }
    }
}

/// Level-set description of a closed surface.
#[derive(Clone, Debug)]
pub struct LevelSetSurface {
    kind: SurfaceKind,
}

/// Unit sphere centered at the origin, `φ = |x| - 1`.
pub fn make_sphere() -> LevelSetSurface {
    LevelSetSurface {
        kind: SurfaceKind::Sphere {
            center: Point::zeros(),
            radius: 1.0,
        },
    }
}

/// Torus with major radius `major` and a tube radius varying between `r_min` (at `x > 0`)
/// and `r_max` (at `x < 0`):
/// `φ = (|x|² + R² - r(x,y)²)² - 4R²(x² + y²)`, `r = r_min + (r_max - r_min)(1 - x/ρ)/2`.
pub fn make_asymmetric_torus(major: f64, r_min: f64, r_max: f64) -> Result<LevelSetSurface> {
    if !(r_min > 0.0 && r_min <= r_max && r_max < major) || !major.is_finite() {
        return Err(Error::InvalidSurface(format!(
            "need 0 < r_min <= r_max < R, got R={major}, r_min={r_min}, r_max={r_max}"
        )));
    }
    Ok(LevelSetSurface {
        kind: SurfaceKind::AsymmetricTorus {
            major,
            r_min,
            r_max,
        },
    })
}

impl LevelSetSurface {
    pub fn sphere(center: Point, radius: f64) -> Result<Self> {
        if radius <= 0.0 || !radius.is_finite() {
            return Err(Error::InvalidSurface(format!("sphere radius {radius}")));
        }
        Ok(Self {
            kind: SurfaceKind::Sphere { center, radius },
        })
    }

    /// A user level set. The gradient is approximated by central differences with step
    /// `1e-6 * diam(domain)`.
    pub fn custom<F>(phi: F, domain: &Aabb) -> Self
    where
        F: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind: SurfaceKind::Custom {
                phi: Arc::new(phi),
                fd_step: 1e-6 * domain.diameter(),
            },
        }
    }

    pub fn kind(&self) -> &SurfaceKind {
        &self.kind
    }

    pub fn phi(&self, x: &Point) -> f64 {
        match &self.kind {
            SurfaceKind::Sphere { center, radius } => (x - center).norm() - radius,
            SurfaceKind::AsymmetricTorus {
                major,
                r_min,
                r_max,
            } => {
                let rho2 = x.x * x.x + x.y * x.y;
                let rho = rho2.sqrt();
                let cos_az = if rho > 1e-14 { x.x / rho } else { 0.0 };
                let r = r_min + 0.5 * (r_max - r_min) * (1.0 - cos_az);
                let a = x.norm_squared() + major * major - r * r;
                a * a - 4.0 * major * major * rho2
            }
            SurfaceKind::Custom { phi, .. } => phi(x),
        }
    }

    pub fn gradient(&self, x: &Point) -> Vec3 {
        match &self.kind {
            SurfaceKind::Sphere { center, .. } => {
                let d = x - center;
                let r = d.norm();
                if r > 0.0 {
                    d / r
                } else {
                    Vec3::zeros()
                }
            }
            SurfaceKind::AsymmetricTorus {
                major,
                r_min,
                r_max,
            } => {
                let k = 0.5 * (r_max - r_min);
                let rho2 = x.x * x.x + x.y * x.y;
                let rho = rho2.sqrt();
                let (cos_az, dr) = if rho > 1e-14 {
                    let rho3 = rho2 * rho;
                    (
                        x.x / rho,
                        Vec3::new(-k * x.y * x.y / rho3, k * x.x * x.y / rho3, 0.0),
                    )
                } else {
                    (0.0, Vec3::zeros())
                };
                let r = r_min + k * (1.0 - cos_az);
                let a = x.norm_squared() + major * major - r * r;
                let r2 = 4.0 * major * major;
                Vec3::new(
                    2.0 * a * (2.0 * x.x - 2.0 * r * dr.x) - r2 * 2.0 * x.x,
                    2.0 * a * (2.0 * x.y - 2.0 * r * dr.y) - r2 * 2.0 * x.y,
                    2.0 * a * (2.0 * x.z),
                )
            }
            SurfaceKind::Custom { phi, fd_step } => {
                let mut g = Vec3::zeros();
                for k in 0..3 {
                    let mut xp = *x;
                    let mut xm = *x;
                    xp[k] += fd_step;
                    xm[k] -= fd_step;
                    g[k] = (phi(&xp) - phi(&xm)) / (2.0 * fd_step);
                }
                g
            }
        }
    }

    /// Level-set value and unit quasi-normal `∇φ/|∇φ|`.
    pub fn eval(&self, x: &Point) -> Result<(f64, Vec3)> {
        let g = self.gradient(x);
        let norm = g.norm();
        if !(norm >= MIN_GRADIENT_NORM) {
            return Err(Error::DegenerateGradient {
                norm,
                x: x.x,
                y: x.y,
                z: x.z,
            });
        }
        Ok((self.phi(x), g / norm))
    }

    pub fn normal(&self, x: &Point) -> Result<Vec3> {
        self.eval(x).map(|(_, n)| n)
    }

    /// Jacobian of the quasi-normal field, `∂n_i/∂x_j = (P ∇²φ)_ij / |∇φ|`, with the Hessian
    /// taken from central differences of the gradient.
    pub fn normal_jacobian(&self, x: &Point, step: f64) -> Result<Mat3> {
        let g = self.gradient(x);
        let norm = g.norm();
        if !(norm >= MIN_GRADIENT_NORM) {
            return Err(Error::DegenerateGradient {
                norm,
                x: x.x,
                y: x.y,
                z: x.z,
            });
        }
        let mut hess = Mat3::zeros();
        for j in 0..3 {
            let mut xp = *x;
            let mut xm = *x;
            xp[j] += step;
            xm[j] -= step;
            let col = (self.gradient(&xp) - self.gradient(&xm)) / (2.0 * step);
            hess.set_column(j, &col);
        }
        let hess = 0.5 * (hess + hess.transpose());
        let n = g / norm;
        Ok(projector(&n) * hess / norm)
    }

    /// Local bound for `|∇φ|` over a cube of the given center and edge length.
    pub(crate) fn local_lipschitz(&self, center: &Point, edge: f64) -> f64 {
        if let SurfaceKind::Sphere { .. } = self.kind {
            return 1.0;
        }
        let mut m = self.gradient(center).norm();
        let half = 0.5 * edge;
        for corner in 0..8 {
            let off = Vec3::new(
                if corner & 1 == 0 { -half } else { half },
                if corner & 2 == 0 { -half } else { half },
                if corner & 4 == 0 { -half } else { half },
            );
            m = m.max(self.gradient(&(center + off)).norm());
        }
        1.5 * m
    }
}
