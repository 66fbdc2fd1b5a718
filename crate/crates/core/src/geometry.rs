//! Small fixed-size geometry helpers shared by the mesh, cut-cell and assembly code.

use nalgebra::{Matrix3, Vector3};

pub type Point = Vector3<f64>;
pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    /// The cube `[-a, a]^3`.
    pub fn cube(half_width: f64) -> Self {
        Self::new(Point::repeat(-half_width), Point::repeat(half_width))
    }

    /// Default computational box `[-5/3, 5/3]^3`.
    pub fn default_domain() -> Self {
        Self::cube(5.0 / 3.0)
    }

    pub fn diameter(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn contains(&self, x: &Point) -> bool {
        (0..3).all(|k| x[k] >= self.min[k] && x[k] <= self.max[k])
    }
}

/// Tangential projector `I - n n^T`.
#[inline]
pub fn projector(n: &Vec3) -> Mat3 {
    Mat3::identity() - n * n.transpose()
}

/// Signed volume of the tetrahedron `(a, b, c, d)`.
#[inline]
pub fn tet_signed_volume(a: &Point, b: &Point, c: &Point, d: &Point) -> f64 {
    (b - a).dot(&(c - a).cross(&(d - a))) / 6.0
}

#[inline]
pub fn triangle_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Ratio of circumradius to inradius of a tetrahedron (3 for the regular one).
pub fn tet_radius_ratio(v: &[Point; 4]) -> f64 {
    let vol = tet_signed_volume(&v[0], &v[1], &v[2], &v[3]).abs();
    let faces = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];
    let surface: f64 = faces
        .iter()
        .map(|f| triangle_area(&v[f[0]], &v[f[1]], &v[f[2]]))
        .sum();
    let inradius = 3.0 * vol / surface;
    // Circumcenter solves 2 (v_i - v_0) . c = |v_i|^2 - |v_0|^2.
    let a = Mat3::from_rows(&[
        (v[1] - v[0]).transpose(),
        (v[2] - v[0]).transpose(),
        (v[3] - v[0]).transpose(),
    ]);
    let rhs = Vec3::new(
        0.5 * (v[1] - v[0]).norm_squared(),
        0.5 * (v[2] - v[0]).norm_squared(),
        0.5 * (v[3] - v[0]).norm_squared(),
    );
    let offset = a.lu().solve(&rhs).unwrap_or_else(Vec3::zeros);
    offset.norm() / inradius
}
