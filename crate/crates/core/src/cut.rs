//! Piecewise planar approximation `Γ_h` of the surface inside each active tetrahedron, and the
//! surface and bulk quadrature rules built on it.

use crate::error::{Error, Result};
use crate::geometry::{projector, triangle_area, Mat3, Point, Vec3};
use crate::mesh::ActiveMesh;
use crate::quadrature::{tet_rule, triangle_rule};

pub type Triangle = [Point; 3];

/// Children of the regular 8-way split, as indices into `[v0..v3, m01, m02, m03, m12, m13, m23]`.
const CHILDREN: [[usize; 4]; 8] = [
    [0, 4, 5, 6],
    [4, 1, 7, 8],
    [5, 7, 2, 9],
    [6, 8, 9, 3],
    // Octahedron split along the m02-m13 diagonal.
    [5, 8, 4, 6],
    [5, 8, 6, 9],
    [5, 8, 9, 7],
    [5, 8, 7, 4],
];
const EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Zero crossing of the linear interpolant of φ along the edge `a-b`.
#[inline]
fn crossing(xa: &Point, fa: f64, xb: &Point, fb: f64) -> Point {
    let t = fa / (fa - fb);
    xa + (xb - xa) * t
}

/// Marching-tetrahedra polygon of one tetrahedron with linear φ, appended as triangles.
pub fn marching_tet(x: &[Point; 4], f: &[f64; 4], out: &mut Vec<Triangle>) {
    let neg: Vec<usize> = (0..4).filter(|&i| f[i] < 0.0).collect();
    let pos: Vec<usize> = (0..4).filter(|&i| f[i] >= 0.0).collect();
    match (neg.len(), pos.len()) {
        (1, 3) | (3, 1) => {
            let (a, others) = if neg.len() == 1 {
                (neg[0], pos)
            } else {
                (pos[0], neg)
            };
            out.push([
                crossing(&x[a], f[a], &x[others[0]], f[others[0]]),
                crossing(&x[a], f[a], &x[others[1]], f[others[1]]),
                crossing(&x[a], f[a], &x[others[2]], f[others[2]]),
            ]);
        }
        (2, 2) => {
            let (a, b, c, d) = (neg[0], neg[1], pos[0], pos[1]);
            let p0 = crossing(&x[a], f[a], &x[c], f[c]);
            let p1 = crossing(&x[a], f[a], &x[d], f[d]);
            let p2 = crossing(&x[b], f[b], &x[d], f[d]);
            let p3 = crossing(&x[b], f[b], &x[c], f[c]);
            out.push([p0, p1, p2]);
            out.push([p0, p2, p3]);
        }
        _ => {}
    }
}

/// Triangulates `Γ` inside a tetrahedron. With `sublevels = s` the tetrahedron is split 8-way
/// `s` times with φ evaluated exactly at the new vertices; sub-tetrahedra that provably miss the
/// surface (`min |φ| > lip · diam`) are discarded early.
pub fn triangulate_cut(
    verts: &[Point; 4],
    phi: &[f64; 4],
    sublevels: u32,
    level_set: &dyn Fn(&Point) -> f64,
    lip: f64,
    out: &mut Vec<Triangle>,
) {
    let nudge = 1e-12 * diameter(verts);
    let mut stack = vec![(*verts, *phi, 0u32)];
    while let Some((x, f, depth)) = stack.pop() {
        if depth == sublevels {
            marching_tet(&x, &f, out);
            continue;
        }
        let has_neg = f.iter().any(|&v| v < 0.0);
        let has_pos = f.iter().any(|&v| v >= 0.0);
        if !(has_neg && has_pos) {
            let min_abs = f.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            if min_abs > lip * diameter(&x) {
                continue;
            }
        }
        let mut p = [Point::zeros(); 10];
        let mut g = [0.0; 10];
        p[..4].copy_from_slice(&x);
        g[..4].copy_from_slice(&f);
        for (e, &(i, j)) in EDGES.iter().enumerate() {
            p[4 + e] = (x[i] + x[j]) * 0.5;
            let v = level_set(&p[4 + e]);
            g[4 + e] = if v == 0.0 { nudge } else { v };
        }
        for child in CHILDREN.iter().rev() {
            stack.push((
                [p[child[0]], p[child[1]], p[child[2]], p[child[3]]],
                [g[child[0]], g[child[1]], g[child[2]], g[child[3]]],
                depth + 1,
            ));
        }
    }
}

fn diameter(x: &[Point; 4]) -> f64 {
    EDGES
        .iter()
        .map(|&(i, j)| (x[i] - x[j]).norm())
        .fold(0.0, f64::max)
}

/// A surface quadrature node with the geometric data the forms need.
#[derive(Clone, Copy, Debug)]
pub struct SurfacePoint {
    pub x: Point,
    pub weight: f64,
    /// `∇φ/|∇φ|` at `x`.
    pub n: Vec3,
    /// Shape operator `H = ∇n P` at `x` (symmetric, `H n = 0`).
    pub h: Mat3,
    /// Barycentric coordinates with respect to the owning tetrahedron.
    pub bary: [f64; 4],
}

#[derive(Clone, Debug)]
pub struct SurfaceQuadrature {
    pub sublevels: u32,
    pub degree: u32,
    /// `points[offsets[a]..offsets[a + 1]]` belong to active tetrahedron `a`.
    pub offsets: Vec<usize>,
    pub points: Vec<SurfacePoint>,
    /// `triangles[tri_offsets[a]..tri_offsets[a + 1]]` form `Γ_h ∩ T_a`.
    pub tri_offsets: Vec<usize>,
    pub triangles: Vec<Triangle>,
}

impl SurfaceQuadrature {
    pub fn tet_points(&self, a: usize) -> &[SurfacePoint] {
        &self.points[self.offsets[a]..self.offsets[a + 1]]
    }

    /// `|Γ_h|`, the sum of all weights.
    pub fn area(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum()
    }

    pub fn integrate(&self, f: impl Fn(&SurfacePoint) -> f64) -> f64 {
        self.points.iter().map(|p| p.weight * f(p)).sum()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BulkPoint {
    pub x: Point,
    pub weight: f64,
    pub n: Vec3,
    pub bary: [f64; 4],
}

#[derive(Clone, Debug)]
pub struct BulkQuadrature {
    pub degree: u32,
    pub offsets: Vec<usize>,
    pub points: Vec<BulkPoint>,
}

impl BulkQuadrature {
    pub fn tet_points(&self, a: usize) -> &[BulkPoint] {
        &self.points[self.offsets[a]..self.offsets[a + 1]]
    }

    pub fn volume(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum()
    }
}

fn tet_lipschitz(active: &ActiveMesh, a: usize) -> f64 {
    let g = &active.geoms[a];
    let c = (g.verts[0] + g.verts[1] + g.verts[2] + g.verts[3]) * 0.25;
    active.surface.local_lipschitz(&c, g.diameter())
}

/// Triangles of `Γ_h` in active tetrahedron `a`, with slivers below `1e-14 h²` removed.
pub fn cut_triangles(active: &ActiveMesh, a: usize, sublevels: u32) -> Vec<Triangle> {
    let g = &active.geoms[a];
    let surface = &active.surface;
    let mut tris = Vec::new();
    triangulate_cut(
        &g.verts,
        &active.tet_phi(a),
        sublevels,
        &|x| surface.phi(x),
        tet_lipschitz(active, a),
        &mut tris,
    );
    let min_area = 1e-14 * active.h() * active.h();
    tris.retain(|t| triangle_area(&t[0], &t[1], &t[2]) >= min_area);
    tris
}

/// `|Γ_h|` without storing any quadrature data.
pub fn surface_area(active: &ActiveMesh, sublevels: u32) -> f64 {
    (0..active.len())
        .map(|a| {
            cut_triangles(active, a, sublevels)
                .iter()
                .map(|t| triangle_area(&t[0], &t[1], &t[2]))
                .sum::<f64>()
        })
        .sum()
}

pub fn build_surface_quadrature(
    active: &ActiveMesh,
    sublevels: u32,
    degree: u32,
) -> Result<SurfaceQuadrature> {
    let rule = triangle_rule(degree)?;
    let fd_step = 1e-6 * active.h();
    let mut offsets = vec![0];
    let mut points = Vec::new();
    let mut tri_offsets = vec![0];
    let mut triangles = Vec::new();
    for a in 0..active.len() {
        let geom = &active.geoms[a];
        let tris = cut_triangles(active, a, sublevels);
        for t in &tris {
            let area = triangle_area(&t[0], &t[1], &t[2]);
            for (b, w) in rule.points.iter().zip(&rule.weights) {
                let x = t[0] * b[0] + t[1] * b[1] + t[2] * b[2];
                let (_, n) = active.surface.eval(&x)?;
                let dn = active.surface.normal_jacobian(&x, fd_step)?;
                let h = dn * projector(&n);
                let h = 0.5 * (h + h.transpose());
                points.push(SurfacePoint {
                    x,
                    weight: area * w,
                    n,
                    h,
                    bary: geom.barycentric(&x),
                });
            }
        }
        triangles.extend(tris);
        offsets.push(points.len());
        tri_offsets.push(triangles.len());
    }
    Ok(SurfaceQuadrature {
        sublevels,
        degree,
        offsets,
        points,
        tri_offsets,
        triangles,
    })
}

pub fn build_bulk_quadrature(active: &ActiveMesh, degree: u32) -> Result<BulkQuadrature> {
    let rule = tet_rule(degree)?;
    let mut offsets = vec![0];
    let mut points = Vec::with_capacity(active.len() * rule.points.len());
    for g in &active.geoms {
        for (b, w) in rule.points.iter().zip(&rule.weights) {
            let x = g.point(b);
            let n = active.surface.normal(&x)?;
            points.push(BulkPoint {
                x,
                weight: g.volume * w,
                n,
                bary: *b,
            });
        }
        offsets.push(points.len());
    }
    Ok(BulkQuadrature {
        degree,
        offsets,
        points,
    })
}

/// Checks that every quadrature point lies in its owning tetrahedron.
pub fn check_containment(q: &SurfaceQuadrature, tol: f64) -> Result<()> {
    for (a, w) in q.offsets.windows(2).enumerate() {
        for p in &q.points[w[0]..w[1]] {
            let m = p.bary.iter().fold(f64::INFINITY, |m, &v| m.min(v));
            let mx = p.bary.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            if m < -tol || mx > 1.0 + tol {
                return Err(Error::PointOutsideTet { tet: a, min_bary: m });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_active;
    use crate::surface::make_sphere;
    use std::f64::consts::PI;

    fn unit_tet() -> [Point; 4] {
        [
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
            Point::new(0.0, 0.0, 1.0),
        ]
    }

    fn total_area(t: &[Triangle]) -> f64 {
        t.iter().map(|t| triangle_area(&t[0], &t[1], &t[2])).sum()
    }

    #[test]
    fn one_vs_three_gives_midpoint_triangle() {
        let x = unit_tet();
        // φ = x + y + z - 1/2 vanishes at the midpoints of the edges from the origin.
        let f = |p: &Point| p.x + p.y + p.z - 0.5;
        let phi = [f(&x[0]), f(&x[1]), f(&x[2]), f(&x[3])];
        let mut out = Vec::new();
        triangulate_cut(&x, &phi, 0, &f, 1.0, &mut out);
        assert_eq!(out.len(), 1);
        let mids = [
            Point::new(0.5, 0.0, 0.0),
            Point::new(0.0, 0.5, 0.0),
            Point::new(0.0, 0.0, 0.5),
        ];
        for m in &mids {
            assert!(out[0].iter().any(|p| (p - m).norm() < 1e-15));
        }
    }

    #[test]
    fn two_vs_two_quad_area() {
        let x = unit_tet();
        // Plane x + y = 1/2 separates {v0, v3} from {v1, v2}. The section is a rectangle
        // with sides |(1/2,-1/2,0)| and the height 1/2 along z, so area = sqrt(2)/4.
        let f = |p: &Point| p.x + p.y - 0.5;
        let phi = [f(&x[0]), f(&x[1]), f(&x[2]), f(&x[3])];
        let mut out = Vec::new();
        triangulate_cut(&x, &phi, 0, &f, 2.0, &mut out);
        assert_eq!(out.len(), 2);
        assert!((total_area(&out) - 2f64.sqrt() / 4.0).abs() < 1e-15);
        let mut refined = Vec::new();
        triangulate_cut(&x, &phi, 2, &f, 2.0, &mut refined);
        assert!((total_area(&refined) - 2f64.sqrt() / 4.0).abs() < 1e-13);
    }

    #[test]
    fn sphere_area_level4() {
        let a = build_active(&make_sphere(), 4).unwrap();
        let area = surface_area(&a, 2);
        assert!((area - 4.0 * PI).abs() / (4.0 * PI) < 0.01);
    }

    #[test]
    fn sphere_quadrature_level3() {
        let a = build_active(&make_sphere(), 3).unwrap();
        let q = build_surface_quadrature(&a, 1, 4).unwrap();
        let area = q.area();
        assert!((area - 4.0 * PI).abs() / (4.0 * PI) < 0.03);
        assert!((q.integrate(|p| p.x.z)).abs() < 1e-3 * area);
        let r2 = q.integrate(|p| p.x.norm_squared());
        assert!((r2 - area).abs() < 0.01 * area);
        check_containment(&q, 1e-12).unwrap();
        assert!(q.points.iter().all(|p| p.weight > 0.0));
    }

    #[test]
    fn bulk_weights_sum_to_band_volume() {
        let a = build_active(&make_sphere(), 2).unwrap();
        for deg in [2, 4] {
            let b = build_bulk_quadrature(&a, deg).unwrap();
            assert!((b.volume() - a.band_volume()).abs() < 1e-12 * a.band_volume());
        }
    }

    #[test]
    fn unit_tet_moments() {
        let g = crate::mesh::TetGeom::new(unit_tet());
        let r = tet_rule(2).unwrap();
        let vol: f64 = r.weights.iter().map(|w| w * g.volume).sum();
        let mx: f64 = r
            .points
            .iter()
            .zip(&r.weights)
            .map(|(b, w)| w * g.volume * g.point(b).x)
            .sum();
        assert!((vol - 1.0 / 6.0).abs() < 1e-15);
        assert!((mx - 1.0 / 24.0).abs() < 1e-15);
    }
}
