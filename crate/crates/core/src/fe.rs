//! Continuous Lagrange spaces of degree 1 and 2 on the active tetrahedra.
//!
//! Nodes are numbered vertices first (ascending background vertex index), then edge
//! midpoints ordered by their `(min, max)` vertex pair. Vector-valued functions store
//! `value_dim` consecutive components per node.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Point, Vec3};
use crate::mesh::{ActiveMesh, TetGeom};

/// Local edges of a tetrahedron, matching the ordering of the P2 edge basis functions.
pub const TET_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
pub const MAX_LOCAL: usize = 10;

#[derive(Clone, Debug)]
pub struct FeSpace {
    pub active: Arc<ActiveMesh>,
    pub degree: u32,
    pub value_dim: usize,
    n_nodes: usize,
    tet_nodes: Vec<[usize; MAX_LOCAL]>,
    node_points: Vec<Point>,
}

impl FeSpace {
    pub fn new(active: Arc<ActiveMesh>, degree: u32, value_dim: usize) -> Result<Self> {
        if !(degree == 1 || degree == 2) {
            return Err(Error::Unsupported {
                what: "polynomial degree",
                value: degree.to_string(),
            });
        }
        if !(value_dim == 1 || value_dim == 3) {
            return Err(Error::Unsupported {
                what: "value dimension",
                value: value_dim.to_string(),
            });
        }
        let mut vertex_ids: BTreeMap<usize, usize> = BTreeMap::new();
        let mut edge_ids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for a in 0..active.len() {
            let v = active.tet_vertices(a);
            for &vi in v {
                vertex_ids.insert(vi, 0);
            }
            if degree == 2 {
                for &(i, j) in &TET_EDGES {
                    edge_ids.insert((v[i].min(v[j]), v[i].max(v[j])), 0);
                }
            }
        }
        let mut node_points = Vec::with_capacity(vertex_ids.len() + edge_ids.len());
        for (k, (vi, id)) in vertex_ids.iter_mut().enumerate() {
            *id = k;
            node_points.push(active.mesh.vertices[*vi]);
        }
        let nv = vertex_ids.len();
        for (k, ((p, q), id)) in edge_ids.iter_mut().enumerate() {
            *id = nv + k;
            node_points.push((active.mesh.vertices[*p] + active.mesh.vertices[*q]) * 0.5);
        }
        let mut tet_nodes = Vec::with_capacity(active.len());
        for a in 0..active.len() {
            let v = active.tet_vertices(a);
            let mut nodes = [usize::MAX; MAX_LOCAL];
            for i in 0..4 {
                nodes[i] = vertex_ids[&v[i]];
            }
            if degree == 2 {
                for (e, &(i, j)) in TET_EDGES.iter().enumerate() {
                    nodes[4 + e] = edge_ids[&(v[i].min(v[j]), v[i].max(v[j]))];
                }
            }
            tet_nodes.push(nodes);
        }
        Ok(Self {
            active,
            degree,
            value_dim,
            n_nodes: node_points.len(),
            tet_nodes,
            node_points,
        })
    }

    /// Number of scalar Lagrange nodes.
    pub fn n_dofs(&self) -> usize {
        self.n_nodes
    }

    /// Length of a coefficient vector, `n_dofs * value_dim`.
    pub fn n_coeffs(&self) -> usize {
        self.n_nodes * self.value_dim
    }

    pub fn n_local(&self) -> usize {
        if self.degree == 1 {
            4
        } else {
            10
        }
    }

    pub fn tet_nodes(&self, a: usize) -> &[usize] {
        &self.tet_nodes[a][..self.n_local()]
    }

    pub fn node_points(&self) -> &[Point] {
        &self.node_points
    }

    pub fn geom(&self, a: usize) -> &TetGeom {
        &self.active.geoms[a]
    }

    /// Basis values and ambient gradients at a point given in barycentric coordinates.
    #[inline]
    pub fn basis_bary(&self, a: usize, bary: &[f64; 4], vals: &mut [f64], grads: &mut [Vec3]) {
        let g = &self.active.geoms[a].grad_bary;
        if self.degree == 1 {
            for i in 0..4 {
                vals[i] = bary[i];
                grads[i] = g[i];
            }
        } else {
            for i in 0..4 {
                vals[i] = bary[i] * (2.0 * bary[i] - 1.0);
                grads[i] = g[i] * (4.0 * bary[i] - 1.0);
            }
            for (e, &(i, j)) in TET_EDGES.iter().enumerate() {
                vals[4 + e] = 4.0 * bary[i] * bary[j];
                grads[4 + e] = (g[i] * bary[j] + g[j] * bary[i]) * 4.0;
            }
        }
    }

    /// Lagrange basis values and gradients at a physical point of active tetrahedron `a`.
    pub fn eval_basis(&self, a: usize, x: &Point) -> Result<(Vec<f64>, Vec<Vec3>)> {
        let bary = self.active.geoms[a].barycentric(x);
        let min = bary.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        if min < -1e-10 {
            return Err(Error::PointOutsideTet { tet: a, min_bary: min });
        }
        let n = self.n_local();
        let mut vals = vec![0.0; n];
        let mut grads = vec![Vec3::zeros(); n];
        self.basis_bary(a, &bary, &mut vals, &mut grads);
        Ok((vals, grads))
    }

    /// Nodal interpolation of a scalar function.
    pub fn interpolate(&self, f: impl Fn(&Point) -> f64) -> FeFunction {
        assert_eq!(self.value_dim, 1, "scalar interpolation into a vector space");
        FeFunction {
            value_dim: 1,
            coeffs: self.node_points.iter().map(f).collect(),
        }
    }

    /// Nodal interpolation of a vector function.
    pub fn interpolate_vec(&self, f: impl Fn(&Point) -> Vec3) -> FeFunction {
        assert_eq!(self.value_dim, 3, "vector interpolation into a scalar space");
        let mut coeffs = Vec::with_capacity(3 * self.n_nodes);
        for x in &self.node_points {
            let v = f(x);
            coeffs.extend([v.x, v.y, v.z]);
        }
        FeFunction {
            value_dim: 3,
            coeffs,
        }
    }

    pub fn zero(&self) -> FeFunction {
        FeFunction {
            value_dim: self.value_dim,
            coeffs: vec![0.0; self.n_coeffs()],
        }
    }

    /// Scalar value and gradient of `coeffs` at a barycentric point of tetrahedron `a`.
    pub fn eval_scalar(&self, a: usize, bary: &[f64; 4], coeffs: &[f64]) -> (f64, Vec3) {
        let mut vals = [0.0; MAX_LOCAL];
        let mut grads = [Vec3::zeros(); MAX_LOCAL];
        self.basis_bary(a, bary, &mut vals, &mut grads);
        let mut v = 0.0;
        let mut g = Vec3::zeros();
        for (k, &node) in self.tet_nodes(a).iter().enumerate() {
            v += vals[k] * coeffs[node];
            g += grads[k] * coeffs[node];
        }
        (v, g)
    }

    /// Vector value and Jacobian `J_ab = ∂u_a/∂x_b` at a barycentric point.
    pub fn eval_vector(
        &self,
        a: usize,
        bary: &[f64; 4],
        coeffs: &[f64],
    ) -> (Vec3, nalgebra::Matrix3<f64>) {
        let mut vals = [0.0; MAX_LOCAL];
        let mut grads = [Vec3::zeros(); MAX_LOCAL];
        self.basis_bary(a, bary, &mut vals, &mut grads);
        let mut v = Vec3::zeros();
        let mut j = nalgebra::Matrix3::zeros();
        for (k, &node) in self.tet_nodes(a).iter().enumerate() {
            let c = Vec3::new(coeffs[3 * node], coeffs[3 * node + 1], coeffs[3 * node + 2]);
            v += c * vals[k];
            j += c * grads[k].transpose();
        }
        (v, j)
    }
}

/// Coefficients of a finite element function, `value_dim` entries per node.
#[derive(Clone, Debug, PartialEq)]
pub struct FeFunction {
    pub value_dim: usize,
    pub coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn from_coeffs(value_dim: usize, coeffs: Vec<f64>) -> Self {
        Self { value_dim, coeffs }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aabb;
    use crate::mesh::{build_active, build_mesh, select_active};
    use crate::surface::{make_sphere, LevelSetSurface};

    fn plane_space(degree: u32) -> FeSpace {
        let domain = Aabb::default_domain();
        let s = LevelSetSurface::custom(|x: &Point| x.z - 0.1, &domain);
        let m = build_mesh(&domain, &s, 1).unwrap();
        let a = select_active(Arc::new(m), &s).unwrap();
        FeSpace::new(Arc::new(a), degree, 1).unwrap()
    }

    #[test]
    fn partition_of_unity() {
        for deg in [1, 2] {
            let sp = plane_space(deg);
            let g = sp.geom(0);
            let x = g.point(&[0.1, 0.2, 0.3, 0.4]);
            let (v, gr) = sp.eval_basis(0, &x).unwrap();
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let gs: Vec3 = gr.iter().sum();
            assert!(gs.norm() < 1e-12);
        }
    }

    #[test]
    fn nodal_property() {
        let sp = plane_space(2);
        let g = sp.geom(0);
        let (v, _) = sp.eval_basis(0, &g.verts[2]).unwrap();
        for (k, val) in v.iter().enumerate() {
            assert!((val - if k == 2 { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
        let mid = (g.verts[1] + g.verts[3]) * 0.5;
        let (v, _) = sp.eval_basis(0, &mid).unwrap();
        // Edge (1, 3) is local edge 4.
        assert!((v[8] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn outside_point_rejected() {
        let sp = plane_space(1);
        let g = sp.geom(0);
        let far = g.verts[0] * 3.0 - g.verts[1] - g.verts[2];
        assert!(sp.eval_basis(0, &far).is_err());
    }

    #[test]
    fn reproduces_polynomials() {
        let sp1 = plane_space(1);
        let sp2 = plane_space(2);
        let lin = |x: &Point| 1.0 + 2.0 * x.x - x.y + 0.5 * x.z;
        let quad = |x: &Point| x.x * x.y - 2.0 * x.z * x.z + x.x + 3.0;
        let f1 = sp1.interpolate(lin);
        let f2 = sp2.interpolate(quad);
        for a in 0..sp1.active.len() {
            let b = [0.4, 0.3, 0.2, 0.1];
            let x = sp1.geom(a).point(&b);
            let (v1, g1) = sp1.eval_scalar(a, &b, &f1.coeffs);
            assert!((v1 - lin(&x)).abs() < 1e-12);
            assert!((g1 - Vec3::new(2.0, -1.0, 0.5)).norm() < 1e-11);
            let (v2, _) = sp2.eval_scalar(a, &b, &f2.coeffs);
            assert!((v2 - quad(&x)).abs() < 1e-12);
        }
    }

    #[test]
    fn dof_counts() {
        let a = build_active(&make_sphere(), 2).unwrap();
        let a = Arc::new(a);
        let p1 = FeSpace::new(a.clone(), 1, 1).unwrap();
        let p2 = FeSpace::new(a.clone(), 2, 3).unwrap();
        assert!(p2.n_dofs() > p1.n_dofs());
        assert_eq!(p2.n_coeffs(), 3 * p2.n_dofs());
        assert!(FeSpace::new(a, 3, 1).is_err());
    }

    #[test]
    fn tanh_profile_at_pole() {
        let a = Arc::new(build_active(&make_sphere(), 4).unwrap());
        let sp = FeSpace::new(a.clone(), 1, 1).unwrap();
        let eps: f64 = 0.05;
        let c = sp.interpolate(|x| 0.5 * (1.0 + (x.z / (2.0 * 2f64.sqrt() * eps)).tanh()));
        let pole = Point::new(0.0, 0.0, 1.0);
        let t = (0..a.len())
            .find(|&t| a.geoms[t].barycentric(&pole).iter().all(|&b| b >= -1e-12))
            .unwrap();
        let (v, _) = sp.eval_scalar(t, &a.geoms[t].barycentric(&pole), &c.coeffs);
        // 0.5 (1 + tanh(1 / (2 sqrt(2) 0.05))) = 0.99999928
        assert!((v - 0.999_999_28).abs() < 1e-6);
    }
}
