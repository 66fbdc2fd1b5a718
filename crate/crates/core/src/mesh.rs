//! Structured tetrahedral background mesh refined toward the surface, and the active set of
//! tetrahedra cut by it.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use crate::cut::triangulate_cut;
use crate::error::{Error, Result};
use crate::geometry::{tet_radius_ratio, tet_signed_volume, Aabb, Mat3, Point, Vec3};
use crate::surface::LevelSetSurface;

pub const MAX_LEVEL: u32 = 10;
/// Upper bound on circumradius / inradius for tetrahedra touching the surface.
pub const MAX_RADIUS_RATIO: f64 = 10.0;

const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

#[derive(Clone, Debug)]
pub struct BackgroundMesh {
    pub domain: Aabb,
    pub level: u32,
    /// Edge length of the finest cells (those around the surface).
    pub h: f64,
    pub vertices: Vec<Point>,
    pub tets: Vec<[usize; 4]>,
    /// Refinement level of the cube each tetrahedron came from.
    pub tet_level: Vec<u32>,
}

impl BackgroundMesh {
    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn tet_points(&self, t: usize) -> [Point; 4] {
        let v = &self.tets[t];
        [
            self.vertices[v[0]],
            self.vertices[v[1]],
            self.vertices[v[2]],
            self.vertices[v[3]],
        ]
    }
}

/// Mesh size at level `ℓ` for a box of the given edge length: `edge / 2^{ℓ+1}`.
pub fn mesh_size(edge: f64, level: u32) -> f64 {
    edge / f64::from(1u32 << (level + 1))
}

/// Builds the background mesh: 2x2x2 cubes, each split into six Kuhn tetrahedra, with
/// cubes near `Γ` subdivided 8-way on every level up to `level`.
///
/// A cube is refined when `|φ(center)| ≤ L_loc · diag`, `L_loc` a local bound for `|∇φ|`.
/// All existing same-level neighbours of a marked cube are refined too, so every tetrahedron
/// cut by the surface and all of its face neighbours sit on the finest level.
pub fn build_mesh(domain: &Aabb, surface: &LevelSetSurface, level: u32) -> Result<BackgroundMesh> {
    if level > MAX_LEVEL {
        return Err(Error::LevelTooLarge(level));
    }
    let extent = domain.extent();
    let n_fine = 1u32 << (level + 1);
    let fine_step = extent / f64::from(n_fine);

    // Leaves grouped by level: set of integer cell coordinates on that level's lattice.
    let mut leaves: Vec<BTreeSet<[u32; 3]>> = vec![BTreeSet::new(); level as usize + 1];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                leaves[0].insert([i, j, k]);
            }
        }
    }

    for l in 0..level {
        let n_l = 1u32 << (l + 1);
        let cell = extent / f64::from(n_l);
        let diag = cell.norm();
        let edge = cell.max();
        let current = &leaves[l as usize];
        let mut marked: BTreeSet<[u32; 3]> = current
            .iter()
            .filter(|idx| {
                let center = domain.min
                    + Vec3::new(
                        (f64::from(idx[0]) + 0.5) * cell.x,
                        (f64::from(idx[1]) + 0.5) * cell.y,
                        (f64::from(idx[2]) + 0.5) * cell.z,
                    );
                surface.phi(&center).abs() <= surface.local_lipschitz(&center, edge) * diag
            })
            .copied()
            .collect();
        if marked.is_empty() {
            return Err(Error::SurfaceOutsideDomain(l));
        }
        let mut ring = Vec::new();
        for idx in &marked {
            for d in neighbour_offsets() {
                let nb = [
                    idx[0] as i64 + d[0],
                    idx[1] as i64 + d[1],
                    idx[2] as i64 + d[2],
                ];
                if nb.iter().all(|&c| c >= 0 && c < i64::from(n_l)) {
                    let nb = [nb[0] as u32, nb[1] as u32, nb[2] as u32];
                    if current.contains(&nb) {
                        ring.push(nb);
                    }
                }
            }
        }
        marked.extend(ring);
        let mut children = BTreeSet::new();
        for idx in &marked {
            for c in 0..8u32 {
                children.insert([
                    2 * idx[0] + (c & 1),
                    2 * idx[1] + ((c >> 1) & 1),
                    2 * idx[2] + ((c >> 2) & 1),
                ]);
            }
        }
        let current = &mut leaves[l as usize];
        for idx in &marked {
            current.remove(idx);
        }
        leaves[l as usize + 1] = children;
    }

    let mut vertex_of: HashMap<[u32; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut tets = Vec::new();
    let mut tet_level = Vec::new();
    let mut vertex = |key: [u32; 3], vertices: &mut Vec<Point>| -> usize {
        *vertex_of.entry(key).or_insert_with(|| {
            vertices.push(
                domain.min
                    + Vec3::new(
                        f64::from(key[0]) * fine_step.x,
                        f64::from(key[1]) * fine_step.y,
                        f64::from(key[2]) * fine_step.z,
                    ),
            );
            vertices.len() - 1
        })
    };
    for (l, set) in leaves.iter().enumerate() {
        let s = 1u32 << (level as usize - l);
        for idx in set {
            let base = [idx[0] * s, idx[1] * s, idx[2] * s];
            for perm in PERMUTATIONS {
                let mut key = base;
                let mut ids = [0usize; 4];
                ids[0] = vertex(key, &mut vertices);
                for (step, &axis) in perm.iter().enumerate() {
                    key[axis] += s;
                    ids[step + 1] = vertex(key, &mut vertices);
                }
                let vol = tet_signed_volume(
                    &vertices[ids[0]],
                    &vertices[ids[1]],
                    &vertices[ids[2]],
                    &vertices[ids[3]],
                );
                if vol < 0.0 {
                    ids.swap(2, 3);
                }
                tets.push(ids);
                tet_level.push(l as u32);
            }
        }
    }

    Ok(BackgroundMesh {
        domain: *domain,
        level,
        h: fine_step.max(),
        vertices,
        tets,
        tet_level,
    })
}

fn neighbour_offsets() -> impl Iterator<Item = [i64; 3]> {
    (0..27)
        .map(|c| [c % 3 - 1, (c / 3) % 3 - 1, c / 9 - 1])
        .filter(|d| *d != [0, 0, 0])
}

/// Affine data of a tetrahedron: vertices, barycentric gradients and volume.
#[derive(Clone, Copy, Debug)]
pub struct TetGeom {
    pub verts: [Point; 4],
    pub grad_bary: [Vec3; 4],
    pub volume: f64,
}

impl TetGeom {
    pub fn new(verts: [Point; 4]) -> Self {
        let j = Mat3::from_columns(&[
            verts[1] - verts[0],
            verts[2] - verts[0],
            verts[3] - verts[0],
        ]);
        let inv = j.try_inverse().unwrap_or_else(Mat3::zeros);
        let g1 = inv.row(0).transpose();
        let g2 = inv.row(1).transpose();
        let g3 = inv.row(2).transpose();
        Self {
            verts,
            grad_bary: [-(g1 + g2 + g3), g1, g2, g3],
            volume: j.determinant().abs() / 6.0,
        }
    }

    pub fn barycentric(&self, x: &Point) -> [f64; 4] {
        let d = x - self.verts[0];
        let l1 = self.grad_bary[1].dot(&d);
        let l2 = self.grad_bary[2].dot(&d);
        let l3 = self.grad_bary[3].dot(&d);
        [1.0 - l1 - l2 - l3, l1, l2, l3]
    }

    pub fn point(&self, bary: &[f64; 4]) -> Point {
        self.verts[0] * bary[0]
            + self.verts[1] * bary[1]
            + self.verts[2] * bary[2]
            + self.verts[3] * bary[3]
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                d = d.max((self.verts[i] - self.verts[j]).norm());
            }
        }
        d
    }
}

/// Tetrahedra cut by `Γ` together with cached level-set data.
#[derive(Clone, Debug)]
pub struct ActiveMesh {
    pub mesh: Arc<BackgroundMesh>,
    pub surface: LevelSetSurface,
    /// Indices into `mesh.tets`.
    pub active_tets: Vec<usize>,
    /// φ at every background vertex, zeros nudged to `1e-12 h`.
    pub vertex_phi: Vec<f64>,
    /// Geometry of each active tetrahedron, aligned with `active_tets`.
    pub geoms: Vec<TetGeom>,
}

impl ActiveMesh {
    pub fn h(&self) -> f64 {
        self.mesh.h
    }

    pub fn len(&self) -> usize {
        self.active_tets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active_tets.is_empty()
    }

    /// Background vertex indices of the `a`-th active tetrahedron.
    pub fn tet_vertices(&self, a: usize) -> &[usize; 4] {
        &self.mesh.tets[self.active_tets[a]]
    }

    pub fn tet_phi(&self, a: usize) -> [f64; 4] {
        let v = self.tet_vertices(a);
        [
            self.vertex_phi[v[0]],
            self.vertex_phi[v[1]],
            self.vertex_phi[v[2]],
            self.vertex_phi[v[3]],
        ]
    }

    /// Sum of the volumes of the active tetrahedra.
    pub fn band_volume(&self) -> f64 {
        self.geoms.iter().map(|g| g.volume).sum()
    }
}

/// Depth of the sub-sampled search for surface pieces inside tetrahedra without a vertex sign
/// change.
pub const CUT_SEARCH_DEPTH: u32 = 4;

/// Whether `Γ` crosses the tetrahedron although φ has one sign at its vertices, as found by
/// recursive 8-way subdivision with exact φ at the new vertices.
fn hidden_cut(verts: &[Point; 4], phi: &[f64; 4], surface: &LevelSetSurface) -> bool {
    let g = TetGeom::new(*verts);
    let diam = g.diameter();
    let c = (verts[0] + verts[1] + verts[2] + verts[3]) * 0.25;
    let lip = surface.local_lipschitz(&c, diam);
    let min_abs = phi.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min_abs > lip * diam {
        return false;
    }
    let mut tris = Vec::new();
    triangulate_cut(verts, phi, CUT_SEARCH_DEPTH, &|x| surface.phi(x), lip, &mut tris);
    !tris.is_empty()
}

/// Selects the tetrahedra that intersect `Γ`: those whose vertex values of φ change sign, plus
/// those where a sign change appears only inside (the surface bulges through a face or edge).
pub fn select_active(mesh: Arc<BackgroundMesh>, surface: &LevelSetSurface) -> Result<ActiveMesh> {
    let nudge = 1e-12 * mesh.h;
    let vertex_phi: Vec<f64> = mesh
        .vertices
        .iter()
        .map(|x| {
            let v = surface.phi(x);
            if v == 0.0 {
                nudge
            } else {
                v
            }
        })
        .collect();
    let mut active_tets = Vec::new();
    for (t, tet) in mesh.tets.iter().enumerate() {
        let neg = tet.iter().filter(|&&v| vertex_phi[v] < 0.0).count();
        if (neg > 0 && neg < 4)
            || hidden_cut(
                &mesh.tet_points(t),
                &[
                    vertex_phi[tet[0]],
                    vertex_phi[tet[1]],
                    vertex_phi[tet[2]],
                    vertex_phi[tet[3]],
                ],
                surface,
            )
        {
            active_tets.push(t);
        }
    }
    if active_tets.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    let mut geoms = Vec::with_capacity(active_tets.len());
    for &t in &active_tets {
        let pts = mesh.tet_points(t);
        let ratio = tet_radius_ratio(&pts);
        if !(ratio <= MAX_RADIUS_RATIO) {
            return Err(Error::MeshQuality(format!(
                "tet {t} has radius ratio {ratio:.3}"
            )));
        }
        let g = TetGeom::new(pts);
        if !(g.volume > 0.0) {
            return Err(Error::MeshQuality(format!("tet {t} is degenerate")));
        }
        geoms.push(g);
    }
    Ok(ActiveMesh {
        mesh,
        surface: surface.clone(),
        active_tets,
        vertex_phi,
        geoms,
    })
}

/// Convenience: build the background mesh on the default box and select the active set.
pub fn build_active(surface: &LevelSetSurface, level: u32) -> Result<ActiveMesh> {
    let mesh = build_mesh(&Aabb::default_domain(), surface, level)?;
    select_active(Arc::new(mesh), surface)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::make_sphere;

    #[test]
    fn level_zero_has_48_tets() {
        let m = build_mesh(&Aabb::default_domain(), &make_sphere(), 0).unwrap();
        assert_eq!(m.n_tets(), 48);
        assert_eq!(m.vertices.len(), 27);
        let total: f64 = (0..m.n_tets())
            .map(|t| {
                let p = m.tet_points(t);
                tet_signed_volume(&p[0], &p[1], &p[2], &p[3])
            })
            .sum();
        assert!((total - (10.0f64 / 3.0).powi(3)).abs() < 1e-12);
    }

    #[test]
    fn mesh_sizes() {
        let e = 10.0 / 3.0;
        assert!((mesh_size(e, 3) - 0.208_333_333_333_333_3).abs() < 1e-15);
        assert!((mesh_size(e, 5) - 0.052_083_333_333_333_3).abs() < 1e-15);
        let m = build_mesh(&Aabb::default_domain(), &make_sphere(), 3).unwrap();
        assert!((m.h - mesh_size(e, 3)).abs() < 1e-15);
    }

    #[test]
    fn all_volumes_positive_and_fill_box() {
        let m = build_mesh(&Aabb::default_domain(), &make_sphere(), 3).unwrap();
        let mut total = 0.0;
        for t in 0..m.n_tets() {
            let p = m.tet_points(t);
            let v = tet_signed_volume(&p[0], &p[1], &p[2], &p[3]);
            assert!(v > 0.0);
            total += v;
        }
        assert!((total - (10.0f64 / 3.0).powi(3)).abs() < 1e-10);
    }

    #[test]
    fn rejects_large_level() {
        assert!(matches!(
            build_mesh(&Aabb::default_domain(), &make_sphere(), 11),
            Err(Error::LevelTooLarge(11))
        ));
    }

    #[test]
    fn shifted_surface_outside_box() {
        let domain = Aabb::default_domain();
        let far = LevelSetSurface::custom(|x: &Point| x.norm() - 1.0 - 10.0, &domain);
        let m = build_mesh(&domain, &far, 0).unwrap();
        assert!(matches!(
            select_active(Arc::new(m), &far),
            Err(Error::EmptyActiveSet)
        ));
        assert!(matches!(
            build_mesh(&domain, &far, 2),
            Err(Error::SurfaceOutsideDomain(0))
        ));
    }

    #[test]
    fn coarse_active_set() {
        let s = make_sphere();
        let a = build_active(&s, 0).unwrap();
        assert!(!a.is_empty());
        let h = a.h();
        for i in 0..a.len() {
            let phi = a.tet_phi(i);
            let m = phi.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            assert!(m <= h * 3f64.sqrt());
        }
    }

    #[test]
    fn active_tets_are_finest() {
        let a = build_active(&make_sphere(), 4).unwrap();
        for &t in &a.active_tets {
            assert_eq!(a.mesh.tet_level[t], 4);
        }
    }

    #[test]
    fn barycentric_roundtrip() {
        let g = TetGeom::new([
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
            Point::new(0.0, 0.0, 1.0),
        ]);
        let b = [0.1, 0.2, 0.3, 0.4];
        let x = g.point(&b);
        let r = g.barycentric(&x);
        for i in 0..4 {
            assert!((r[i] - b[i]).abs() < 1e-15);
        }
        assert!((g.volume - 1.0 / 6.0).abs() < 1e-15);
    }
}
