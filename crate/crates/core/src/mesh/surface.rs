use std::collections::HashMap;

use crate::error::{FsiError, Result};
use crate::model::Vec3;

/// Closed, consistently oriented triangulation with outward normals.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    normals: Vec<Vec3>,
    areas: Vec<f64>,
}

impl SurfaceMesh {
    /// Validates the triangulation and reorients it globally so that the
    /// normals point away from the enclosed region.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(FsiError::MeshMismatch("surface has no triangles".into()));
        }
        for (i, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(FsiError::MeshMismatch(format!(
                    "triangle {i} references a missing vertex"
                )));
            }
        }
        let scale = bbox_diagonal(&vertices);
        let mut mesh = SurfaceMesh {
            vertices,
            triangles,
            normals: Vec::new(),
            areas: Vec::new(),
        };
        mesh.compute_geometry();
        for (i, &a) in mesh.areas.iter().enumerate() {
            if !(a > 1e-14 * scale * scale) {
                return Err(FsiError::DegenerateElement { index: i });
            }
        }
        mesh.check_topology()?;
        if mesh.signed_volume() < 0.0 {
            for t in &mut mesh.triangles {
                t.swap(1, 2);
            }
            mesh.compute_geometry();
        }
        Ok(mesh)
    }

    fn compute_geometry(&mut self) {
        self.normals.clear();
        self.areas.clear();
        for t in &self.triangles {
            let [a, b, c] = t.map(|i| self.vertices[i]);
            let cr = (b - a).cross(&(c - a));
            let n = cr.norm();
            self.areas.push(0.5 * n);
            self.normals.push(if n > 0.0 { cr / n } else { Vec3::zeros() });
        }
    }

    fn check_topology(&self) -> Result<()> {
        // Directed edge -> occurrences; every undirected edge must appear
        // once in each direction.
        let mut edges: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let e = edges.entry(key).or_insert((0, 0));
                if a < b {
                    e.0 += 1;
                } else {
                    e.1 += 1;
                }
            }
        }
        let mut keys: Vec<_> = edges.into_iter().collect();
        keys.sort_unstable();
        for ((a, b), (fwd, bwd)) in keys {
            if fwd + bwd != 2 {
                return Err(FsiError::OpenSurface {
                    a,
                    b,
                    count: fwd + bwd,
                });
            }
            if fwd != 1 {
                return Err(FsiError::InconsistentOrientation { a, b });
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }
    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }
    pub fn areas(&self) -> &[f64] {
        &self.areas
    }
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i])
    }

    pub fn centroid(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.corners(t);
        (a + b + c) / 3.0
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Enclosed volume (divergence theorem); positive for outward normals.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i]);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Area-weighted centre of the enclosed solid.
    pub fn enclosed_barycenter(&self) -> Vec3 {
        let mut acc = Vec3::zeros();
        let mut vol = 0.0;
        for t in &self.triangles {
            let [a, b, c] = t.map(|i| self.vertices[i]);
            let v = a.dot(&b.cross(&c)) / 6.0;
            acc += v * (a + b + c) / 4.0;
            vol += v;
        }
        acc / vol
    }

    /// Largest triangle diameter.
    pub fn mesh_size(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                (a - b).norm().max((b - c).norm()).max((c - a).norm())
            })
            .fold(0.0, f64::max)
    }

    pub fn diameter(&self) -> f64 {
        bbox_diagonal(&self.vertices)
    }

    /// Same surface with every triangle's orientation reversed, bypassing
    /// the orientation fix. Used to exercise orientation checks.
    pub fn flipped(&self) -> Self {
        let mut m = self.clone();
        for t in &mut m.triangles {
            t.swap(1, 2);
        }
        m.compute_geometry();
        m
    }

    /// Splits every triangle into four through its edge midpoints. With
    /// `sphere_radius`, new vertices are projected onto the sphere of that
    /// radius about the origin.
    pub fn refine(&self, sphere_radius: Option<f64>) -> Self {
        let mut vertices = self.vertices.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let mut p = 0.5 * (vertices[a] + vertices[b]);
                if let Some(r) = sphere_radius {
                    p *= r / p.norm();
                }
                vertices.push(p);
                vertices.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        let mut m = SurfaceMesh {
            vertices,
            triangles,
            normals: Vec::new(),
            areas: Vec::new(),
        };
        m.compute_geometry();
        m
    }

    /// For every vertex, the triangles containing it.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                out[v].push(t);
            }
        }
        out
    }
}

pub(crate) fn bbox_diagonal(points: &[Vec3]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (hi - lo).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::sphere::octahedron;

    #[test]
    fn octahedron_geometry() {
        let m = octahedron();
        assert_eq!((m.n_vertices(), m.n_triangles()), (6, 8));
        assert!((m.total_area() - 4.0 * 3f64.sqrt()).abs() < 1e-12);
        assert!((m.signed_volume() - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn inward_input_is_reoriented() {
        let m = octahedron().flipped();
        assert!(m.signed_volume() < 0.0);
        let fixed = SurfaceMesh::new(m.vertices().to_vec(), m.triangles().to_vec()).unwrap();
        assert!(fixed.signed_volume() > 0.0);
        for t in 0..fixed.n_triangles() {
            assert!(fixed.normals()[t].dot(&fixed.centroid(t)) > 0.0);
        }
    }

    #[test]
    fn rejects_degenerate_open_and_inconsistent() {
        let m = octahedron();
        let mut tris = m.triangles().to_vec();
        tris[0] = [0, 0, 1];
        assert!(matches!(
            SurfaceMesh::new(m.vertices().to_vec(), tris),
            Err(FsiError::DegenerateElement { index: 0 })
        ));
        let mut tris = m.triangles().to_vec();
        tris.pop();
        assert!(matches!(
            SurfaceMesh::new(m.vertices().to_vec(), tris),
            Err(FsiError::OpenSurface { .. })
        ));
        let mut tris = m.triangles().to_vec();
        tris[3].swap(0, 1);
        assert!(matches!(
            SurfaceMesh::new(m.vertices().to_vec(), tris),
            Err(FsiError::InconsistentOrientation { .. })
        ));
    }

    #[test]
    fn refinement_counts_and_projection() {
        let m = octahedron();
        let r = m.refine(None);
        assert_eq!(r.n_triangles(), 32);
        assert!((r.total_area() - m.total_area()).abs() < 1e-12);
        let mut last = m.total_area();
        let mut p = m.clone();
        for _ in 0..4 {
            p = p.refine(Some(1.0));
            for v in p.vertices() {
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
            let a = p.total_area();
            assert!(a > last && a < 4.0 * std::f64::consts::PI);
            last = a;
            // Still closed and consistently oriented.
            SurfaceMesh::new(p.vertices().to_vec(), p.triangles().to_vec()).unwrap();
            assert!(p.signed_volume() > 0.0);
        }
        assert!((last - 4.0 * std::f64::consts::PI).abs() < 0.05);
    }
}
