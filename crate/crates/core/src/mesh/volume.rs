use std::collections::HashMap;

use crate::error::{FsiError, Result};
use crate::mesh::surface::{bbox_diagonal, SurfaceMesh};
use crate::model::Vec3;

/// Local faces of a tetrahedron; face `k` is opposite local vertex `k`.
pub const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

/// Tetrahedral mesh of the solid together with its link to the surface
/// mesh of its boundary.
#[derive(Clone, Debug)]
pub struct VolumeMesh {
    vertices: Vec<Vec3>,
    tetrahedra: Vec<[usize; 4]>,
    volumes: Vec<f64>,
    /// Surface triangle -> (tetrahedron, local face).
    boundary_map: Vec<(usize, usize)>,
    /// Surface vertex -> volume vertex.
    surface_vertices: Vec<usize>,
}

fn signed_tet_volume(p: [Vec3; 4]) -> f64 {
    (p[1] - p[0]).dot(&(p[2] - p[0]).cross(&(p[3] - p[0]))) / 6.0
}

impl VolumeMesh {
    /// Validates the tetrahedra (negatively oriented ones are reordered,
    /// flat ones rejected) and links the boundary to `surface`, whose
    /// vertices must coincide with volume vertices.
    pub fn new(vertices: Vec<Vec3>, mut tetrahedra: Vec<[usize; 4]>, surface: &SurfaceMesh) -> Result<Self> {
        let scale = bbox_diagonal(&vertices);
        let mut volumes = Vec::with_capacity(tetrahedra.len());
        for (i, t) in tetrahedra.iter_mut().enumerate() {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(FsiError::MeshMismatch(format!(
                    "tetrahedron {i} references a missing vertex"
                )));
            }
            let mut v = signed_tet_volume(t.map(|k| vertices[k]));
            if v.abs() <= 1e-14 * scale.powi(3) {
                return Err(FsiError::InvertedElement { index: i });
            }
            if v < 0.0 {
                t.swap(2, 3);
                v = -v;
            }
            volumes.push(v);
        }
        let surface_vertices = match_vertices(&vertices, surface.vertices(), scale)?;

        let mut faces: HashMap<[usize; 3], Vec<(usize, usize)>> = HashMap::new();
        for (ti, t) in tetrahedra.iter().enumerate() {
            for (k, f) in TET_FACES.iter().enumerate() {
                let mut key = f.map(|l| t[l]);
                key.sort_unstable();
                faces.entry(key).or_default().push((ti, k));
            }
        }
        let mut n_boundary = 0;
        for (key, owners) in &faces {
            if owners.len() > 2 {
                return Err(FsiError::MeshMismatch(format!(
                    "face {key:?} shared by {} tetrahedra",
                    owners.len()
                )));
            }
            if owners.len() == 1 {
                n_boundary += 1;
            }
        }
        if n_boundary != surface.n_triangles() {
            return Err(FsiError::MeshMismatch(format!(
                "volume boundary has {n_boundary} faces, surface has {} triangles",
                surface.n_triangles()
            )));
        }
        let mut boundary_map = Vec::with_capacity(surface.n_triangles());
        for (i, tri) in surface.triangles().iter().enumerate() {
            let mut key = tri.map(|v| surface_vertices[v]);
            key.sort_unstable();
            match faces.get(&key).map(|o| o.as_slice()) {
                Some(&[owner]) => boundary_map.push(owner),
                _ => {
                    return Err(FsiError::MeshMismatch(format!(
                        "surface triangle {i} is not a boundary face of the volume mesh"
                    )))
                }
            }
        }
        Ok(VolumeMesh {
            vertices,
            tetrahedra,
            volumes,
            boundary_map,
            surface_vertices,
        })
    }

    /// Surface mesh of the boundary faces, vertices numbered in increasing
    /// volume index, followed by the linked volume mesh.
    pub fn with_extracted_boundary(vertices: Vec<Vec3>, tetrahedra: Vec<[usize; 4]>) -> Result<(SurfaceMesh, Self)> {
        let mut tets = tetrahedra.clone();
        for t in &mut tets {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(FsiError::MeshMismatch("tetrahedron references a missing vertex".into()));
            }
            if signed_tet_volume(t.map(|k| vertices[k])) < 0.0 {
                t.swap(2, 3);
            }
        }
        let mut faces: HashMap<[usize; 3], [usize; 3]> = HashMap::new();
        for t in &tets {
            for f in TET_FACES {
                let oriented = f.map(|l| t[l]);
                let mut key = oriented;
                key.sort_unstable();
                if faces.remove(&key).is_none() {
                    faces.insert(key, oriented);
                }
            }
        }
        let mut boundary: Vec<[usize; 3]> = faces.into_values().collect();
        boundary.sort_unstable();
        let mut used: Vec<usize> = boundary.iter().flatten().copied().collect();
        used.sort_unstable();
        used.dedup();
        let index: HashMap<usize, usize> = used.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let surf_vertices = used.iter().map(|&v| vertices[v]).collect();
        let surf_tris = boundary.iter().map(|f| f.map(|v| index[&v])).collect();
        let surface = SurfaceMesh::new(surf_vertices, surf_tris)?;
        let volume = VolumeMesh::new(vertices, tetrahedra, &surface)?;
        Ok((surface, volume))
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }
    pub fn tetrahedra(&self) -> &[[usize; 4]] {
        &self.tetrahedra
    }
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }
    pub fn boundary_map(&self) -> &[(usize, usize)] {
        &self.boundary_map
    }
    /// Volume vertex index of each surface vertex.
    pub fn surface_vertices(&self) -> &[usize] {
        &self.surface_vertices
    }
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn n_tetrahedra(&self) -> usize {
        self.tetrahedra.len()
    }
    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }
    pub fn corners(&self, t: usize) -> [Vec3; 4] {
        self.tetrahedra[t].map(|i| self.vertices[i])
    }

    /// Vertex set of the boundary face linked to surface triangle `i`.
    pub fn boundary_face(&self, i: usize) -> [usize; 3] {
        let (t, k) = self.boundary_map[i];
        TET_FACES[k].map(|l| self.tetrahedra[t][l])
    }
}

/// Finds, for every surface vertex, the volume vertex at the same location.
fn match_vertices(volume: &[Vec3], surface: &[Vec3], scale: f64) -> Result<Vec<usize>> {
    let tol = 1e-9 * scale.max(f64::MIN_POSITIVE);
    let cell = 4.0 * tol;
    let key = |p: &Vec3| [p.x, p.y, p.z].map(|c| (c / cell).floor() as i64);
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in volume.iter().enumerate() {
        grid.entry(key(p)).or_default().push(i);
    }
    surface
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let k = key(p);
            let mut best = None;
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(c) = grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                            for &i in c {
                                if (volume[i] - p).norm() <= tol {
                                    best = Some(i);
                                }
                            }
                        }
                    }
                }
            }
            best.ok_or_else(|| FsiError::MeshMismatch(format!("surface vertex {j} is not a volume vertex")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::sphere::{sphere_volume, unit_cube};

    #[test]
    fn unit_cube_partition() {
        let (surface, volume) = unit_cube();
        assert_eq!(volume.n_tetrahedra(), 5);
        assert!((volume.total_volume() - 1.0).abs() < 1e-12);
        assert_eq!(surface.n_triangles(), 12);
        assert!((surface.total_area() - 6.0).abs() < 1e-12);
        assert!((surface.signed_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_map_round_trip() {
        for level in 0..3 {
            let (surface, volume) = sphere_volume(level, 1.0).unwrap();
            assert!(volume.volumes().iter().all(|&v| v > 0.0));
            for (i, tri) in surface.triangles().iter().enumerate() {
                let mut a = tri.map(|v| volume.surface_vertices()[v]);
                let mut b = volume.boundary_face(i);
                a.sort_unstable();
                b.sort_unstable();
                assert_eq!(a, b);
            }
            // Volume of the polyhedron equals the tetrahedral volume.
            assert!((surface.signed_volume() - volume.total_volume()).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_surface_is_rejected() {
        let (_, volume) = sphere_volume(1, 1.0).unwrap();
        let other = crate::mesh::sphere::sphere_surface(2, 1.0);
        assert!(VolumeMesh::new(volume.vertices().to_vec(), volume.tetrahedra().to_vec(), &other).is_err());
    }
}
