use sprs::{CsMat, TriMat};

use crate::error::{FsiError, Result};
use crate::mesh::surface::SurfaceMesh;
use crate::mesh::volume::VolumeMesh;

/// Dimensions of the discrete product space: vector P1 on the solid,
/// scalar continuous P1 on the interface, and P0 on the interface.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiscreteSpaces {
    pub p1_vector_volume: usize,
    pub p1_surface: usize,
    pub p0_surface: usize,
}

impl DiscreteSpaces {
    pub fn new(surface: &SurfaceMesh, volume: &VolumeMesh) -> Result<Self> {
        if volume.surface_vertices().len() != surface.n_vertices()
            || volume.boundary_map().len() != surface.n_triangles()
        {
            return Err(FsiError::MeshMismatch("volume mesh is linked to a different surface".into()));
        }
        Ok(DiscreteSpaces {
            p1_vector_volume: 3 * volume.n_vertices(),
            p1_surface: surface.n_vertices(),
            p0_surface: surface.n_triangles(),
        })
    }

    pub fn total(&self) -> usize {
        self.p1_vector_volume + self.p1_surface + self.p0_surface
    }

    /// Offsets of the three blocks in a stacked coefficient vector.
    pub fn offsets(&self) -> [usize; 3] {
        [0, self.p1_vector_volume, self.p1_vector_volume + self.p1_surface]
    }
}

/// `G[3 a + k, j] = int_Gamma v_{a,k} . n  q_j`, with `v_{a,k}` the volume hat
/// function of vertex `a` in direction `k` and `q_j` the surface hat of
/// vertex `j`. Independent of the frequency.
pub fn trace_coupling_matrix(surface: &SurfaceMesh, volume: &VolumeMesh) -> CsMat<f64> {
    let rows = 3 * volume.n_vertices();
    let mut tri = TriMat::new((rows, surface.n_vertices()));
    let map = volume.surface_vertices();
    for (t, verts) in surface.triangles().iter().enumerate() {
        let n = surface.normals()[t];
        let area = surface.areas()[t];
        for (la, &a) in verts.iter().enumerate() {
            for (lb, &b) in verts.iter().enumerate() {
                let m = area * if la == lb { 2.0 } else { 1.0 } / 12.0;
                for k in 0..3 {
                    tri.add_triplet(3 * map[a] + k, b, m * n[k]);
                }
            }
        }
    }
    tri.to_csr()
}

/// `M[i, j] = int_{tau_i} q_j`: P0 test functions against P1 trial functions.
pub fn mass_p0_p1(surface: &SurfaceMesh) -> CsMat<f64> {
    let mut tri = TriMat::new((surface.n_triangles(), surface.n_vertices()));
    for (t, verts) in surface.triangles().iter().enumerate() {
        for &v in verts {
            tri.add_triplet(t, v, surface.areas()[t] / 3.0);
        }
    }
    tri.to_csr()
}

/// Consistent P1 mass matrix on the surface.
pub fn mass_p1_p1(surface: &SurfaceMesh) -> CsMat<f64> {
    let n = surface.n_vertices();
    let mut tri = TriMat::new((n, n));
    for (t, verts) in surface.triangles().iter().enumerate() {
        for (la, &a) in verts.iter().enumerate() {
            for (lb, &b) in verts.iter().enumerate() {
                tri.add_triplet(a, b, surface.areas()[t] * if la == lb { 2.0 } else { 1.0 } / 12.0);
            }
        }
    }
    tri.to_csr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::sphere::sphere_volume;

    #[test]
    fn dimensions() {
        let (s, v) = sphere_volume(1, 1.0).unwrap();
        let d = DiscreteSpaces::new(&s, &v).unwrap();
        assert_eq!(d.p1_surface, 18);
        assert_eq!(d.p0_surface, 32);
        assert_eq!(d.p1_vector_volume, 3 * v.n_vertices());
        assert_eq!(d.offsets()[2], 3 * v.n_vertices() + 18);
    }

    /// `sum_{a,k,b} v_a[k] G[3a+k, b]` for a nodal vector field `v`.
    fn pair_with_constant(g: &CsMat<f64>, v: impl Fn(usize) -> [f64; 3]) -> f64 {
        g.iter().map(|(x, (r, _))| x * v(r / 3)[r % 3]).sum()
    }

    #[test]
    fn position_field_against_constant_gives_three_volumes() {
        // On a flat triangle the P1 interpolant of x is exact, so the pairing
        // is int x.n = 3 |Omega_h|, close to the area for the unit sphere.
        let (s, v) = sphere_volume(3, 1.0).unwrap();
        let g = trace_coupling_matrix(&s, &v);
        let total = pair_with_constant(&g, |a| {
            let p = v.vertices()[a];
            [p.x, p.y, p.z]
        });
        assert!((total - 3.0 * s.signed_volume()).abs() < 1e-12);
        assert!((total - s.total_area()).abs() < 0.02 * s.total_area());
    }

    #[test]
    fn tangential_field_pairs_to_zero() {
        // Rigid rotation about z is tangent to the sphere and divergence free.
        let (s, v) = sphere_volume(2, 1.0).unwrap();
        let g = trace_coupling_matrix(&s, &v);
        let total = pair_with_constant(&g, |a| {
            let p = v.vertices()[a];
            [-p.y, p.x, 0.0]
        });
        assert!(total.abs() < 1e-13);
    }

    #[test]
    fn p0_p1_mass_rows_sum_to_area() {
        let (s, _) = sphere_volume(1, 1.0).unwrap();
        let m = mass_p0_p1(&s);
        for (t, row) in m.outer_iterator().enumerate() {
            let sum: f64 = row.iter().map(|(_, x)| x).sum();
            assert!((sum - s.areas()[t]).abs() < 1e-15);
        }
        let m11 = mass_p1_p1(&s);
        let all: f64 = m11.iter().map(|(x, _)| x).sum();
        assert!((all - s.total_area()).abs() < 1e-12);
    }
}
