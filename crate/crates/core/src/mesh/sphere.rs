//! Meshes generated in code: the sphere family and the five-tetrahedron cube.

use crate::error::Result;
use crate::mesh::surface::SurfaceMesh;
use crate::mesh::volume::VolumeMesh;
use crate::model::Vec3;

/// Regular octahedron inscribed in the unit sphere.
pub fn octahedron() -> SurfaceMesh {
    let vertices = vec![
        Vec3::x(),
        -Vec3::x(),
        Vec3::y(),
        -Vec3::y(),
        Vec3::z(),
        -Vec3::z(),
    ];
    let triangles = vec![
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ];
    SurfaceMesh::new(vertices, triangles).expect("octahedron is valid")
}

/// Octahedron refined `level` times with projection onto the sphere of the
/// given radius. Level `k` has `4^k * 8` triangles.
pub fn sphere_surface(level: usize, radius: f64) -> SurfaceMesh {
    let mut m = octahedron();
    for _ in 0..level {
        m = m.refine(Some(1.0));
    }
    let vertices = m.vertices().iter().map(|v| v * radius).collect();
    SurfaceMesh::new(vertices, m.triangles().to_vec()).expect("refined sphere is valid")
}

/// Ball of the given radius built from `max(level, 1)` concentric shells of
/// the level-`level` sphere triangulation. Prisms between shells are split
/// into three tetrahedra by a rule based on global vertex indices, which
/// keeps shared quadrilateral faces conforming; the innermost shell is
/// coned to the centre. Surface vertices come first in the volume
/// numbering.
pub fn sphere_volume(level: usize, radius: f64) -> Result<(SurfaceMesh, VolumeMesh)> {
    let surface = sphere_surface(level, radius);
    let layers = level.max(1);
    let ns = surface.n_vertices();
    // Shell k (1 = innermost) starts at (layers - k) * ns.
    let index = |shell: usize, v: usize| (layers - shell) * ns + v;
    let mut vertices = Vec::with_capacity(layers * ns + 1);
    for shell in (1..=layers).rev() {
        let f = shell as f64 / layers as f64;
        vertices.extend(surface.vertices().iter().map(|v| v * f));
    }
    let center = vertices.len();
    vertices.push(Vec3::zeros());

    let mut tets = Vec::with_capacity(surface.n_triangles() * (3 * layers - 2));
    for tri in surface.triangles() {
        tets.push([center, index(1, tri[0]), index(1, tri[1]), index(1, tri[2])]);
        let mut s = *tri;
        s.sort_unstable();
        for shell in 2..=layers {
            let a = s.map(|v| index(shell - 1, v));
            let b = s.map(|v| index(shell, v));
            tets.push([a[0], a[1], a[2], b[2]]);
            tets.push([a[0], a[1], b[1], b[2]]);
            tets.push([a[0], b[0], b[1], b[2]]);
        }
    }
    let volume = VolumeMesh::new(vertices, tets, &surface)?;
    Ok((surface, volume))
}

/// Unit cube `[0,1]^3` split into five tetrahedra (corner `i` at
/// `(i & 1, (i >> 1) & 1, (i >> 2) & 1)`).
pub fn unit_cube() -> (SurfaceMesh, VolumeMesh) {
    let vertices = (0..8)
        .map(|i| Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
        .collect();
    let tets = vec![[1, 2, 4, 7], [0, 1, 2, 4], [3, 1, 2, 7], [5, 1, 4, 7], [6, 2, 4, 7]];
    VolumeMesh::with_extracted_boundary(vertices, tets).expect("cube mesh is valid")
}
