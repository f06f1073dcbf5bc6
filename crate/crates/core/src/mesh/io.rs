//! Plain-text mesh format:
//!
//! ```text
//! OFFLIKE surf        (or: OFFLIKE vol)
//! <n_vertices> <n_elements>
//! x y z               (n_vertices lines)
//! i j k [l]           (n_elements lines, 0-based)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{FsiError, Result};
use crate::mesh::surface::SurfaceMesh;
use crate::mesh::volume::VolumeMesh;
use crate::model::Vec3;

#[derive(Clone, Debug)]
pub enum LoadedMesh {
    Surface(SurfaceMesh),
    /// A volume mesh with its extracted boundary surface.
    Volume(SurfaceMesh, VolumeMesh),
}

impl LoadedMesh {
    pub fn surface(&self) -> &SurfaceMesh {
        match self {
            LoadedMesh::Surface(s) | LoadedMesh::Volume(s, _) => s,
        }
    }
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<LoadedMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| FsiError::io(path, e))?;
    read_mesh(&text)
}

fn parse_err(line: usize, message: impl Into<String>) -> FsiError {
    FsiError::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_mesh(text: &str) -> Result<LoadedMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (ln, header) = lines.next().ok_or_else(|| parse_err(0, "empty file"))?;
    let mut words = header.split_whitespace();
    if words.next() != Some("OFFLIKE") {
        return Err(parse_err(ln, "expected header `OFFLIKE surf|vol`"));
    }
    let per_element = match words.next() {
        Some("surf") => 3,
        Some("vol") => 4,
        _ => return Err(parse_err(ln, "mesh kind must be `surf` or `vol`")),
    };

    let (ln, counts) = lines.next().ok_or_else(|| parse_err(ln, "missing counts line"))?;
    let counts: Vec<usize> = counts
        .split_whitespace()
        .map(|w| w.parse().map_err(|_| parse_err(ln, format!("bad count `{w}`"))))
        .collect::<Result<_>>()?;
    if counts.len() != 2 {
        return Err(parse_err(ln, "counts line must hold two integers"));
    }
    let (nv, ne) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "unexpected end of vertex list"))?;
        let xyz: Vec<f64> = l
            .split_whitespace()
            .map(|w| w.parse().map_err(|_| parse_err(ln, format!("bad coordinate `{w}`"))))
            .collect::<Result<_>>()?;
        if xyz.len() != 3 || xyz.iter().any(|c| !c.is_finite()) {
            return Err(parse_err(ln, "vertex line must hold three finite numbers"));
        }
        vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
    }

    let mut elements = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "unexpected end of element list"))?;
        let idx: Vec<usize> = l
            .split_whitespace()
            .map(|w| w.parse().map_err(|_| parse_err(ln, format!("bad index `{w}`"))))
            .collect::<Result<_>>()?;
        if idx.len() != per_element {
            return Err(parse_err(ln, format!("element line must hold {per_element} indices")));
        }
        if let Some(bad) = idx.iter().find(|&&i| i >= nv) {
            return Err(parse_err(ln, format!("index {bad} out of range")));
        }
        elements.push(idx);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing content"));
    }

    if per_element == 3 {
        let tris = elements.iter().map(|e| [e[0], e[1], e[2]]).collect();
        Ok(LoadedMesh::Surface(SurfaceMesh::new(vertices, tris)?))
    } else {
        let tets = elements.iter().map(|e| [e[0], e[1], e[2], e[3]]).collect();
        let (s, v) = VolumeMesh::with_extracted_boundary(vertices, tets)?;
        Ok(LoadedMesh::Volume(s, v))
    }
}

fn write_points(out: &mut String, points: &[Vec3]) {
    for p in points {
        let _ = writeln!(out, "{:.17e} {:.17e} {:.17e}", p.x, p.y, p.z);
    }
}

pub fn write_surface(mesh: &SurfaceMesh) -> String {
    let mut out = format!("OFFLIKE surf\n{} {}\n", mesh.n_vertices(), mesh.n_triangles());
    write_points(&mut out, mesh.vertices());
    for t in mesh.triangles() {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    out
}

pub fn write_volume(mesh: &VolumeMesh) -> String {
    let mut out = format!("OFFLIKE vol\n{} {}\n", mesh.n_vertices(), mesh.n_tetrahedra());
    write_points(&mut out, mesh.vertices());
    for t in mesh.tetrahedra() {
        let _ = writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::sphere::{octahedron, sphere_volume, unit_cube};

    const OCTA: &str = "OFFLIKE surf
# regular octahedron
6 8
1 0 0
-1 0 0
0 1 0
0 -1 0
0 0 1
0 0 -1
0 2 4
2 1 4
1 3 4
3 0 4
2 0 5
1 2 5
3 1 5
0 3 5
";

    #[test]
    fn reads_octahedron() {
        let m = read_mesh(OCTA).unwrap();
        let s = m.surface();
        assert_eq!((s.n_vertices(), s.n_triangles()), (6, 8));
        assert!((s.total_area() - 6.928_203_230_275_509).abs() < 1e-12);
    }

    #[test]
    fn repeated_vertex_is_degenerate() {
        let text = OCTA.replace("0 2 4\n", "0 0 4\n");
        assert!(matches!(read_mesh(&text), Err(FsiError::DegenerateElement { index: 0 })));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert!(matches!(read_mesh("OFF\n"), Err(FsiError::Parse { line: 1, .. })));
        let text = OCTA.replace("0 0 -1", "0 0 x");
        assert!(matches!(read_mesh(&text), Err(FsiError::Parse { line: 9, .. })));
        let text = OCTA.replace("0 3 5", "0 3 9");
        assert!(matches!(read_mesh(&text), Err(FsiError::Parse { .. })));
        assert!(matches!(read_mesh("OFFLIKE surf\n6 8\n"), Err(FsiError::Parse { .. })));
    }

    #[test]
    fn round_trips() {
        let text = write_surface(&octahedron());
        let back = read_mesh(&text).unwrap();
        assert_eq!(back.surface().triangles(), octahedron().triangles());

        let (_, cube) = unit_cube();
        match read_mesh(&write_volume(&cube)).unwrap() {
            LoadedMesh::Volume(s, v) => {
                assert!((v.total_volume() - 1.0).abs() < 1e-12);
                assert_eq!(s.n_triangles(), 12);
            }
            _ => panic!("expected a volume mesh"),
        }

        let (surface, ball) = sphere_volume(1, 1.0).unwrap();
        match read_mesh(&write_volume(&ball)).unwrap() {
            LoadedMesh::Volume(s, v) => {
                assert_eq!(s.n_triangles(), surface.n_triangles());
                assert!((v.total_volume() - ball.total_volume()).abs() < 1e-12);
            }
            _ => panic!("expected a volume mesh"),
        }
    }
}
