//! Linear tetrahedral finite elements for the Lamé operator.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use sprs::{CsMat, TriMat};

use crate::error::{FsiError, Result};
use crate::mesh::VolumeMesh;
use crate::model::{ComplexFrequency, MaterialSystem};

type C = Complex64;

/// Frequency independent parts of the elastic operator, in the vector P1
/// basis ordered `3 * vertex + component`.
#[derive(Clone, Debug)]
pub struct FemMatrices {
    /// `int lambda div u div v + 2 mu eps(u) : eps(v)`.
    pub stiffness: CsMat<f64>,
    /// `int u . v`.
    pub mass: CsMat<f64>,
    pub rho_e: f64,
    pub rho_0: f64,
}

/// Gradients of the four barycentric coordinates of a tetrahedron and its
/// volume.
pub fn barycentric_gradients(p: [Vector3<f64>; 4]) -> Option<([Vector3<f64>; 4], f64)> {
    let j = Matrix3::from_columns(&[p[1] - p[0], p[2] - p[0], p[3] - p[0]]);
    let vol = j.determinant() / 6.0;
    let inv = j.try_inverse()?;
    let g1 = inv.row(0).transpose();
    let g2 = inv.row(1).transpose();
    let g3 = inv.row(2).transpose();
    Some(([-(g1 + g2 + g3), g1, g2, g3], vol))
}

/// 12x12 element stiffness and mass matrices.
pub fn element_matrices(p: [Vector3<f64>; 4], lambda: f64, mu: f64) -> Option<([[f64; 12]; 12], [[f64; 12]; 12])> {
    let (g, vol) = barycentric_gradients(p)?;
    let mut k = [[0.0; 12]; 12];
    let mut m = [[0.0; 12]; 12];
    for a in 0..4 {
        for b in 0..4 {
            let gg = g[a].dot(&g[b]);
            let mab = vol * if a == b { 2.0 } else { 1.0 } / 20.0;
            for kk in 0..3 {
                for l in 0..3 {
                    let mut v = lambda * g[a][kk] * g[b][l] + mu * g[a][l] * g[b][kk];
                    if kk == l {
                        v += mu * gg;
                        m[3 * a + kk][3 * b + l] = mab;
                    }
                    k[3 * a + kk][3 * b + l] = vol * v;
                }
            }
        }
    }
    Some((k, m))
}

pub fn assemble_fem(mesh: &VolumeMesh, mat: &MaterialSystem) -> Result<FemMatrices> {
    mat.validate()?;
    let n = 3 * mesh.n_vertices();
    let mut k = TriMat::with_capacity((n, n), 144 * mesh.n_tetrahedra());
    let mut m = TriMat::with_capacity((n, n), 48 * mesh.n_tetrahedra());
    for (t, tet) in mesh.tetrahedra().iter().enumerate() {
        let (ke, me) = element_matrices(mesh.corners(t), mat.lame_lambda, mat.lame_mu)
            .ok_or(FsiError::InvertedElement { index: t })?;
        for a in 0..4 {
            for b in 0..4 {
                for kk in 0..3 {
                    for l in 0..3 {
                        let (r, c) = (3 * tet[a] + kk, 3 * tet[b] + l);
                        k.add_triplet(r, c, ke[3 * a + kk][3 * b + l]);
                        if kk == l {
                            m.add_triplet(r, c, me[3 * a + kk][3 * b + l]);
                        }
                    }
                }
            }
        }
    }
    Ok(FemMatrices {
        stiffness: k.to_csr(),
        mass: m.to_csr(),
        rho_e: mat.rho_e,
        rho_0: mat.rho_0,
    })
}

impl FemMatrices {
    pub fn dim(&self) -> usize {
        self.stiffness.rows()
    }

    /// `A(s) = K + rho_e s^2 M` for any complex `s`.
    pub fn build_a_raw(&self, s: C) -> CsMat<C> {
        let n = self.dim();
        let mut tri = TriMat::with_capacity((n, n), self.stiffness.nnz() + self.mass.nnz());
        for (v, (r, c)) in self.stiffness.iter() {
            tri.add_triplet(r, c, C::new(*v, 0.0));
        }
        let f = self.rho_e * s * s;
        for (v, (r, c)) in self.mass.iter() {
            tri.add_triplet(r, c, f * *v);
        }
        tri.to_csr()
    }

    /// `A~(s) = (K + rho_e s^2 M) / rho_0`.
    pub fn build_a(&self, s: &ComplexFrequency) -> CsMat<C> {
        let mut a = self.build_a_raw(s.s());
        let scale = 1.0 / self.rho_0;
        a.map_inplace(|v| v * scale);
        a
    }

    /// `u^H (K + rho_e w^2 M) u`, the squared energy norm at modulus `w`.
    pub fn energy_norm_sq(&self, u: &[C], w: f64) -> f64 {
        quadratic_form(&self.stiffness, u) + self.rho_e * w * w * quadratic_form(&self.mass, u)
    }
}

/// `u^H A u` for real symmetric `A`.
pub fn quadratic_form(a: &CsMat<f64>, u: &[C]) -> f64 {
    a.iter().map(|(v, (r, c))| (u[r].conj() * u[c]).re * v).sum()
}
