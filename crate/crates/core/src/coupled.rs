//! The coupled FEM/BEM system at one complex frequency.
//!
//! Unknowns are the solid displacement `U` (vector P1 on the volume), the
//! scattered potential trace `phi` (P1 on the interface) and its normal
//! derivative `lambda` (P0). The block operator is
//!
//! ```text
//! [ A~(s)     s G        0       ] [U     ]   [d1]
//! [ -s G^T    W(s)      -X(s)    ] [phi   ] = [d2]
//! [ 0         Y(s)       V(s)    ] [lambda]   [0 ]
//! ```
//!
//! with `G` the normal trace coupling matrix, `X = M^T / 2 - K'` and
//! `Y = M / 2 - K`, where `M` pairs P0 test functions with P1 trial
//! functions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use sprs::CsMat;

use crate::bem::{BioMatrices, KernelParams, QuadratureConfig};
use crate::cq::{forward, CQGrid, TransferMap};
use crate::error::{FsiError, Result};
use crate::fem::{assemble_fem, FemMatrices};
use crate::linalg::{spmv, spmv_real, spmv_real_t, to_dense, to_dense_real, SkylineLdlt};
use crate::mesh::{mass_p0_p1, trace_coupling_matrix, DiscreteSpaces, SurfaceMesh, VolumeMesh};
use crate::model::{ComplexFrequency, IncidentField, MaterialSystem, TimeSignal, Vec3};
use crate::quadrature::triangle;

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);

/// Gauss order of the triangle rule used for incident field loads.
pub const LOAD_ORDER: usize = 6;

/// Frequency independent pieces of the coupled system.
#[derive(Clone, Debug)]
pub struct CouplingOperators {
    pub surface: SurfaceMesh,
    pub fem: FemMatrices,
    /// `3 n_volume x n_surface_vertices`.
    pub gamma: CsMat<f64>,
    /// `n_triangles x n_surface_vertices`.
    pub mass: CsMat<f64>,
    pub spaces: DiscreteSpaces,
    pub sound_speed: f64,
    pub quadrature: QuadratureConfig,
    surface_vertices: Vec<usize>,
}

impl CouplingOperators {
    pub fn new(
        surface: &SurfaceMesh,
        volume: &VolumeMesh,
        mat: &MaterialSystem,
        quadrature: QuadratureConfig,
    ) -> Result<Self> {
        mat.validate()?;
        quadrature.validate()?;
        let spaces = DiscreteSpaces::new(surface, volume)?;
        Ok(CouplingOperators {
            surface: surface.clone(),
            fem: assemble_fem(volume, mat)?,
            gamma: trace_coupling_matrix(surface, volume),
            mass: mass_p0_p1(surface),
            spaces,
            sound_speed: mat.sound_speed,
            quadrature,
            surface_vertices: volume.surface_vertices().to_vec(),
        })
    }

    /// Volume vertex index of each surface vertex.
    pub fn surface_vertices(&self) -> &[usize] {
        &self.surface_vertices
    }

    pub fn kernel(&self, s: &ComplexFrequency) -> Result<KernelParams> {
        KernelParams::new(s, self.sound_speed, self.quadrature)
    }

    /// Assembles every block at `s`.
    pub fn system(&self, s: &ComplexFrequency) -> Result<BlockSystem<'_>> {
        let bio = BioMatrices::assemble(&self.kernel(s)?, &self.surface);
        Ok(self.system_with_bio(s, bio))
    }

    /// Builds the system from boundary matrices assembled elsewhere (for
    /// instance conjugated from `s`).
    pub fn system_with_bio(&self, s: &ComplexFrequency, bio: BioMatrices) -> BlockSystem<'_> {
        let m = to_dense_real(&self.mass).map(|v| C::new(0.5 * v, 0.0));
        let x = m.transpose() - &bio.kp;
        let y = m - &bio.k;
        BlockSystem {
            ops: self,
            frequency: *s,
            a: self.fem.build_a(s),
            bio,
            x,
            y,
        }
    }

    /// Loads of a boundary field `f(x, n) = (value, normal derivative)`:
    /// returns `(int value n_k q_a, int dn q_a)` with the first part ordered
    /// `3 a + k` over surface vertices `a`.
    pub fn boundary_loads<T>(&self, f: impl Fn(&Vec3, &Vec3) -> Result<(T, T)>) -> Result<(Vec<T>, Vec<T>)>
    where
        T: Copy + Default + std::ops::AddAssign + std::ops::Mul<f64, Output = T>,
    {
        let mesh = &self.surface;
        let mut f1 = vec![T::default(); 3 * mesh.n_vertices()];
        let mut f2 = vec![T::default(); mesh.n_vertices()];
        let rule = triangle(LOAD_ORDER);
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let p = mesh.corners(t);
            let n = mesh.normals()[t];
            let jac = 2.0 * mesh.areas()[t];
            for q in rule {
                let b = q.bary();
                let x = p[0] * b[0] + p[1] * b[1] + p[2] * b[2];
                let (value, dn) = f(&x, &n)?;
                for (k, &a) in tri.iter().enumerate() {
                    let w = q.w * jac * b[k];
                    for d in 0..3 {
                        f1[3 * a + d] += value * (w * n[d]);
                    }
                    f2[a] += dn * w;
                }
            }
        }
        Ok((f1, f2))
    }

    /// Right-hand side `(d1, d2, 0)` from boundary loads of the incident
    /// potential: `d1 = -s` times the trace loads spread to the volume rows.
    pub fn rhs_from_loads(&self, s: C, f1: &[C], f2: &[C]) -> BlockRhs {
        let mut d1 = vec![ZERO; self.spaces.p1_vector_volume];
        for (a, &va) in self.surface_vertices.iter().enumerate() {
            for k in 0..3 {
                d1[3 * va + k] = -s * f1[3 * a + k];
            }
        }
        BlockRhs { d1, d2: f2.to_vec() }
    }

    pub fn build_rhs(&self, s: &ComplexFrequency, incident: &IncidentField) -> Result<BlockRhs> {
        let (f1, f2) = self.boundary_loads(|x, n| incident.laplace_of_incident(s, x, n))?;
        Ok(self.rhs_from_loads(s.s(), &f1, &f2))
    }
}

/// `(d1, d2)`; the third component is zero by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockRhs {
    pub d1: Vec<C>,
    pub d2: Vec<C>,
}

impl BlockRhs {
    pub fn conj(&self) -> Self {
        BlockRhs {
            d1: self.d1.iter().map(|v| v.conj()).collect(),
            d2: self.d2.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        norm(&self.d1).hypot(norm(&self.d2))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrequencySolution {
    pub u_hat: DVector<C>,
    pub phi_hat: DVector<C>,
    pub lambda_hat: DVector<C>,
    pub frequency: ComplexFrequency,
}

impl FrequencySolution {
    pub fn conj(&self) -> Self {
        FrequencySolution {
            u_hat: self.u_hat.conjugate(),
            phi_hat: self.phi_hat.conjugate(),
            lambda_hat: self.lambda_hat.conjugate(),
            frequency: self.frequency.conj(),
        }
    }

    /// The three blocks stacked into one vector.
    pub fn stacked(&self) -> DVector<C> {
        let mut v = Vec::with_capacity(self.u_hat.len() + self.phi_hat.len() + self.lambda_hat.len());
        v.extend(self.u_hat.iter());
        v.extend(self.phi_hat.iter());
        v.extend(self.lambda_hat.iter());
        DVector::from_vec(v)
    }
}

fn norm(v: &[C]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// The assembled block operator at one frequency.
#[derive(Clone, Debug)]
pub struct BlockSystem<'a> {
    pub ops: &'a CouplingOperators,
    pub frequency: ComplexFrequency,
    /// `A~(s)`.
    pub a: CsMat<C>,
    pub bio: BioMatrices,
    /// `M^T / 2 - K'` (P1 test x P0 trial).
    pub x: DMatrix<C>,
    /// `M / 2 - K` (P0 test x P1 trial).
    pub y: DMatrix<C>,
}

impl<'a> BlockSystem<'a> {
    pub fn s(&self) -> C {
        self.frequency.s()
    }

    pub fn dims(&self) -> [usize; 3] {
        let sp = self.ops.spaces;
        [sp.p1_vector_volume, sp.p1_surface, sp.p0_surface]
    }

    fn split<'v>(&self, x: &'v [C]) -> (&'v [C], &'v [C], &'v [C]) {
        let [n1, n2, _] = self.dims();
        (&x[..n1], &x[n1..n1 + n2], &x[n1 + n2..])
    }

    /// `A x` for a stacked vector.
    pub fn apply(&self, x: &[C]) -> Vec<C> {
        let s = self.s();
        let (u, phi, lambda) = self.split(x);
        let phi_v = DVector::from_column_slice(phi);
        let lambda_v = DVector::from_column_slice(lambda);
        let mut r1 = spmv(&self.a, u);
        for (r, g) in r1.iter_mut().zip(spmv_real(&self.ops.gamma, phi)) {
            *r += s * g;
        }
        let gt_u = spmv_real_t(&self.ops.gamma, u);
        let r2 = &self.bio.w * &phi_v - &self.x * &lambda_v - DVector::from_vec(gt_u) * s;
        let r3 = &self.y * &phi_v + &self.bio.v * &lambda_v;
        let mut out = r1;
        out.extend(r2.iter());
        out.extend(r3.iter());
        out
    }

    /// Frobenius norm of the block operator, an upper bound for its
    /// spectral norm.
    pub fn frobenius_norm(&self) -> f64 {
        let a: f64 = self.a.iter().map(|(v, _)| v.norm_sqr()).sum();
        let g: f64 = self.ops.gamma.iter().map(|(v, _)| v * v).sum();
        let dense = self.bio.w.norm_squared() + self.bio.v.norm_squared() + self.x.norm_squared() + self.y.norm_squared();
        (a + 2.0 * self.s().norm_sqr() * g + dense).sqrt()
    }

    /// Frobenius norms of the nonzero blocks in row-major order:
    /// `A~, sG, -sG^T, W, X, Y, V`.
    pub fn block_norms(&self) -> [f64; 7] {
        let a: f64 = self.a.iter().map(|(v, _)| v.norm_sqr()).sum::<f64>().sqrt();
        let g = self.ops.gamma.iter().map(|(v, _)| v * v).sum::<f64>().sqrt() * self.s().norm();
        [a, g, g, self.bio.w.norm(), self.x.norm(), self.y.norm(), self.bio.v.norm()]
    }

    /// The full operator as a dense matrix (small meshes only).
    pub fn dense(&self) -> DMatrix<C> {
        let [n1, n2, n3] = self.dims();
        let s = self.s();
        let n = n1 + n2 + n3;
        let mut m = DMatrix::zeros(n, n);
        m.view_mut((0, 0), (n1, n1)).copy_from(&to_dense(&self.a));
        let g = to_dense_real(&self.ops.gamma).map(|v| C::new(v, 0.0));
        m.view_mut((0, n1), (n1, n2)).copy_from(&(&g * s));
        m.view_mut((n1, 0), (n2, n1)).copy_from(&(g.transpose() * -s));
        m.view_mut((n1, n1), (n2, n2)).copy_from(&self.bio.w);
        m.view_mut((n1, n1 + n2), (n2, n3)).copy_from(&(-&self.x));
        m.view_mut((n1 + n2, n1), (n3, n2)).copy_from(&self.y);
        m.view_mut((n1 + n2, n1 + n2), (n3, n3)).copy_from(&self.bio.v);
        m
    }

    /// `G` as dense columns restricted to the volume rows it touches.
    fn gamma_columns(&self) -> DMatrix<C> {
        let g = &self.ops.gamma;
        let mut cols = DMatrix::zeros(g.rows(), g.cols());
        for (v, (r, c)) in g.iter() {
            cols[(r, c)] += C::new(*v, 0.0);
        }
        cols
    }

    /// Solves by eliminating the finite element block (sparse envelope
    /// factorization) and a dense LU factorization of the boundary Schur
    /// complement `[W + s^2 G^T A~^-1 G, -X; Y, V]`.
    pub fn solve(&self, rhs: &BlockRhs) -> Result<FrequencySolution> {
        let [n1, n2, n3] = self.dims();
        if rhs.d1.len() != n1 || rhs.d2.len() != n2 {
            return Err(FsiError::MeshMismatch("right-hand side does not match the system".into()));
        }
        let s = self.s();
        let fem = SkylineLdlt::factor(&self.a)?;
        let z = fem.solve_matrix(&self.gamma_columns());
        let a_inv_d1 = fem.solve(&rhs.d1);

        let mut schur = DMatrix::zeros(n2 + n3, n2 + n3);
        let gtz = spmv_dense_t(&self.ops.gamma, &z);
        schur.view_mut((0, 0), (n2, n2)).copy_from(&(&self.bio.w + gtz * (s * s)));
        schur.view_mut((0, n2), (n2, n3)).copy_from(&(-&self.x));
        schur.view_mut((n2, 0), (n3, n2)).copy_from(&self.y);
        schur.view_mut((n2, n2), (n3, n3)).copy_from(&self.bio.v);
        let mut b = DVector::zeros(n2 + n3);
        let gt_d1 = spmv_real_t(&self.ops.gamma, &a_inv_d1);
        for j in 0..n2 {
            b[j] = rhs.d2[j] + s * gt_d1[j];
        }
        let boundary = schur
            .lu()
            .solve(&b)
            .ok_or_else(|| FsiError::Singular(format!("boundary Schur complement at s = {s}")))?;
        let phi = boundary.rows(0, n2).into_owned();
        let lambda = boundary.rows(n2, n3).into_owned();
        let u = DVector::from_vec(a_inv_d1) - z * &phi * s;

        let sol = FrequencySolution {
            u_hat: u,
            phi_hat: phi,
            lambda_hat: lambda,
            frequency: self.frequency,
        };
        let x = sol.stacked();
        let mut full_rhs: Vec<C> = rhs.d1.clone();
        full_rhs.extend(&rhs.d2);
        full_rhs.extend(std::iter::repeat(ZERO).take(n3));
        let ax = self.apply(x.as_slice());
        let residual = ax.iter().zip(&full_rhs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let scale = self.frobenius_norm() * x.norm() + norm(&full_rhs);
        if !(residual <= 1e-8 * scale) {
            return Err(FsiError::Residual(residual / scale.max(f64::MIN_POSITIVE)));
        }
        Ok(sol)
    }

    /// `B = W + X V^-1 Y`.
    pub fn b_operator(&self) -> Result<DMatrix<C>> {
        let v_inv_y = self
            .bio
            .v
            .clone()
            .lu()
            .solve(&self.y)
            .ok_or_else(|| FsiError::Singular("single layer matrix".into()))?;
        Ok(&self.bio.w + &self.x * v_inv_y)
    }

    /// `C x` for the block diagonalised operator
    /// `C = [A~, sG, 0; -sG^T, B, 0; 0, 0, V]`.
    pub fn apply_c(&self, b: &DMatrix<C>, x: &[C]) -> Vec<C> {
        let s = self.s();
        let (u, phi, chi) = self.split(x);
        let phi_v = DVector::from_column_slice(phi);
        let mut r1 = spmv(&self.a, u);
        for (r, g) in r1.iter_mut().zip(spmv_real(&self.ops.gamma, phi)) {
            *r += s * g;
        }
        let r2 = b * &phi_v - DVector::from_vec(spmv_real_t(&self.ops.gamma, u)) * s;
        let r3 = &self.bio.v * DVector::from_column_slice(chi);
        let mut out = r1;
        out.extend(r2.iter());
        out.extend(r3.iter());
        out
    }

    /// Relative residual `|A x - P' C P^-1 x| / (|A|_F |x|)` of the
    /// elimination of `lambda`.
    pub fn check_factorization(&self, x: &[C]) -> Result<f64> {
        let [n1, n2, _] = self.dims();
        let v_lu = self.bio.v.clone().lu();
        let b = self.b_operator()?;
        let (_, phi, _) = self.split(x);
        // P^-1 x = (u, phi, lambda + V^-1 Y phi).
        let y_phi = &self.y * DVector::from_column_slice(phi);
        let shift = v_lu.solve(&y_phi).ok_or_else(|| FsiError::Singular("single layer matrix".into()))?;
        let mut px = x.to_vec();
        for (k, v) in shift.iter().enumerate() {
            px[n1 + n2 + k] += v;
        }
        let mut r = self.apply_c(&b, &px);
        // P' r = (r1, r2 - X V^-1 r3, r3).
        let r3 = DVector::from_column_slice(&r[n1 + n2..]);
        let corr = &self.x * v_lu.solve(&r3).ok_or_else(|| FsiError::Singular("single layer matrix".into()))?;
        for (k, v) in corr.iter().enumerate() {
            r[n1 + k] -= v;
        }
        let ax = self.apply(x);
        let diff = ax.iter().zip(&r).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        Ok(diff / (self.frobenius_norm() * norm(x)))
    }

    /// `<Theta C x, conj(x)>` with `Theta = diag(e^{-i theta}, e^{-i theta},
    /// e^{i theta})`; strong ellipticity asks for a positive real part.
    pub fn rotated_c_form(&self, b: &DMatrix<C>, x: &[C]) -> C {
        let [n1, n2, _] = self.dims();
        let r = self.apply_c(b, x);
        let rot = self.frequency.phase().conj();
        let dot = |lo: usize, hi: usize| -> C { (lo..hi).map(|i| x[i].conj() * r[i]).sum() };
        rot * (dot(0, n1) + dot(n1, n1 + n2)) + rot.conj() * dot(n1 + n2, x.len())
    }

    /// `Re{s e^{-i theta} (<G psi, conj v> - <G^T v, conj psi>)}` and the
    /// scale `|s| |v| |psi| |G|_F` it should be compared with.
    pub fn skew_coupling(&self, v: &[C], psi: &[C]) -> (f64, f64) {
        let g_psi = spmv_real(&self.ops.gamma, psi);
        let gt_v = spmv_real_t(&self.ops.gamma, v);
        let first: C = g_psi.iter().zip(v).map(|(a, b)| a * b.conj()).sum();
        let second: C = gt_v.iter().zip(psi).map(|(a, b)| a * b.conj()).sum();
        let s = self.s();
        let value = (s * self.frequency.phase().conj() * (first - second)).re;
        let g = self.ops.gamma.iter().map(|(v, _)| v * v).sum::<f64>().sqrt();
        (value, s.norm() * norm(v) * norm(psi) * g)
    }
}

/// `G^T Z` for sparse real `G` and dense complex `Z`.
fn spmv_dense_t(g: &CsMat<f64>, z: &DMatrix<C>) -> DMatrix<C> {
    let mut out = DMatrix::zeros(g.cols(), z.ncols());
    for (v, (r, c)) in g.iter() {
        for j in 0..z.ncols() {
            out[(c, j)] += z[(r, j)] * *v;
        }
    }
    out
}

/// Assembles and solves the coupled system for an incident field.
pub fn solve_frequency(
    ops: &CouplingOperators,
    s: &ComplexFrequency,
    incident: &IncidentField,
) -> Result<FrequencySolution> {
    let sys = ops.system(s)?;
    sys.solve(&ops.build_rhs(s, incident)?)
}

/// Time samples of the boundary loads of the incident field on the grid,
/// `[int phi_inc n_k q_a (3 per vertex), int dn phi_inc q_a]`.
pub fn incident_loads(ops: &CouplingOperators, incident: &IncidentField, grid: &CQGrid) -> Result<TimeSignal> {
    let nv = ops.surface.n_vertices();
    let mut out = TimeSignal::zeros(grid.dt(), grid.n_steps(), 4 * nv);
    for n in 0..=grid.n_steps() {
        let t = out.time(n);
        let (f1, f2) = ops.boundary_loads(|x, normal| incident.eval_trace(x, normal, t))?;
        let row = out.row_mut(n);
        row[..3 * nv].copy_from_slice(&f1);
        row[3 * nv..].copy_from_slice(&f2);
    }
    Ok(out)
}

/// The coupled solve as a frequency response from boundary loads to the
/// stacked solution `(U, phi, lambda)`.
pub struct CoupledTransfer<'a> {
    pub ops: &'a CouplingOperators,
}

impl CoupledTransfer<'_> {
    pub fn solve(&self, s: &ComplexFrequency, data: &[C]) -> Result<FrequencySolution> {
        let nv = self.ops.surface.n_vertices();
        if data.len() != 4 * nv {
            return Err(FsiError::MeshMismatch("load vector does not match the surface".into()));
        }
        let rhs = self.ops.rhs_from_loads(s.s(), &data[..3 * nv], &data[3 * nv..]);
        self.ops.system(s)?.solve(&rhs)
    }
}

impl TransferMap for CoupledTransfer<'_> {
    fn input_width(&self) -> usize {
        4 * self.ops.surface.n_vertices()
    }
    fn output_width(&self) -> usize {
        self.ops.spaces.total()
    }
    fn apply(&self, s: &ComplexFrequency, data: &[C]) -> Result<Vec<C>> {
        Ok(self.solve(s, data)?.stacked().iter().copied().collect())
    }
}

/// Solutions at the CQ frequencies `l = 0..=N/2` (and at the start
/// frequency when the data do not vanish at `t = 0`).
#[derive(Clone, Debug)]
pub struct FrequencySweep {
    pub solutions: Vec<FrequencySolution>,
    pub start: Option<FrequencySolution>,
}

/// Transforms the incident loads and solves the coupled system at every
/// CQ frequency, in parallel.
pub fn solve_sweep(ops: &CouplingOperators, grid: &CQGrid, incident: &IncidentField) -> Result<FrequencySweep> {
    let loads = incident_loads(ops, incident, grid)?;
    let spectrum = forward(grid, &loads)?;
    let transfer = CoupledTransfer { ops };
    let freqs = grid.frequencies()?;
    let solutions = spectrum
        .values
        .par_iter()
        .zip(freqs.par_iter())
        .enumerate()
        .map(|(l, (d, s))| {
            transfer.solve(s, d).map_err(|e| FsiError::Transfer {
                index: l,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let start = match &spectrum.start {
        Some(g0) => Some(transfer.solve(&grid.start_frequency(), g0)?),
        None => None,
    };
    Ok(FrequencySweep { solutions, start })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::sphere_volume;
    use crate::model::Pulse;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(level: usize, mat: MaterialSystem) -> CouplingOperators {
        let (s, v) = sphere_volume(level, 1.0).unwrap();
        CouplingOperators::new(&s, &v, &mat, QuadratureConfig::default()).unwrap()
    }

    fn random(n: usize, rng: &mut ChaCha8Rng) -> Vec<C> {
        (0..n).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    fn incident() -> IncidentField {
        IncidentField::plane_wave(Vec3::new(1.0, 0.0, 0.0), Pulse::gaussian_sine(3.0, 0.4, 2.0), 1.0).unwrap()
    }

    #[test]
    fn structural_blocks() {
        let ops = setup(1, MaterialSystem::steel_in_water(1.0));
        let s = ComplexFrequency::from_parts(1.0, 2.0).unwrap();
        let sys = ops.system(&s).unwrap();
        let d = sys.dense();
        let [n1, n2, n3] = sys.dims();
        assert!(d.view((0, n1 + n2), (n1, n3)).iter().all(|v| *v == ZERO));
        assert!(d.view((n1 + n2, 0), (n3, n1)).iter().all(|v| *v == ZERO));
        let upper = d.view((0, n1), (n1, n2)).into_owned();
        let lower = d.view((n1, 0), (n2, n1)).into_owned();
        assert_eq!(upper, -lower.transpose());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(n1 + n2 + n3, &mut rng);
        let dense = &d * DVector::from_vec(x.clone());
        let applied = DVector::from_vec(sys.apply(&x));
        assert!((dense - applied).norm() < 1e-12 * d.norm() * norm(&x));
    }

    #[test]
    fn zero_rhs_and_manufactured_solution() {
        let ops = setup(1, MaterialSystem::steel_in_water(1.0));
        let s = ComplexFrequency::from_parts(0.7, 3.0).unwrap();
        let sys = ops.system(&s).unwrap();
        let [n1, n2, n3] = sys.dims();
        let zero = BlockRhs {
            d1: vec![ZERO; n1],
            d2: vec![ZERO; n2],
        };
        let sol = sys.solve(&zero).unwrap();
        assert_eq!(sol.stacked().norm(), 0.0);

        // With a random target the third row generally has nonzero data,
        // so solve the full dense system for the manufactured check.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let target = DVector::from_vec(random(n1 + n2 + n3, &mut rng));
        let b = sys.dense() * &target;
        let back = sys.dense().lu().solve(&b).unwrap();
        assert!((back - &target).norm() < 1e-8 * target.norm());

        // A target with the structure (u, phi, lambda) solving row three.
        let phi = DVector::from_vec(random(n2, &mut rng));
        let lambda = -sys.bio.v.clone().lu().solve(&(&sys.y * &phi)).unwrap();
        let u = DVector::from_vec(random(n1, &mut rng));
        let mut x: Vec<C> = u.iter().copied().collect();
        x.extend(phi.iter());
        x.extend(lambda.iter());
        let ax = sys.apply(&x);
        assert!(ax[n1 + n2..].iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-10 * norm(&ax));
        let rhs = BlockRhs {
            d1: ax[..n1].to_vec(),
            d2: ax[n1..n1 + n2].to_vec(),
        };
        let sol = sys.solve(&rhs).unwrap();
        let err = (sol.stacked() - DVector::from_vec(x.clone())).norm() / norm(&x);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn conjugate_frequency_gives_conjugate_solution() {
        let ops = setup(1, MaterialSystem::steel_in_water(1.0));
        let s = ComplexFrequency::from_parts(0.8, 4.0).unwrap();
        let inc = incident();
        let a = solve_frequency(&ops, &s, &inc).unwrap();
        let b = solve_frequency(&ops, &s.conj(), &inc).unwrap();
        let diff = (a.conj().stacked() - b.stacked()).norm();
        assert!(diff <= 1e-10 * a.stacked().norm(), "{diff}");
        let rhs = ops.build_rhs(&s, &inc).unwrap();
        assert_eq!(rhs.conj(), ops.build_rhs(&s.conj(), &inc).unwrap());
    }

    #[test]
    fn rhs_is_zero_for_silent_field_and_linear_in_s() {
        let ops = setup(1, MaterialSystem::unit(1.0));
        let s = ComplexFrequency::from_parts(1.0, 1.0).unwrap();
        let silent = ops.build_rhs(&s, &incident().silent()).unwrap();
        assert_eq!(silent.norm(), 0.0);
        let (f1, f2) = ops
            .boundary_loads(|x, n| incident().laplace_trace(C::new(1.0, 0.0), x, n))
            .unwrap();
        let r1 = ops.rhs_from_loads(C::new(1.0, 1.0), &f1, &f2);
        let r2 = ops.rhs_from_loads(C::new(2.0, 2.0), &f1, &f2);
        for (a, b) in r1.d1.iter().zip(&r2.d1) {
            assert!((a * 2.0 - b).norm() <= 1e-15 * b.norm().max(1e-300));
        }
    }

    #[test]
    fn factorization_identity() {
        let ops = setup(1, MaterialSystem::steel_in_water(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for &(re, im) in &[(1.0, 0.0), (0.5, 3.0), (1.0, -8.0)] {
            let sys = ops.system(&ComplexFrequency::from_parts(re, im).unwrap()).unwrap();
            let x = random(ops.spaces.total(), &mut rng);
            let r = sys.check_factorization(&x).unwrap();
            assert!(r < 1e-8, "{r}");
        }
    }

    #[test]
    fn skew_coupling_cancels_and_c_is_elliptic() {
        let ops = setup(1, MaterialSystem::steel_in_water(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(re, im) in &[(1.0, 0.5), (0.5, 5.0)] {
            let sys = ops.system(&ComplexFrequency::from_parts(re, im).unwrap()).unwrap();
            let b = sys.b_operator().unwrap();
            let [n1, n2, _] = sys.dims();
            for _ in 0..20 {
                let (value, scale) = sys.skew_coupling(&random(n1, &mut rng), &random(n2, &mut rng));
                assert!(value.abs() <= 1e-13 * scale);
                let x = random(ops.spaces.total(), &mut rng);
                assert!(sys.rotated_c_form(&b, &x).re > 0.0);
            }
        }
    }

    #[test]
    fn heavy_rigid_body_behaves_like_a_sound_hard_obstacle() {
        // A very dense, stiff solid barely moves, so the total normal
        // velocity vanishes: lambda is close to minus the incident normal
        // derivative.
        let mut mat = MaterialSystem::steel_in_water(1.0);
        mat.rho_e *= 1e8;
        mat.lame_lambda *= 1e8;
        mat.lame_mu *= 1e8;
        let s = ComplexFrequency::from_parts(1.0, 0.5).unwrap();
        let source = Vec3::new(2.5, 0.3, -0.2);
        let inc = IncidentField::point_source(source, Pulse::gaussian_sine(3.0, 0.4, 2.0), 1.0).unwrap();
        let mut errors = Vec::new();
        let mut sol = None;
        for level in [1, 2, 3] {
            let ops = setup(level, mat.clone());
            let x = solve_frequency(&ops, &s, &inc).unwrap();
            let mesh = &ops.surface;
            let target = DVector::from_fn(mesh.n_triangles(), |t, _| {
                -inc.laplace_of_incident(&s, &mesh.centroid(t), &mesh.normals()[t]).unwrap().1
            });
            errors.push((&x.lambda_hat - &target).norm() / target.norm());
            sol = Some(x);
        }
        assert!(errors[1] < errors[0] && errors[2] < 0.6 * errors[1], "{errors:?}");
        assert!(errors[2] < 0.08, "{errors:?}");
        let sol = sol.unwrap();
        assert!(sol.u_hat.norm() < 1e-4 * sol.phi_hat.norm());
    }
}
