//! Sparse helpers and an envelope (skyline) LDL^T factorization for complex
//! symmetric matrices, used to eliminate the finite element block.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use sprs::CsMat;

use crate::error::{FsiError, Result};

type C = Complex64;

/// `y = A x` for a real sparse matrix and complex vector.
pub fn spmv_real(a: &CsMat<f64>, x: &[C]) -> Vec<C> {
    let mut y = vec![C::new(0.0, 0.0); a.rows()];
    for (v, (r, c)) in a.iter() {
        y[r] += x[c] * *v;
    }
    y
}

/// `y = A^T x` for a real sparse matrix and complex vector.
pub fn spmv_real_t(a: &CsMat<f64>, x: &[C]) -> Vec<C> {
    let mut y = vec![C::new(0.0, 0.0); a.cols()];
    for (v, (r, c)) in a.iter() {
        y[c] += x[r] * *v;
    }
    y
}

/// `y = A x` for a complex sparse matrix.
pub fn spmv(a: &CsMat<C>, x: &[C]) -> Vec<C> {
    let mut y = vec![C::new(0.0, 0.0); a.rows()];
    for (v, (r, c)) in a.iter() {
        y[r] += *v * x[c];
    }
    y
}

pub fn to_dense_real(a: &CsMat<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.rows(), a.cols());
    for (v, (r, c)) in a.iter() {
        d[(r, c)] += v;
    }
    d
}

pub fn to_dense(a: &CsMat<C>) -> DMatrix<C> {
    let mut d = DMatrix::zeros(a.rows(), a.cols());
    for (v, (r, c)) in a.iter() {
        d[(r, c)] += v;
    }
    d
}

pub fn real_to_complex(a: &DMatrix<f64>) -> DMatrix<C> {
    a.map(|v| C::new(v, 0.0))
}

/// Envelope LDL^T factorization `P A P^T = L D L^T` of a complex symmetric
/// (not Hermitian) matrix without pivoting, after reverse Cuthill-McKee
/// reordering.
#[derive(Clone, Debug)]
pub struct SkylineLdlt {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// First stored column of each row (permuted numbering).
    first: Vec<usize>,
    /// Start of each row in `values`; row `i` holds columns `first[i]..=i`,
    /// strictly lower part of `L` followed by `D[i]`.
    start: Vec<usize>,
    values: Vec<C>,
}

impl SkylineLdlt {
    pub fn factor(a: &CsMat<C>) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(FsiError::Singular("matrix is not square".into()));
        }
        let a = if a.is_csr() { a.clone() } else { a.to_csr() };
        // The ordering only needs the (symmetrised) pattern.
        let mut pattern = sprs::TriMat::with_capacity((n, n), 2 * a.nnz());
        for (_, (r, c)) in a.iter() {
            pattern.add_triplet(r, c, 1u32);
            pattern.add_triplet(c, r, 1u32);
        }
        let pattern: CsMat<u32> = pattern.to_csr();
        let ordering = sprs::linalg::reverse_cuthill_mckee(pattern.view());
        let perm: Vec<usize> = ordering.perm.vec();
        Self::factor_with_ordering(&a, perm)
    }

    /// Factorization with a given ordering (`perm[new] = old`).
    pub fn factor_with_ordering(a: &CsMat<C>, perm: Vec<usize>) -> Result<Self> {
        let n = a.rows();
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        let mut scale = 0.0f64;
        for (v, (r, c)) in a.iter() {
            let (i, j) = (inv[r], inv[c]);
            if j < i {
                first[i] = first[i].min(j);
            }
            scale = scale.max(v.norm());
        }
        // Fill stays inside the envelope; make sure every row also covers its
        // symmetric partners.
        for (_, (r, c)) in a.iter() {
            let (i, j) = (inv[r], inv[c]);
            if i < j {
                first[j] = first[j].min(i);
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for i in 0..n {
            start.push(total);
            total += i - first[i] + 1;
        }
        start.push(total);
        let mut values = vec![C::new(0.0, 0.0); total];
        for (v, (r, c)) in a.iter() {
            let (i, j) = (inv[r], inv[c]);
            if j <= i {
                values[start[i] + j - first[i]] = *v;
            }
        }

        let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
        for i in 0..n {
            let fi = first[i];
            let (done, rest) = values.split_at_mut(start[i]);
            let row = &mut rest[..i - fi + 1];
            // row[j - fi] becomes w_j = L_ij D_j.
            for j in fi..i {
                let fj = first[j];
                let m = fi.max(fj);
                if m < j {
                    let rj = &done[start[j]..start[j] + (j - fj)];
                    let mut acc = C::new(0.0, 0.0);
                    for k in m..j {
                        acc += row[k - fi] * rj[k - fj];
                    }
                    row[j - fi] -= acc;
                }
            }
            let mut d = row[i - fi];
            for j in fi..i {
                let dj = done[start[j] + (j - first[j])];
                let w = row[j - fi];
                let l = w / dj;
                d -= w * l;
                row[j - fi] = l;
            }
            if !(d.norm() > tiny) || !d.re.is_finite() || !d.im.is_finite() {
                return Err(FsiError::Singular(format!("zero pivot at row {i}")));
            }
            row[i - fi] = d;
        }
        Ok(SkylineLdlt {
            n,
            perm,
            first,
            start,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries of `L` and `D`.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[C]) -> Vec<C> {
        let n = self.n;
        let mut y: Vec<C> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i] + (i - fi)];
            let mut acc = C::new(0.0, 0.0);
            for (k, l) in row.iter().enumerate() {
                acc += l * y[fi + k];
            }
            y[i] -= acc;
        }
        for i in 0..n {
            y[i] /= self.values[self.start[i] + (i - self.first[i])];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = y[i];
            let row = &self.values[self.start[i]..self.start[i] + (i - fi)];
            for (k, l) in row.iter().enumerate() {
                y[fi + k] -= l * xi;
            }
        }
        let mut x = vec![C::new(0.0, 0.0); n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    pub fn solve_vec(&self, b: &DVector<C>) -> DVector<C> {
        DVector::from_vec(self.solve(b.as_slice()))
    }

    /// Solves for every column of `b`.
    pub fn solve_matrix(&self, b: &DMatrix<C>) -> DMatrix<C> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for j in 0..b.ncols() {
            let col: Vec<C> = b.column(j).iter().copied().collect();
            out.set_column(j, &DVector::from_vec(self.solve(&col)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble_fem;
    use crate::mesh::sphere_volume;
    use crate::model::{ComplexFrequency, MaterialSystem};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_dense_solve() {
        let (_, mesh) = sphere_volume(2, 1.0).unwrap();
        let fem = assemble_fem(&mesh, &MaterialSystem::steel_in_water(1.0)).unwrap();
        let s = ComplexFrequency::from_parts(0.8, 6.0).unwrap();
        let a = fem.build_a(&s);
        let f = SkylineLdlt::factor(&a).unwrap();
        let natural = SkylineLdlt::factor_with_ordering(&a, (0..a.rows()).collect()).unwrap();
        assert!(f.envelope_size() < natural.envelope_size());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b: Vec<C> = (0..a.rows()).map(|_| C::new(rng.gen(), rng.gen())).collect();
        let x = f.solve(&b);
        let dense = to_dense(&a);
        let xd = dense.clone().lu().solve(&DVector::from_vec(b.clone())).unwrap();
        let diff = (DVector::from_vec(x.clone()) - &xd).norm() / xd.norm();
        assert!(diff < 1e-10, "{diff}");
        let r = DVector::from_vec(spmv(&a, &x)) - DVector::from_vec(b);
        assert!(r.norm() < 1e-10 * dense.norm() * xd.norm());
    }

    #[test]
    fn zero_pivot_is_reported() {
        let mut tri = sprs::TriMat::new((2, 2));
        tri.add_triplet(0, 0, C::new(0.0, 0.0));
        tri.add_triplet(0, 1, C::new(1.0, 0.0));
        tri.add_triplet(1, 0, C::new(1.0, 0.0));
        let a: CsMat<C> = tri.to_csr();
        assert!(matches!(
            SkylineLdlt::factor_with_ordering(&a, vec![0, 1]),
            Err(FsiError::Singular(_))
        ));
    }
}
