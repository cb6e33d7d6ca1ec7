//! Sparse storage, factorization and the small dense kernels used for
//! verification.

mod dense;
mod ldl;
mod mm;
mod ordering;

pub use dense::{dense_eigs_sym, tridiag_eig, DenseMat, DenseSpectrum, Lu, DENSE_EIG_CAP};
pub use ldl::{ildl_factor, ildl_reordered, IldlParams, TriFactor};
pub use mm::{mm_read, mm_read_str};
pub use ordering::{fill_reducing_order, symbolic_lnnz};

use crate::error::{check_len, Error, Result};
use crate::linop::LinearOperator;

/// General compressed sparse row matrix.
///
/// Column indices are strictly increasing within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::IndexOutOfRange {
                    row: i,
                    col: j,
                    n: nrows.max(ncols),
                });
            }
            rows[i].push((j, v));
        }
        Ok(Self::from_rows(ncols, rows))
    }

    /// Builds from per-row entry lists (unsorted, duplicates summed).
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                debug_assert!(j < ncols);
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    /// `y = self * x` without length checks beyond debug assertions.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, v)| v * x[j]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.ncols, x.len())?;
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        Ok(y)
    }

    /// `y += a * self^T * x`
    pub fn tmul_vec_acc(&self, a: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&j, v) in cols.iter().zip(vals) {
                y[j] += a * v * xi;
            }
        }
    }

    pub fn transpose(&self) -> Csr {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let p = next[j];
                col_idx[p] = i;
                values[p] = v;
                next[j] += 1;
            }
        }
        Csr {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    /// Sparse product `self * other` (Gustavson).
    pub fn matmul(&self, other: &Csr) -> Result<Csr> {
        check_len(self.ncols, other.nrows)?;
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut rows = Vec::with_capacity(self.nrows);
        for i in 0..self.nrows {
            let mut pattern = Vec::new();
            let (cols, vals) = self.row(i);
            for (&k, &a) in cols.iter().zip(vals) {
                let (bc, bv) = other.row(k);
                for (&j, &b) in bc.iter().zip(bv) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        pattern.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            rows.push(pattern.into_iter().map(|j| (j, acc[j])).collect());
        }
        Ok(Csr::from_rows(other.ncols, rows))
    }

    /// `a * self + b * other` on the union pattern.
    pub fn add_scaled(&self, a: f64, other: &Csr, b: f64) -> Result<Csr> {
        check_len(self.nrows, other.nrows)?;
        check_len(self.ncols, other.ncols)?;
        let rows = (0..self.nrows)
            .map(|i| {
                let (c1, v1) = self.row(i);
                let (c2, v2) = other.row(i);
                c1.iter()
                    .zip(v1)
                    .map(|(&j, &v)| (j, a * v))
                    .chain(c2.iter().zip(v2).map(|(&j, &v)| (j, b * v)))
                    .collect()
            })
            .collect();
        Ok(Csr::from_rows(self.ncols, rows))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Extracts the submatrix with the given rows and columns (both lists
    /// give positions in `self`; the result is indexed by list position).
    pub fn extract(&self, rows: &[usize], cols: &[usize]) -> Csr {
        let mut col_pos = vec![usize::MAX; self.ncols];
        for (p, &c) in cols.iter().enumerate() {
            col_pos[c] = p;
        }
        let out = rows
            .iter()
            .map(|&r| {
                let (cs, vs) = self.row(r);
                cs.iter()
                    .zip(vs)
                    .filter(|(&c, _)| col_pos[c] != usize::MAX)
                    .map(|(&c, &v)| (col_pos[c], v))
                    .collect()
            })
            .collect();
        Csr::from_rows(cols.len(), out)
    }

    pub fn to_dense(&self) -> DenseMat {
        let mut d = DenseMat::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] = v;
            }
        }
        d
    }

    pub fn identity(n: usize) -> Csr {
        Csr {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }
}

/// Symmetric sparse matrix storing both triangles in compressed rows.
///
/// The stored pattern is symmetric and mirrored values are bitwise equal.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    inner: Csr,
}

impl SparseSym {
    /// Wraps a square CSR matrix after checking exact symmetry.
    pub fn from_csr(csr: Csr) -> Result<Self> {
        if csr.nrows != csr.ncols {
            return Err(Error::NotSquare {
                rows: csr.nrows,
                cols: csr.ncols,
            });
        }
        for i in 0..csr.nrows {
            let (cols, vals) = csr.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let (tc, tv) = csr.row(j);
                match tc.binary_search(&i) {
                    Ok(p) if tv[p] == v => {}
                    _ => return Err(Error::Nonsymmetric { row: i, col: j }),
                }
            }
        }
        Ok(Self { inner: csr })
    }

    /// Builds from triplets that must describe a symmetric matrix.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        Self::from_csr(Csr::from_triplets(n, n, triplets)?)
    }

    /// Builds from triplets of one triangle (either may be given); every
    /// off-diagonal entry is mirrored.
    pub fn from_triangle(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut all = Vec::with_capacity(2 * triplets.len());
        for &(i, j, v) in triplets {
            all.push((i, j, v));
            if i != j {
                all.push((j, i, v));
            }
        }
        Self::from_triplets(n, &all)
    }

    /// Wraps without checking symmetry. Callers guarantee the invariant.
    pub(crate) fn from_csr_unchecked(csr: Csr) -> Self {
        debug_assert_eq!(csr.nrows, csr.ncols);
        Self { inner: csr }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: Csr::identity(n),
        }
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        Self {
            inner: Csr {
                nrows: n,
                ncols: n,
                row_ptr: (0..=n).collect(),
                col_idx: (0..n).collect(),
                values: d.to_vec(),
            },
        }
    }

    /// The symmetric matrix with `diag` on the diagonal and `off` on the
    /// first sub- and super-diagonal.
    pub fn tridiag(n: usize, off: f64, diag: f64) -> Self {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, diag));
            if i + 1 < n {
                t.push((i + 1, i, off));
            }
        }
        Self::from_triangle(n, &t).expect("valid tridiagonal pattern")
    }

    pub fn n(&self) -> usize {
        self.inner.nrows
    }

    /// Number of stored entries (both triangles).
    pub fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    pub fn as_csr(&self) -> &Csr {
        &self.inner
    }

    pub fn into_csr(self) -> Csr {
        self.inner
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        self.inner.row(i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.get(i, i)).collect()
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.inner.mul_vec(x)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        self.inner.mul_vec_into(x, y)
    }

    /// Principal submatrix on `idx` (result indexed by position in `idx`).
    pub fn principal(&self, idx: &[usize]) -> SparseSym {
        Self::from_csr_unchecked(self.inner.extract(idx, idx))
    }

    /// Symmetric permutation: entry `(a, b)` of the result is entry
    /// `(order[a], order[b])` of `self`.
    pub fn permute(&self, order: &[usize]) -> SparseSym {
        self.principal(order)
    }

    /// `self + shift * I` on the union pattern.
    pub fn shifted(&self, shift: f64) -> SparseSym {
        let n = self.n();
        let csr = self
            .inner
            .add_scaled(1.0, &Csr::identity(n), shift)
            .expect("same shape");
        Self::from_csr_unchecked(csr)
    }

    /// `a * self + b * other`; `other` must be symmetric of the same order.
    pub fn add_scaled(&self, a: f64, other: &SparseSym, b: f64) -> Result<SparseSym> {
        Ok(Self::from_csr_unchecked(
            self.inner.add_scaled(a, &other.inner, b)?,
        ))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.frobenius_norm()
    }

    pub fn to_dense(&self) -> DenseMat {
        self.inner.to_dense()
    }

    /// Off-diagonal neighbours of vertex `i` in the adjacency graph.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i).0.iter().copied().filter(move |&j| j != i)
    }

    /// Lower-triangular part including the diagonal.
    pub fn lower_nnz(&self) -> usize {
        (self.nnz() + self.n()) / 2
    }
}

impl LinearOperator for SparseSym {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv_into(x, y)
    }
}

impl LinearOperator for Csr {
    fn dim(&self) -> usize {
        debug_assert_eq!(self.nrows, self.ncols);
        self.nrows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::dot;
    use proptest::prelude::*;

    fn lap2d(nx: usize) -> SparseSym {
        crate::harness::gen_laplacian(&[nx, nx], 0.0).unwrap()
    }

    #[test]
    fn spmv_identity() {
        let a = SparseSym::identity(3);
        assert_eq!(a.spmv(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn spmv_tridiag_ones() {
        let a = SparseSym::tridiag(3, -1.0, 2.0);
        assert_eq!(a.spmv(&[1.0, 1.0, 1.0]).unwrap(), vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn spmv_laplacian_center_column() {
        let a = lap2d(3);
        let mut e = vec![0.0; 9];
        e[4] = 1.0;
        let y = a.spmv(&e).unwrap();
        let mut want = vec![0.0; 9];
        want[4] = 4.0;
        for nb in [1, 3, 5, 7] {
            want[nb] = -1.0;
        }
        assert_eq!(y, want);
    }

    #[test]
    fn spmv_length_mismatch() {
        let a = SparseSym::identity(3);
        assert!(matches!(
            a.spmv(&[1.0]),
            Err(Error::LengthMismatch { expected: 3, found: 1 })
        ));
    }

    #[test]
    fn rejects_asymmetric_triplets() {
        let r = SparseSym::from_triplets(2, &[(0, 1, 1.0)]);
        assert!(matches!(r, Err(Error::Nonsymmetric { .. })));
    }

    #[test]
    fn matmul_and_transpose() {
        let a = Csr::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)]).unwrap();
        let at = a.transpose();
        let p = a.matmul(&at).unwrap();
        assert_eq!(p.to_dense().data(), &[5.0, 0.0, 0.0, 9.0]);
    }

    fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..1.0, n)
    }

    proptest! {
        #[test]
        fn spmv_is_linear(x in vec_strategy(25), y in vec_strategy(25), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let m = lap2d(5);
            let comb: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = m.spmv(&comb).unwrap();
            let ax = m.spmv(&x).unwrap();
            let ay = m.spmv(&y).unwrap();
            for i in 0..25 {
                prop_assert!((lhs[i] - (a * ax[i] + b * ay[i])).abs() < 1e-12);
            }
        }

        #[test]
        fn spmv_is_symmetric(x in vec_strategy(25), y in vec_strategy(25)) {
            let m = lap2d(5);
            let l = dot(&x, &m.spmv(&y).unwrap());
            let r = dot(&y, &m.spmv(&x).unwrap());
            prop_assert!((l - r).abs() < 1e-12);
        }
    }
}
