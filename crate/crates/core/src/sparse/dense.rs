//! Small dense kernels: symmetric eigensolver (Householder tridiagonalization
//! followed by implicit QL), Cholesky and LU. Used for the `k x k` matrices of
//! the low-rank corrections and for spectrum verification at desk scale.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Largest order accepted by [`dense_eigs_sym`].
pub const DENSE_EIG_CAP: usize = 4096;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> DenseMat {
        DenseMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &DenseMat) -> DenseMat {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Replaces `self` by `(self + self^T) / 2`.
    pub fn symmetrize(&mut self) {
        assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &DenseMat) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Lower Cholesky factor `L` with `self = L L^T`.
    pub fn cholesky(&self) -> Result<DenseMat> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut l = DenseMat::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(l)
    }

    /// Inverse by LU with partial pivoting.
    pub fn inverse(&self) -> Result<DenseMat> {
        let lu = Lu::new(self)?;
        let n = self.rows;
        let mut inv = DenseMat::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let x = lu.solve(&e);
            for i in 0..n {
                inv[(i, j)] = x[i];
            }
        }
        Ok(inv)
    }
}

impl Index<(usize, usize)> for DenseMat {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: DenseMat,
    piv: Vec<usize>,
}

impl Lu {
    pub fn new(a: &DenseMat) -> Result<Self> {
        assert_eq!(a.rows, a.cols);
        let n = a.rows;
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if pv <= 1e-14 * scale {
                return Err(Error::SingularCorrection);
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                piv.swap(k, p);
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    lu[(i, j)] -= f * lu[(k, j)];
                }
            }
        }
        Ok(Self { lu, piv })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.piv.len();
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[(i, j)] * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }
}

/// Eigenvalues (ascending) and optional eigenvectors of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct DenseSpectrum {
    pub eigenvalues: Vec<f64>,
    /// Column `j` is the eigenvector of `eigenvalues[j]`.
    pub eigenvectors: Option<DenseMat>,
}

/// All eigenvalues of a dense symmetric matrix, ascending.
pub fn dense_eigs_sym(a: &DenseMat, want_vectors: bool) -> Result<DenseSpectrum> {
    if a.rows != a.cols {
        return Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    if a.rows > DENSE_EIG_CAP {
        return Err(Error::TooLarge {
            n: a.rows,
            cap: DENSE_EIG_CAP,
        });
    }
    let n = a.rows;
    if n == 0 {
        return Ok(DenseSpectrum {
            eigenvalues: Vec::new(),
            eigenvectors: want_vectors.then(|| DenseMat::zeros(0, 0)),
        });
    }
    let mut v = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e, want_vectors);
    if !want_vectors {
        v = DenseMat::zeros(0, 0);
    }
    tql2(&mut d, &mut e, if want_vectors { Some(&mut v) } else { None });
    Ok(DenseSpectrum {
        eigenvalues: d,
        eigenvectors: want_vectors.then_some(v),
    })
}

/// Eigen-decomposition of the symmetric tridiagonal matrix with diagonal
/// `diag` and off-diagonal `off` (`off[i]` couples `i` and `i + 1`).
/// Eigenvalues ascending; column `j` of the returned matrix is the vector.
pub fn tridiag_eig(diag: &[f64], off: &[f64]) -> (Vec<f64>, DenseMat) {
    let n = diag.len();
    assert!(off.len() + 1 >= n);
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    for i in 1..n {
        e[i] = off[i - 1];
    }
    let mut v = DenseMat::identity(n);
    if n > 0 {
        tql2(&mut d, &mut e, Some(&mut v));
    }
    (d, v)
}

/// Householder reduction to tridiagonal form. On exit `d` is the diagonal,
/// `e[1..]` the sub-diagonal and, when `accumulate` is set, `v` holds the
/// orthogonal transformation.
fn tred2(v: &mut DenseMat, d: &mut [f64], e: &mut [f64], accumulate: bool) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    if !accumulate {
        for j in 0..n {
            d[j] = v[(j, j)];
        }
        e[0] = 0.0;
        return;
    }

    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL iterations on a symmetric tridiagonal matrix, followed by an
/// ascending sort. `e[i]` couples `i - 1` and `i` on entry.
fn tql2(d: &mut [f64], e: &mut [f64], mut v: Option<&mut DenseMat>) {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(v) = v.as_deref_mut() {
                        for k in 0..n {
                            h = v[(k, i + 1)];
                            v[(k, i + 1)] = s * v[(k, i)] + c * h;
                            v[(k, i)] = c * v[(k, i)] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            if let Some(v) = v.as_deref_mut() {
                for j in 0..n {
                    let t = v[(j, i)];
                    v[(j, i)] = v[(j, k)];
                    v[(j, k)] = t;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_sorted() {
        let a = DenseMat::from_fn(3, 3, |i, j| if i == j { [3.0, 1.0, 2.0][i] } else { 0.0 });
        let s = dense_eigs_sym(&a, false).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn tridiag_closed_form() {
        let a = crate::sparse::SparseSym::tridiag(4, -1.0, 2.0).to_dense();
        let s = dense_eigs_sym(&a, false).unwrap();
        for (k, &lam) in s.eigenvalues.iter().enumerate() {
            let want = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / 5.0).cos();
            assert_relative_eq!(lam, want, max_relative = 1e-12);
        }
    }

    #[test]
    fn householder_reflector() {
        let v = [1.0, 2.0, -1.0, 0.5, 3.0];
        let nv: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let u: Vec<f64> = v.iter().map(|x| x / nv).collect();
        let a = DenseMat::from_fn(5, 5, |i, j| {
            (if i == j { 1.0 } else { 0.0 }) - 2.0 * u[i] * u[j]
        });
        let s = dense_eigs_sym(&a, false).unwrap();
        let want = [-1.0, 1.0, 1.0, 1.0, 1.0];
        for (got, w) in s.eigenvalues.iter().zip(want) {
            assert!((got - w).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_over_cap() {
        let a = DenseMat::zeros(DENSE_EIG_CAP + 1, DENSE_EIG_CAP + 1);
        assert!(matches!(dense_eigs_sym(&a, false), Err(Error::TooLarge { .. })));
    }

    fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DenseMat {
        // Gram-Schmidt on a random matrix, columns.
        let mut cols: Vec<Vec<f64>> = Vec::new();
        while cols.len() < n {
            let mut c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            for _ in 0..2 {
                for q in &cols {
                    let d: f64 = q.iter().zip(&c).map(|(a, b)| a * b).sum();
                    c.iter_mut().zip(q).for_each(|(ci, qi)| *ci -= d * qi);
                }
            }
            let nc: f64 = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            c.iter_mut().for_each(|x| *x /= nc);
            cols.push(c);
        }
        DenseMat::from_fn(n, n, |i, j| cols[j][i])
    }

    #[test]
    fn recovers_constructed_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 7, 40] {
            let q = random_orthogonal(n, &mut rng);
            let mut lam: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..10.0)).collect();
            let d = DenseMat::from_fn(n, n, |i, j| if i == j { lam[i] } else { 0.0 });
            let mut a = q.matmul(&d).matmul(&q.transpose());
            a.symmetrize();
            let s = dense_eigs_sym(&a, true).unwrap();
            lam.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (g, w) in s.eigenvalues.iter().zip(&lam) {
                assert_relative_eq!(g, w, max_relative = 1e-10);
            }
            let v = s.eigenvectors.unwrap();
            let av = a.matmul(&v);
            for j in 0..n {
                for i in 0..n {
                    assert!((av[(i, j)] - s.eigenvalues[j] * v[(i, j)]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn agrees_with_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 30;
        let mut a = DenseMat::from_fn(n, n, |_, _| 0.0);
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.random_range(-1.0..1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let na = nalgebra::DMatrix::from_fn(n, n, |i, j| a[(i, j)]);
        let mut want: Vec<f64> = na.symmetric_eigenvalues().iter().copied().collect();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let got = dense_eigs_sym(&a, false).unwrap().eigenvalues;
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-11);
        }
    }

    #[test]
    fn tridiagonal_solver_matches_dense() {
        let diag = [2.0, 3.0, 1.0, 4.0];
        let off = [0.5, -1.0, 0.25];
        let (vals, vecs) = tridiag_eig(&diag, &off);
        let t = DenseMat::from_fn(4, 4, |i, j| {
            if i == j {
                diag[i]
            } else if i + 1 == j {
                off[i]
            } else if j + 1 == i {
                off[j]
            } else {
                0.0
            }
        });
        let dense = dense_eigs_sym(&t, false).unwrap().eigenvalues;
        for (a, b) in vals.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-13);
        }
        let tv = t.matmul(&vecs);
        for j in 0..4 {
            for i in 0..4 {
                assert!((tv[(i, j)] - vals[j] * vecs[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_and_inverse() {
        let a = DenseMat::from_fn(3, 3, |i, j| if i == j { 4.0 } else { 1.0 });
        let l = a.cholesky().unwrap();
        let llt = l.matmul(&l.transpose());
        assert!(llt.max_abs_diff(&a) < 1e-14);
        let inv = a.inverse().unwrap();
        assert!(a.matmul(&inv).max_abs_diff(&DenseMat::identity(3)) < 1e-14);
        let neg = DenseMat::from_fn(2, 2, |i, j| if i == j { -1.0 } else { 0.0 });
        assert!(neg.cholesky().is_err());
    }
}
