//! Incomplete (and exact) LDL^T factorization with dual-threshold dropping.
//!
//! Rows of `L` are computed one at a time (up-looking), each row being a
//! sparse triangular solve against the already finished rows. Entries of
//! row `i` below `droptol * ||a_i||_2` are dropped and at most `maxfill` of
//! the largest remaining entries are kept. With `droptol = 0` and an
//! unlimited `maxfill` the factorization is exact.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{fill_reducing_order, Csr, DenseMat, SparseSym};
use crate::error::{check_len, Error, Result};
use crate::linop::LinearOperator;

const MAX_SHIFT_RETRIES: usize = 8;
const FIRST_SHIFT: f64 = 1e-4;

/// Dropping parameters for [`ildl_factor`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IldlParams {
    /// Relative drop tolerance against the 2-norm of the input row.
    pub droptol: f64,
    /// Largest number of off-diagonal entries kept per row of `L`.
    pub maxfill: usize,
}

impl IldlParams {
    pub const fn exact() -> Self {
        Self {
            droptol: 0.0,
            maxfill: usize::MAX,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.droptol == 0.0 && self.maxfill == usize::MAX
    }
}

impl Default for IldlParams {
    fn default() -> Self {
        Self::exact()
    }
}

/// `P L D L^T P^T` factorization of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct TriFactor {
    /// `order[new] = old`.
    order: Vec<usize>,
    /// Strictly lower unit-triangular factor, stored by rows.
    l: Csr,
    d: Vec<f64>,
    /// Relative diagonal shift `beta` applied (`A + beta * diag(A)`), zero if
    /// none was needed.
    shift: f64,
}

impl TriFactor {
    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn l(&self) -> &Csr {
        &self.l
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Stored entries: strict lower part of `L` plus the diagonal `D`.
    pub fn nnz(&self) -> usize {
        self.l.nnz() + self.d.len()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), b.len())?;
        let mut x = vec![0.0; self.n()];
        self.solve_into(b, &mut x);
        Ok(x)
    }

    /// Writes `(P L D L^T P^T)^{-1} b` into `x`.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n();
        let mut y: Vec<f64> = self.order.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let (cols, vals) = self.l.row(i);
            let s: f64 = cols.iter().zip(vals).map(|(&j, v)| v * y[j]).sum();
            y[i] -= s;
        }
        for (yi, di) in y.iter_mut().zip(&self.d) {
            *yi /= di;
        }
        for i in (0..n).rev() {
            let yi = y[i];
            let (cols, vals) = self.l.row(i);
            for (&j, v) in cols.iter().zip(vals) {
                y[j] -= v * yi;
            }
        }
        for (p, &o) in self.order.iter().enumerate() {
            x[o] = y[p];
        }
    }

    /// Dense `P L D L^T P^T`, for verification at small order.
    pub fn reconstruct_dense(&self) -> DenseMat {
        let n = self.n();
        let mut l = self.l.to_dense();
        for i in 0..n {
            l[(i, i)] = 1.0;
        }
        let ld = DenseMat::from_fn(n, n, |i, j| l[(i, j)] * self.d[j]);
        let p = ld.matmul(&l.transpose());
        DenseMat::from_fn(n, n, |i, j| {
            let pi = self.order.iter().position(|&o| o == i).unwrap();
            let pj = self.order.iter().position(|&o| o == j).unwrap();
            p[(pi, pj)]
        })
    }
}

impl LinearOperator for TriFactor {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.solve_into(x, y)
    }
}

/// Incomplete LDL^T of `a` under the symmetric ordering `order`
/// (`order[new] = old`).
///
/// A vanishing pivot triggers a restart on `A + beta * diag(A)` with `beta`
/// starting at `1e-4` and doubling, up to eight times.
pub fn ildl_factor(a: &SparseSym, params: &IldlParams, order: &[usize]) -> Result<TriFactor> {
    check_len(a.n(), order.len())?;
    if !(params.droptol >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "droptol must be nonnegative, got {}",
            params.droptol
        )));
    }
    let ap = a.permute(order);
    let row_norms: Vec<f64> = (0..ap.n())
        .map(|i| ap.row(i).1.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let diag = ap.diagonal();

    let mut beta = 0.0;
    let mut last_pivot = 0;
    for attempt in 0..=MAX_SHIFT_RETRIES {
        if attempt > 0 {
            beta = FIRST_SHIFT * 2f64.powi(attempt as i32 - 1);
        }
        let shift: Vec<f64> = diag
            .iter()
            .zip(&row_norms)
            .map(|(&dv, &rn)| beta * if dv != 0.0 { dv } else { rn })
            .collect();
        match factor_once(&ap, &shift, &row_norms, params) {
            Ok((l, d)) => {
                return Ok(TriFactor {
                    order: order.to_vec(),
                    l,
                    d,
                    shift: beta,
                })
            }
            Err(pivot) => last_pivot = pivot,
        }
    }
    Err(Error::FactorizationBreakdown {
        pivot: order[last_pivot],
        retries: MAX_SHIFT_RETRIES,
    })
}

/// [`ildl_factor`] under the fill-reducing ordering of `a`.
pub fn ildl_reordered(a: &SparseSym, params: &IldlParams) -> Result<TriFactor> {
    let order = fill_reducing_order(a);
    ildl_factor(a, params, &order)
}

fn factor_once(
    ap: &SparseSym,
    shift: &[f64],
    row_norms: &[f64],
    params: &IldlParams,
) -> std::result::Result<(Csr, Vec<f64>), usize> {
    let n = ap.n();
    let mut d = vec![0.0; n];
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut w = vec![0.0; n];
    let mut in_pattern = vec![false; n];
    let mut heap: BinaryHeap<Reverse<usize>> = BinaryHeap::new();

    for i in 0..n {
        let mut a_ii = shift[i];
        let (rc, rv) = ap.row(i);
        for (&j, &v) in rc.iter().zip(rv) {
            if j < i {
                w[j] = v;
                in_pattern[j] = true;
                heap.push(Reverse(j));
            } else if j == i {
                a_ii += v;
            }
        }

        let threshold = params.droptol * row_norms[i];
        let mut kept: Vec<(usize, f64)> = Vec::new();
        while let Some(Reverse(k)) = heap.pop() {
            in_pattern[k] = false;
            let wk = std::mem::take(&mut w[k]);
            if wk == 0.0 {
                continue;
            }
            let lik = wk / d[k];
            if lik.abs() < threshold {
                continue;
            }
            kept.push((k, lik));
            let scale = lik * d[k];
            for &(j, ljk) in &cols[k] {
                if !in_pattern[j] {
                    in_pattern[j] = true;
                    heap.push(Reverse(j));
                }
                w[j] -= scale * ljk;
            }
        }

        if kept.len() > params.maxfill {
            kept.sort_by(|x, y| y.1.abs().total_cmp(&x.1.abs()).then(x.0.cmp(&y.0)));
            kept.truncate(params.maxfill);
            kept.sort_by_key(|e| e.0);
        }

        let mut di = a_ii;
        for &(k, lik) in &kept {
            di -= lik * lik * d[k];
        }
        let scale = a_ii.abs().max(row_norms[i]);
        if !di.is_finite() || di.abs() <= 1e-14 * scale {
            return Err(i);
        }
        d[i] = di;
        for &(k, lik) in &kept {
            cols[k].push((i, lik));
        }
        rows.push(kept);
    }
    Ok((Csr::from_rows(n, rows), d))
}
