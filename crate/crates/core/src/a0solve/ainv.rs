//! Sparse approximate inverse by self-preconditioned minimal residual steps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{Csr, SparseSym};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrOptions {
    pub droptol: f64,
    pub max_nnz: usize,
    pub steps: usize,
    /// Use this step length instead of the minimizing one.
    pub fixed_beta: Option<f64>,
}

impl Default for MrOptions {
    fn default() -> Self {
        Self {
            droptol: 1e-3,
            max_nnz: 10,
            steps: 5,
            fixed_beta: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MrOutcome {
    pub x: SparseSym,
    /// `||I - C X_k||_F` for `k = 0..=steps`.
    pub residual_norms: Vec<f64>,
}

/// Approximate inverse of `c` with the default options apart from the
/// dropping and step parameters.
pub fn mr_ainv(c: &SparseSym, droptol: f64, max_nnz: usize, steps: usize) -> Result<SparseSym> {
    let opts = MrOptions {
        droptol,
        max_nnz,
        steps,
        fixed_beta: None,
    };
    Ok(mr_ainv_with(c, &opts)?.x)
}

pub fn mr_ainv_with(c: &SparseSym, opts: &MrOptions) -> Result<MrOutcome> {
    let n = c.n();
    if opts.max_nnz == 0 {
        return Err(Error::InvalidArgument("max_nnz must be at least 1".into()));
    }
    let diag = c.diagonal();
    if let Some(i) = diag.iter().position(|&v| v == 0.0) {
        return Err(Error::InvalidArgument(format!("zero diagonal at interface row {i}")));
    }
    let inv: Vec<f64> = diag.iter().map(|v| 1.0 / v).collect();
    let mut x = SparseSym::diag(&inv).into_csr();
    let cm = c.as_csr();
    let id = Csr::identity(n);

    let residual = |x: &Csr| -> Result<Csr> { id.add_scaled(1.0, &cm.matmul(x)?, -1.0) };

    let mut r = residual(&x)?;
    let mut norms = vec![r.frobenius_norm()];
    for _ in 0..opts.steps {
        let z = drop_small(&x.matmul(&r)?, opts.droptol, opts.max_nnz);
        let cz = cm.matmul(&z)?;
        let den = frob_inner(&cz, &cz);
        if den == 0.0 {
            break;
        }
        let beta = opts.fixed_beta.unwrap_or_else(|| frob_inner(&r, &cz) / den);
        x = x.add_scaled(1.0, &z, beta)?;
        x = x.add_scaled(0.5, &x.transpose(), 0.5)?;
        r = residual(&x)?;
        norms.push(r.frobenius_norm());
    }
    Ok(MrOutcome {
        x: SparseSym::from_csr_unchecked(x),
        residual_norms: norms,
    })
}

/// `sum_ij a_ij b_ij`.
fn frob_inner(a: &Csr, b: &Csr) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        let (ac, av) = a.row(i);
        let (bc, bv) = b.row(i);
        let (mut p, mut q) = (0, 0);
        while p < ac.len() && q < bc.len() {
            match ac[p].cmp(&bc[q]) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => {
                    s += av[p] * bv[q];
                    p += 1;
                    q += 1;
                }
            }
        }
    }
    s
}

/// Keeps the diagonal and the largest off-diagonal entries of each row (a
/// column, for the symmetric iterates) above `droptol` times the row norm, at
/// most `max_nnz` entries in total.
fn drop_small(z: &Csr, droptol: f64, max_nnz: usize) -> Csr {
    let rows = (0..z.nrows())
        .map(|i| {
            let (cols, vals) = z.row(i);
            let nrm = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut keep: Vec<(usize, f64)> = Vec::new();
            let mut off: Vec<(usize, f64)> = Vec::new();
            for (&j, &v) in cols.iter().zip(vals) {
                if j == i {
                    keep.push((j, v));
                } else if v.abs() >= droptol * nrm {
                    off.push((j, v));
                }
            }
            let room = max_nnz.saturating_sub(keep.len());
            if off.len() > room {
                if room > 0 {
                    off.select_nth_unstable_by(room - 1, |a, b| {
                        b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0))
                    });
                }
                off.truncate(room);
            }
            keep.extend(off);
            keep
        })
        .collect();
    Csr::from_rows(z.ncols(), rows)
}
