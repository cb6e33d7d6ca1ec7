//! The block-decoupled operator `A0` of the splitting `A = A0 - E E^T`:
//!
//! ```text
//! A0 = | B + alpha^-2 Ê Ê^T                  |
//!      |                      C + alpha^2 I  |
//! ```
//!
//! `Ê Ê^T` has no inter-subdomain blocks, so the interior part is the set of
//! independent local matrices `B_{i,alpha} = B_i + alpha^-2 E_i E_i^T`. The
//! interface part `C_alpha` is global and is solved exactly, by a fixed number
//! of block-Jacobi preconditioned Chebyshev steps, or through an approximate
//! inverse built with self-preconditioned MR iterations.

mod ainv;
mod chebyshev;

pub use ainv::{mr_ainv, mr_ainv_with, MrOptions, MrOutcome};
pub use chebyshev::{cheb_setup, cheb_solve, BlockJacobi, ChebParams};

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linop::LinearOperator;
use crate::partition::{DistributedMatrix, Subdomain};
use crate::sparse::{ildl_reordered, IldlParams, SparseSym, TriFactor};

/// How the interface matrix `C_alpha` is solved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CSolveMode {
    /// Exact sparse LDL^T.
    Direct,
    /// Fixed-step Chebyshev preconditioned by the diagonal blocks `C_i`.
    Chebyshev { iterations: usize, probe_steps: usize },
    /// Sparse approximate inverse from self-preconditioned MR.
    ApproxInverse {
        droptol: f64,
        max_nnz: usize,
        steps: usize,
    },
}

impl CSolveMode {
    pub const DEFAULT_CHEBYSHEV: CSolveMode = CSolveMode::Chebyshev {
        iterations: 5,
        probe_steps: 10,
    };

    pub const DEFAULT_APPROX_INVERSE: CSolveMode = CSolveMode::ApproxInverse {
        droptol: 1e-3,
        max_nnz: 10,
        steps: 5,
    };
}

impl Default for CSolveMode {
    fn default() -> Self {
        Self::DEFAULT_APPROX_INVERSE
    }
}

/// Parameters of [`build_a0`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct A0Params {
    pub alpha: f64,
    pub local: IldlParams,
    pub c_mode: CSolveMode,
}

impl A0Params {
    /// Exact local factorizations and a direct interface solve.
    pub fn exact(alpha: f64) -> Self {
        Self {
            alpha,
            local: IldlParams::exact(),
            c_mode: CSolveMode::Direct,
        }
    }

    /// Whether every solve with `A0` is exact up to round-off.
    pub fn is_exact(&self) -> bool {
        self.local.is_exact() && self.c_mode == CSolveMode::Direct
    }
}

impl Default for A0Params {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            local: IldlParams {
                droptol: 1e-3,
                maxfill: usize::MAX,
            },
            c_mode: CSolveMode::default(),
        }
    }
}

/// Solver for `C_alpha`.
#[derive(Debug, Clone)]
pub enum CSolver {
    Direct(TriFactor),
    Chebyshev(ChebParams),
    ApproxInverse(SparseSym),
}

/// `A0` with its local factorizations and interface solver.
#[derive(Debug, Clone)]
pub struct A0Operator {
    dist: Arc<DistributedMatrix>,
    params: A0Params,
    local: Vec<TriFactor>,
    c_alpha: SparseSym,
    d_alpha: BlockJacobi,
    c_solver: CSolver,
}

/// `B_i + alpha^-2 E_i E_i^T` for one subdomain.
pub fn b_alpha(sd: &Subdomain, alpha: f64) -> SparseSym {
    let eet = sd
        .e
        .matmul(&sd.e.transpose())
        .expect("E_i E_i^T shapes agree");
    let eet = SparseSym::from_csr_unchecked(eet);
    sd.b
        .add_scaled(1.0, &eet, alpha.powi(-2))
        .expect("same order")
}

/// Factors every `B_{i,alpha}`, assembles `C_alpha = C + alpha^2 I` and
/// initializes the chosen interface solver.
pub fn build_a0(dist: Arc<DistributedMatrix>, params: &A0Params) -> Result<A0Operator> {
    let alpha = params.alpha;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }

    let local: Vec<TriFactor> = dist
        .subdomains()
        .par_iter()
        .enumerate()
        .map(|(id, sd)| {
            ildl_reordered(&b_alpha(sd, alpha), &params.local).map_err(|e| Error::Subdomain {
                id,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let c_alpha = dist.c().shifted(alpha * alpha);
    let d_alpha = BlockJacobi::new(
        dist.subdomains()
            .iter()
            .map(|sd| (sd.y_range.clone(), sd.c.shifted(alpha * alpha)))
            .collect(),
    )?;

    let c_solver = match params.c_mode {
        CSolveMode::Direct => CSolver::Direct(ildl_reordered(&c_alpha, &IldlParams::exact())?),
        CSolveMode::Chebyshev {
            iterations,
            probe_steps,
        } => CSolver::Chebyshev(cheb_setup(&c_alpha, &d_alpha, probe_steps, iterations)?),
        CSolveMode::ApproxInverse {
            droptol,
            max_nnz,
            steps,
        } => CSolver::ApproxInverse(mr_ainv(&c_alpha, droptol, max_nnz, steps)?),
    };

    Ok(A0Operator {
        dist,
        params: *params,
        local,
        c_alpha,
        d_alpha,
        c_solver,
    })
}

impl A0Operator {
    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    pub fn params(&self) -> &A0Params {
        &self.params
    }

    pub fn dist(&self) -> &Arc<DistributedMatrix> {
        &self.dist
    }

    pub fn local_factors(&self) -> &[TriFactor] {
        &self.local
    }

    pub fn c_alpha(&self) -> &SparseSym {
        &self.c_alpha
    }

    pub fn d_alpha(&self) -> &BlockJacobi {
        &self.d_alpha
    }

    pub fn c_solver(&self) -> &CSolver {
        &self.c_solver
    }

    pub fn n(&self) -> usize {
        self.dist.n()
    }

    /// Solves `A0 x = rhs` with `rhs` in `(u, y)` ordering.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), rhs.len())?;
        let mut x = vec![0.0; self.n()];
        self.solve_into(rhs, &mut x);
        Ok(x)
    }

    pub fn solve_into(&self, rhs: &[f64], x: &mut [f64]) {
        let m = self.dist.m();
        let (xu, xy) = x.split_at_mut(m);
        let (ru, ry) = rhs.split_at(m);

        let parts: Vec<Vec<f64>> = self
            .dist
            .subdomains()
            .par_iter()
            .zip(&self.local)
            .map(|(sd, f)| {
                let mut out = vec![0.0; sd.d()];
                f.solve_into(&ru[sd.u_range.clone()], &mut out);
                out
            })
            .collect();
        for (sd, part) in self.dist.subdomains().iter().zip(parts) {
            xu[sd.u_range.clone()].copy_from_slice(&part);
        }

        self.solve_c_into(ry, xy);
    }

    /// Applies the interface solver to `b` (length `s`).
    pub fn solve_c_into(&self, b: &[f64], x: &mut [f64]) {
        if b.is_empty() {
            return;
        }
        match &self.c_solver {
            CSolver::Direct(f) => f.solve_into(b, x),
            CSolver::Chebyshev(p) => {
                let y = cheb_solve(&self.c_alpha, &self.d_alpha, p, b);
                x.copy_from_slice(&y);
            }
            CSolver::ApproxInverse(xinv) => xinv.spmv_into(b, x),
        }
    }

    /// Stored entries across local factors and the interface solver.
    pub fn nnz(&self) -> usize {
        let local: usize = self.local.iter().map(TriFactor::nnz).sum();
        let c = match &self.c_solver {
            CSolver::Direct(f) => f.nnz(),
            CSolver::Chebyshev(_) => self.c_alpha.nnz() + self.d_alpha.nnz(),
            CSolver::ApproxInverse(x) => x.nnz(),
        };
        local + c
    }
}

impl LinearOperator for A0Operator {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.solve_into(x, y)
    }
}

/// Assembles `A0` explicitly in `(u, y)` ordering.
pub fn assemble_a0(dist: &DistributedMatrix, alpha: f64) -> SparseSym {
    let n = dist.n();
    let m = dist.m();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for sd in dist.subdomains() {
        let ba = b_alpha(sd, alpha);
        let u0 = sd.u_range.start;
        for r in 0..sd.d() {
            let (cols, vals) = ba.row(r);
            rows[u0 + r].extend(cols.iter().zip(vals).map(|(&c, &v)| (u0 + c, v)));
        }
    }
    let ca = dist.c().shifted(alpha * alpha);
    for r in 0..dist.s() {
        let (cols, vals) = ca.row(r);
        rows[m + r].extend(cols.iter().zip(vals).map(|(&c, &v)| (m + c, v)));
    }
    SparseSym::from_csr_unchecked(crate::sparse::Csr::from_rows(n, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::gen_laplacian;
    use crate::linop::{dot, norm2};
    use crate::partition::{build_distributed, partition_graph, Partition};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn path4() -> Arc<DistributedMatrix> {
        let a = SparseSym::tridiag(4, -1.0, 2.0);
        let part = Partition::from_assignment(2, vec![0, 0, 1, 1]).unwrap();
        Arc::new(build_distributed(&a, &part).unwrap())
    }

    #[test]
    fn identity_matrix_gives_identity_solve() {
        let a = SparseSym::identity(6);
        let part = partition_graph(&a, 3, 0).unwrap();
        let d = Arc::new(build_distributed(&a, &part).unwrap());
        let op = build_a0(d, &A0Params::exact(1.7)).unwrap();
        assert_eq!(op.c_alpha().n(), 0);
        let rhs = vec![1.0, -2.0, 3.0, 0.5, 4.0, 1.0];
        assert_eq!(op.solve(&rhs).unwrap(), rhs);
    }

    #[test]
    fn path_blocks_by_hand() {
        let d = path4();
        assert_eq!(b_alpha(&d.subdomains()[0], 1.0).to_dense().data(), &[3.0]);
        let op = build_a0(d, &A0Params::exact(1.0)).unwrap();
        assert_eq!(op.c_alpha().to_dense().data(), &[3.0, -1.0, -1.0, 3.0]);
        let x = op.solve(&[3.0, 3.0, 2.0, 2.0]).unwrap();
        for (g, w) in x.iter().zip([1.0, 1.0, 1.0, 1.0]) {
            assert!((g - w).abs() < 1e-14);
        }
    }

    #[test]
    fn b_alpha_correction_is_exact_product() {
        let a = gen_laplacian(&[12, 9], 0.0).unwrap();
        let part = partition_graph(&a, 3, 1).unwrap();
        let d = build_distributed(&a, &part).unwrap();
        for alpha in [0.5, 1.0, 2.0] {
            for sd in d.subdomains() {
                let got = b_alpha(sd, alpha).add_scaled(1.0, &sd.b, -1.0).unwrap().to_dense();
                // Oracle: dense E_i E_i^T from explicit column dot products.
                let e = sd.e.to_dense();
                for i in 0..sd.d() {
                    for j in 0..sd.d() {
                        let want: f64 = (0..sd.s()).map(|k| e[(i, k)] * e[(j, k)]).sum();
                        assert!((got[(i, j)] - want / (alpha * alpha)).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn exact_solve_residual_and_symmetry() {
        let a = gen_laplacian(&[15, 13], 0.0).unwrap();
        let part = partition_graph(&a, 4, 0).unwrap();
        let d = Arc::new(build_distributed(&a, &part).unwrap());
        let op = build_a0(d.clone(), &A0Params::exact(1.0)).unwrap();
        let a0 = assemble_a0(&d, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r1: Vec<f64> = (0..a.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r2: Vec<f64> = (0..a.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x1 = op.solve(&r1).unwrap();
        let res: Vec<f64> = a0.spmv(&x1).unwrap().iter().zip(&r1).map(|(p, q)| p - q).collect();
        assert!(norm2(&res) / norm2(&r1) < 1e-10);
        let x2 = op.solve(&r2).unwrap();
        let (l, r) = (dot(&r1, &x2), dot(&r2, &x1));
        assert!((l - r).abs() < 1e-12 * l.abs().max(1.0));
    }

    #[test]
    fn inexact_interface_solvers_are_accurate_enough() {
        let a = gen_laplacian(&[20, 20], 0.0).unwrap();
        let part = partition_graph(&a, 4, 0).unwrap();
        let d = Arc::new(build_distributed(&a, &part).unwrap());
        let b: Vec<f64> = (0..d.s()).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let exact = build_a0(d.clone(), &A0Params::exact(1.0)).unwrap();
        let mut want = vec![0.0; d.s()];
        exact.solve_c_into(&b, &mut want);
        for mode in [CSolveMode::DEFAULT_CHEBYSHEV, CSolveMode::DEFAULT_APPROX_INVERSE] {
            let op = build_a0(
                d.clone(),
                &A0Params {
                    c_mode: mode,
                    ..A0Params::exact(1.0)
                },
            )
            .unwrap();
            let mut got = vec![0.0; d.s()];
            op.solve_c_into(&b, &mut got);
            let err: Vec<f64> = got.iter().zip(&want).map(|(p, q)| p - q).collect();
            assert!(norm2(&err) / norm2(&want) < 0.05, "{mode:?}");
        }
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(build_a0(path4(), &A0Params::exact(0.0)).is_err());
        assert!(build_a0(path4(), &A0Params::exact(-1.0)).is_err());
    }
}
