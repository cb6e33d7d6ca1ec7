//! Block-Jacobi preconditioned Chebyshev iteration for `C_alpha`.

use std::ops::Range;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::{axpy, dot, LinearOperator};
use crate::sparse::{ildl_reordered, tridiag_eig, IldlParams, SparseSym, TriFactor};

/// Block diagonal of `C_alpha`: one exactly factored block per subdomain.
#[derive(Debug, Clone)]
pub struct BlockJacobi {
    blocks: Vec<(Range<usize>, SparseSym, TriFactor)>,
    n: usize,
}

impl BlockJacobi {
    pub fn new(blocks: Vec<(Range<usize>, SparseSym)>) -> Result<Self> {
        let n = blocks.iter().map(|(r, _)| r.end).max().unwrap_or(0);
        let blocks = blocks
            .into_iter()
            .map(|(r, m)| {
                let f = ildl_reordered(&m, &IldlParams::exact())?;
                Ok((r, m, f))
            })
            .collect::<Result<_>>()?;
        Ok(Self { blocks, n })
    }

    /// `y = D x`.
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, m, _) in &self.blocks {
            m.spmv_into(&x[r.clone()], &mut y[r.clone()]);
        }
    }

    /// `y = D^-1 x`.
    pub fn solve_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, _, f) in &self.blocks {
            f.solve_into(&x[r.clone()], &mut y[r.clone()]);
        }
    }

    pub fn nnz(&self) -> usize {
        self.blocks.iter().map(|(_, _, f)| f.nnz()).sum()
    }
}

impl LinearOperator for BlockJacobi {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.solve_into(x, y)
    }
}

/// Spectral interval of `D^-1 C` and the number of Chebyshev steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChebParams {
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

/// Estimates the spectrum of the pencil `(c, d)` with `probe_steps` Lanczos
/// steps in the `d` inner product and widens it by the Ritz residuals.
pub fn cheb_setup(
    c: &SparseSym,
    d: &BlockJacobi,
    probe_steps: usize,
    iterations: usize,
) -> Result<ChebParams> {
    let n = c.n();
    if n == 0 {
        return Ok(ChebParams {
            lo: 1.0,
            hi: 1.0,
            iterations,
        });
    }
    let steps = probe_steps.clamp(1, n);

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let mut dq = vec![0.0; n];
    d.mul_into(&q, &mut dq);
    let nrm = dot(&q, &dq).sqrt();
    q.iter_mut().for_each(|v| *v /= nrm);
    dq.iter_mut().for_each(|v| *v /= nrm);

    // Basis kept together with D q for the reorthogonalization.
    let mut basis: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(steps);
    let mut alphas = Vec::with_capacity(steps);
    let mut betas: Vec<f64> = Vec::with_capacity(steps);
    let mut cq = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut last_beta = 0.0;
    for j in 0..steps {
        c.spmv_into(&q, &mut cq);
        d.solve_into(&cq, &mut w);
        let a = dot(&q, &cq);
        alphas.push(a);
        axpy(-a, &q, &mut w);
        if let Some((qp, _)) = basis.last() {
            axpy(-betas[j - 1], qp, &mut w);
        }
        basis.push((q.clone(), dq.clone()));
        for _ in 0..2 {
            for (qi, dqi) in &basis {
                let h = dot(&w, dqi);
                axpy(-h, qi, &mut w);
            }
        }
        let mut dw = vec![0.0; n];
        d.mul_into(&w, &mut dw);
        let b = dot(&w, &dw).max(0.0).sqrt();
        last_beta = b;
        if b <= 1e-12 * a.abs().max(1e-300) || j + 1 == steps {
            break;
        }
        betas.push(b);
        q = w.iter().map(|v| v / b).collect();
        dq = dw.iter().map(|v| v / b).collect();
    }

    let k = alphas.len();
    let (vals, vecs) = tridiag_eig(&alphas, &betas[..k - 1]);
    let resid = |i: usize| last_beta * vecs[(k - 1, i)].abs();
    let (lo_ritz, hi_ritz) = (vals[0], vals[k - 1]);
    let lo = (lo_ritz - resid(0)).max(lo_ritz / 2.0);
    let hi = hi_ritz + resid(k - 1);
    if !(lo > 0.0) || !hi.is_finite() {
        return Err(Error::IndefiniteInterface { lo, hi });
    }
    Ok(ChebParams { lo, hi, iterations })
}

/// Runs `params.iterations` Chebyshev steps on `c x = b` from `x = 0`.
pub fn cheb_solve(c: &SparseSym, d: &BlockJacobi, params: &ChebParams, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    if params.iterations == 0 {
        return x;
    }
    let theta = 0.5 * (params.hi + params.lo);
    let delta = 0.5 * (params.hi - params.lo);
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    d.solve_into(&r, &mut z);

    if delta <= 1e-12 * theta {
        // Single-point spectrum: Chebyshev reduces to Richardson.
        for it in 0..params.iterations {
            axpy(1.0 / theta, &z, &mut x);
            if it + 1 == params.iterations {
                break;
            }
            c.spmv_into(&z, &mut t);
            axpy(-1.0 / theta, &t, &mut r);
            d.solve_into(&r, &mut z);
        }
        return x;
    }

    let sigma = theta / delta;
    let mut rho = 1.0 / sigma;
    let mut dir: Vec<f64> = z.iter().map(|v| v / theta).collect();
    for it in 0..params.iterations {
        axpy(1.0, &dir, &mut x);
        if it + 1 == params.iterations {
            break;
        }
        c.spmv_into(&dir, &mut t);
        axpy(-1.0, &t, &mut r);
        d.solve_into(&r, &mut z);
        let rho_next = 1.0 / (2.0 * sigma - rho);
        let (c1, c2) = (rho_next * rho, 2.0 * rho_next / delta);
        for (di, zi) in dir.iter_mut().zip(&z) {
            *di = c1 * *di + c2 * zi;
        }
        rho = rho_next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::norm2;
    use crate::sparse::dense_eigs_sym;

    fn one_block(m: SparseSym) -> BlockJacobi {
        let n = m.n();
        BlockJacobi::new(vec![(0..n, m)]).unwrap()
    }

    fn diag_blocks(c: &SparseSym) -> BlockJacobi {
        let n = c.n();
        BlockJacobi::new(
            (0..n)
                .map(|i| (i..i + 1, SparseSym::diag(&[c.get(i, i)])))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn two_by_two_pencil() {
        let c = SparseSym::from_triangle(2, &[(0, 0, 3.0), (1, 0, -1.0), (1, 1, 3.0)]).unwrap();
        let p = cheb_setup(&c, &diag_blocks(&c), 10, 5).unwrap();
        assert!(p.lo <= 2.0 / 3.0 + 1e-12 && p.lo > 0.0);
        assert!(p.hi >= 4.0 / 3.0 - 1e-12);
        assert!(p.hi < 4.0 / 3.0 + 1e-8);
    }

    #[test]
    fn exact_preconditioner_is_one_step() {
        let c = SparseSym::tridiag(6, -1.0, 3.0);
        let d = one_block(c.clone());
        let p = cheb_setup(&c, &d, 10, 1).unwrap();
        assert!((p.lo - 1.0).abs() < 1e-10 && (p.hi - 1.0).abs() < 1e-10);
        let b = vec![1.0, 0.0, -2.0, 3.0, 0.5, 1.0];
        let x = cheb_solve(&c, &d, &p, &b);
        let r: Vec<f64> = c.spmv(&x).unwrap().iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm2(&r) < 1e-12);
    }

    #[test]
    fn interval_encloses_pencil_spectrum() {
        let c = SparseSym::tridiag(30, -1.0, 2.5);
        let d = diag_blocks(&c);
        let p = cheb_setup(&c, &d, 10, 5).unwrap();
        // Oracle: D^-1/2 C D^-1/2 with D = 2.5 I.
        let s = dense_eigs_sym(&c.to_dense(), false).unwrap().eigenvalues;
        let (lo, hi) = (s[0] / 2.5, s[29] / 2.5);
        assert!(p.lo <= lo * (1.0 + 1e-12));
        assert!(p.hi >= hi * 0.95);
    }

    #[test]
    fn error_contracts_with_iterations() {
        let c = SparseSym::tridiag(40, -1.0, 3.0);
        let d = diag_blocks(&c);
        let b: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let mut last = f64::INFINITY;
        for it in [1, 3, 6, 10] {
            let p = cheb_setup(&c, &d, 20, it).unwrap();
            let x = cheb_solve(&c, &d, &p, &b);
            let r: Vec<f64> = c.spmv(&x).unwrap().iter().zip(&b).map(|(p, q)| p - q).collect();
            let rel = norm2(&r) / norm2(&b);
            assert!(rel < last);
            last = rel;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn indefinite_interface_is_rejected() {
        let c = SparseSym::from_triangle(2, &[(0, 0, 1.0), (1, 0, 3.0), (1, 1, 1.0)]).unwrap();
        assert!(matches!(
            cheb_setup(&c, &diag_blocks(&c), 10, 5),
            Err(Error::IndefiniteInterface { .. })
        ));
    }
}
