//! Symmetric Lanczos with full reorthogonalization for the leading
//! eigenpairs of an operator.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::{axpy, dot, norm2, LinearOperator};
use crate::sparse::tridiag_eig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanczosParams {
    /// Relative change of the top-k Ritz sum that counts as converged. Zero
    /// disables every early exit, including the one on breakdown.
    pub eps: f64,
    pub check_every: usize,
    /// Step cap; `None` means five times the number of wanted pairs.
    pub max_steps: Option<usize>,
    /// Seed of the random start vector.
    pub seed: u64,
}

impl Default for LanczosParams {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            check_every: 10,
            max_steps: None,
            seed: 0,
        }
    }
}

impl LanczosParams {
    /// Runs to the full dimension with no early exit, so the Ritz pairs are
    /// exact up to round-off.
    pub fn exhaustive(seed: u64) -> Self {
        Self {
            eps: 0.0,
            check_every: 10,
            max_steps: Some(usize::MAX),
            seed,
        }
    }
}

/// Leading Ritz pairs, largest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenBundle {
    pub vectors: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub lambda_next: f64,
    pub steps_used: usize,
    pub converged: bool,
    /// `beta_m |s_{m,i}|` for each returned pair.
    pub residual_bounds: Vec<f64>,
    /// Largest Ritz value at each convergence check.
    pub top_ritz_history: Vec<f64>,
}

impl EigenBundle {
    pub fn k(&self) -> usize {
        self.values.len()
    }

    fn empty(dim_zero_fallback: f64) -> Self {
        Self {
            vectors: Vec::new(),
            values: Vec::new(),
            lambda_next: dim_zero_fallback,
            steps_used: 0,
            converged: true,
            residual_bounds: Vec::new(),
            top_ritz_history: Vec::new(),
        }
    }
}

/// `|sigma_m - sigma_prev| / sigma_prev < eps`; false when `sigma_prev` is 0.
pub fn converge_check(sigma_prev: f64, sigma: f64, eps: f64) -> bool {
    if sigma_prev == 0.0 {
        return false;
    }
    ((sigma - sigma_prev) / sigma_prev).abs() < eps
}

/// Top `k` eigenpairs of a symmetric operator.
pub fn lanczos_topk(op: &dyn LinearOperator, k: usize, params: &LanczosParams) -> Result<EigenBundle> {
    lanczos_topk_deflated(op, k, params, &[])
}

/// Like [`lanczos_topk`], but on the complement of the orthonormal vectors in
/// `locked`, which the basis is kept orthogonal to.
pub fn lanczos_topk_deflated(
    op: &dyn LinearOperator,
    k: usize,
    params: &LanczosParams,
    locked: &[Vec<f64>],
) -> Result<EigenBundle> {
    let n = op.dim();
    let room = n.saturating_sub(locked.len());
    if k > room {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs of an operator with {room} free dimensions"
        )));
    }
    if k == 0 || room == 0 {
        return Ok(EigenBundle::empty(0.0));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    symmetry_guard(op, &mut rng)?;

    let cap = params.max_steps.unwrap_or(5 * k).max(k).min(room);
    let check_every = params.check_every.max(1);

    let mut start = random_vec(&mut rng, n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cap);
    if !orthonormalize(&mut start, locked, &basis) {
        start = random_vec(&mut rng, n);
        if !orthonormalize(&mut start, locked, &basis) {
            return Ok(EigenBundle::empty(0.0));
        }
    }

    let mut alphas: Vec<f64> = Vec::with_capacity(cap);
    let mut betas: Vec<f64> = Vec::with_capacity(cap);
    let mut q = start;
    let mut w = vec![0.0; n];
    let mut scale = 0.0f64;
    let mut last_beta;
    let mut converged = false;
    let mut history = Vec::new();

    loop {
        op.apply(&q, &mut w);
        let a = dot(&w, &q);
        axpy(-a, &q, &mut w);
        if let (Some(prev), Some(&b)) = (basis.last(), betas.last()) {
            axpy(-b, prev, &mut w);
        }
        basis.push(q);
        alphas.push(a);
        for _ in 0..2 {
            for v in locked.iter().chain(&basis) {
                let h = dot(&w, v);
                axpy(-h, v, &mut w);
            }
        }
        let b = norm2(&w);
        last_beta = b;
        scale = scale.max(a.abs() + b);
        let m = basis.len();

        if m >= k && (m % check_every == 0 || m == cap) {
            let sigma = topk_sum(&alphas, &betas, k);
            history.push(tridiag_eig(&alphas, &betas).0[m - 1]);
            if m > k && converge_check(topk_sum(&alphas[..m - 1], &betas[..m - 2], k), sigma, params.eps)
            {
                converged = true;
                break;
            }
        }
        if m == cap {
            converged |= m == room;
            break;
        }

        if b <= 1e-10 * scale {
            // With eps = 0 the caller wants the whole space, so a breakdown
            // only triggers a restart.
            if m >= k && params.eps > 0.0 {
                // Invariant subspace: the Ritz pairs are exact.
                last_beta = 0.0;
                converged = true;
                break;
            }
            // Fewer pairs than requested: continue in the orthogonal
            // complement with a fresh vector and a zero coupling.
            let mut fresh = random_vec(&mut rng, n);
            if !orthonormalize(&mut fresh, locked, &basis) {
                break;
            }
            betas.push(0.0);
            q = fresh;
        } else {
            betas.push(b);
            q = w.iter().map(|v| v / b).collect();
        }
    }

    let m = basis.len();
    let (vals, vecs) = tridiag_eig(&alphas, &betas[..m - 1]);
    let kk = k.min(m);
    let mut values = Vec::with_capacity(kk);
    let mut vectors = Vec::with_capacity(kk);
    let mut residual_bounds = Vec::with_capacity(kk);
    for idx in (m - kk..m).rev() {
        let mut u = vec![0.0; n];
        for (j, qj) in basis.iter().enumerate() {
            axpy(vecs[(j, idx)], qj, &mut u);
        }
        let nu = norm2(&u);
        u.iter_mut().for_each(|v| *v /= nu);
        values.push(vals[idx]);
        vectors.push(u);
        residual_bounds.push(last_beta * vecs[(m - 1, idx)].abs());
    }
    let lambda_next = if m > kk { vals[m - kk - 1] } else { values[kk - 1] };

    Ok(EigenBundle {
        vectors,
        values,
        lambda_next,
        steps_used: m,
        converged,
        residual_bounds,
        top_ritz_history: history,
    })
}

fn topk_sum(alphas: &[f64], betas: &[f64], k: usize) -> f64 {
    let (vals, _) = tridiag_eig(alphas, betas);
    vals.iter().rev().take(k).sum()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Projects `x` off `locked` and `basis` and normalizes it. False if nothing
/// is left.
fn orthonormalize(x: &mut [f64], locked: &[Vec<f64>], basis: &[Vec<f64>]) -> bool {
    let before = norm2(x);
    for _ in 0..2 {
        for v in locked.iter().chain(basis) {
            let h = dot(x, v);
            axpy(-h, v, x);
        }
    }
    let nx = norm2(x);
    if nx <= 1e-10 * before || nx == 0.0 {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= nx);
    true
}

/// Rejects operators whose symmetry defect on two random probes is large
/// relative to `||x|| ||y||` times the estimated operator norm.
fn symmetry_guard(op: &dyn LinearOperator, rng: &mut ChaCha8Rng) -> Result<()> {
    let n = op.dim();
    let x = random_vec(rng, n);
    let y = random_vec(rng, n);
    let ox = op.apply_vec(&x);
    let oy = op.apply_vec(&y);
    let (nx, ny) = (norm2(&x), norm2(&y));
    let opnorm = (norm2(&ox) / nx).max(norm2(&oy) / ny);
    let defect = (dot(&x, &oy) - dot(&y, &ox)).abs();
    if defect > 1e-6 * nx * ny * opnorm.max(f64::MIN_POSITIVE) {
        return Err(Error::NonsymmetricOperator {
            defect: defect / (nx * ny * opnorm),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::gen_laplacian;
    use crate::linop::{FnOperator, Identity};
    use crate::sparse::{dense_eigs_sym, SparseSym};

    fn ortho_defect(v: &[Vec<f64>]) -> f64 {
        let mut s = 0.0;
        for i in 0..v.len() {
            for j in 0..v.len() {
                let d = dot(&v[i], &v[j]) - if i == j { 1.0 } else { 0.0 };
                s += d * d;
            }
        }
        s.sqrt()
    }

    #[test]
    fn converge_check_cases() {
        assert!(converge_check(1.0, 1.00005, 1e-4));
        assert!(!converge_check(1.0, 1.01, 1e-4));
        assert!(converge_check(2.0, 2.0, 1e-30));
        assert!(!converge_check(0.0, 1.0, 1.0));
    }

    #[test]
    fn diagonal_top_two() {
        let a = SparseSym::diag(&[5.0, 4.0, 3.0, 2.0, 1.0]);
        let e = lanczos_topk(&a, 2, &LanczosParams::default()).unwrap();
        assert!((e.values[0] - 5.0).abs() < 1e-8);
        assert!((e.values[1] - 4.0).abs() < 1e-8);
        assert!((e.lambda_next - 3.0).abs() < 1e-6);
        assert!(e.lambda_next <= e.values[1] + 1e-8);
    }

    #[test]
    fn identity_breaks_down_immediately() {
        let e = lanczos_topk(&Identity(7), 1, &LanczosParams::default()).unwrap();
        assert_eq!(e.steps_used, 1);
        assert!(e.converged);
        assert!((e.values[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_full_rank_restarts_after_breakdown() {
        let e = lanczos_topk(&Identity(4), 4, &LanczosParams::exhaustive(0)).unwrap();
        assert_eq!(e.k(), 4);
        assert!(e.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(ortho_defect(&e.vectors) < 1e-10);
    }

    #[test]
    fn laplacian_matches_dense_oracle() {
        let a = gen_laplacian(&[12, 10], 0.0).unwrap();
        let dense = dense_eigs_sym(&a.to_dense(), false).unwrap().eigenvalues;
        let e = lanczos_topk(
            &a,
            4,
            &LanczosParams {
                eps: 1e-12,
                max_steps: Some(80),
                seed: 7,
                ..LanczosParams::default()
            },
        )
        .unwrap();
        let nd = dense.len();
        for i in 0..4 {
            assert!((e.values[i] - dense[nd - 1 - i]).abs() < 1e-8);
            let au = a.apply_vec(&e.vectors[i]);
            let r: Vec<f64> = au.iter().zip(&e.vectors[i]).map(|(p, q)| p - e.values[i] * q).collect();
            assert!(norm2(&r) <= e.residual_bounds[i] + 1e-6);
        }
        assert!(ortho_defect(&e.vectors) < 1e-8);
        for w in e.top_ritz_history.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn same_seed_same_bits() {
        let a = gen_laplacian(&[9, 9], 0.0).unwrap();
        let p = LanczosParams {
            seed: 42,
            ..LanczosParams::default()
        };
        let e1 = lanczos_topk(&a, 3, &p).unwrap();
        let e2 = lanczos_topk(&a, 3, &p).unwrap();
        assert_eq!(e1, e2);
    }

    #[test]
    fn deflation_finds_next_pairs() {
        let a = SparseSym::diag(&[6.0, 5.0, 4.0, 3.0, 2.0, 1.0]);
        let first = lanczos_topk(&a, 2, &LanczosParams::exhaustive(0)).unwrap();
        let more = lanczos_topk_deflated(&a, 2, &LanczosParams::exhaustive(0), &first.vectors).unwrap();
        assert!((more.values[0] - 4.0).abs() < 1e-10);
        assert!((more.values[1] - 3.0).abs() < 1e-10);
        assert!((more.lambda_next - 2.0).abs() < 1e-10);
    }

    #[test]
    fn nonsymmetric_operator_rejected() {
        let op = FnOperator::new(3, |x: &[f64], y: &mut [f64]| {
            y[0] = x[1];
            y[1] = 0.0;
            y[2] = x[2];
        });
        assert!(matches!(
            lanczos_topk(&op, 1, &LanczosParams::default()),
            Err(Error::NonsymmetricOperator { .. })
        ));
    }

    #[test]
    fn too_many_pairs() {
        assert!(lanczos_topk(&Identity(3), 4, &LanczosParams::default()).is_err());
    }
}
