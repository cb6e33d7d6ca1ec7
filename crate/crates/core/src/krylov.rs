//! Preconditioned CG and right-preconditioned restarted GMRES.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::harness::MappingCostReport;
use crate::linop::{axpy, dot, norm2, LinearOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrylovParams {
    /// Relative residual reduction `||r_j|| / ||r_0||` to stop at.
    pub tol: f64,
    pub maxit: usize,
    /// GMRES restart length.
    pub restart: usize,
}

impl Default for KrylovParams {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            maxit: 500,
            restart: 40,
        }
    }
}

/// Outcome of one preconditioned solve. Times are in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    /// Relative residual norms, starting with `1` for the initial guess.
    pub residual_history: Vec<f64>,
    pub build_time: f64,
    pub apply_time: f64,
    pub fill_ratio: f64,
    pub comm_tallies: Option<MappingCostReport>,
}

impl SolveReport {
    fn new(iterations: usize, tol: f64, residual_history: Vec<f64>, apply_time: f64) -> Self {
        let last = *residual_history.last().expect("history is never empty");
        Self {
            iterations,
            converged: last < tol,
            residual_history,
            build_time: 0.0,
            apply_time,
            fill_ratio: 0.0,
            comm_tallies: None,
        }
    }

    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&f64::NAN)
    }
}

fn check_dims(a: &dyn LinearOperator, m: &dyn LinearOperator, b: &[f64]) -> Result<()> {
    check_len(a.dim(), b.len())?;
    check_len(a.dim(), m.dim())
}

/// Preconditioned conjugate gradient from a zero initial guess.
pub fn pcg(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[f64],
    params: &KrylovParams,
) -> Result<(Vec<f64>, SolveReport)> {
    check_dims(a, m, b)?;
    let start = Instant::now();
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((x, SolveReport::new(0, params.tol, vec![0.0], 0.0)));
    }

    let mut r = b.to_vec();
    let mut z = m.apply_vec(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let mut history = vec![1.0];
    let mut its = 0;
    while its < params.maxit {
        a.apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::NotSpd(pq));
        }
        let step = rz / pq;
        axpy(step, &p, &mut x);
        axpy(-step, &q, &mut r);
        its += 1;
        let rel = norm2(&r) / bnorm;
        history.push(rel);
        if rel < params.tol {
            break;
        }
        m.apply(&r, &mut z);
        let rz_next = dot(&r, &z);
        if !(rz_next > 0.0) {
            return Err(Error::NotSpd(rz_next));
        }
        let beta = rz_next / rz;
        rz = rz_next;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    let t = start.elapsed().as_secs_f64();
    Ok((x, SolveReport::new(its, params.tol, history, t)))
}

/// Restarted GMRES with right preconditioning, so the monitored residual is
/// that of the original system.
pub fn gmres(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[f64],
    params: &KrylovParams,
) -> Result<(Vec<f64>, SolveReport)> {
    check_dims(a, m, b)?;
    if params.restart == 0 {
        return Err(Error::InvalidArgument("GMRES restart must be positive".into()));
    }
    let start = Instant::now();
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((x, SolveReport::new(0, params.tol, vec![0.0], 0.0)));
    }

    let restart = params.restart.min(n.max(1));
    let mut history = vec![1.0];
    let mut its = 0;
    let mut w = vec![0.0; n];
    'outer: while its < params.maxit {
        let mut r = b.to_vec();
        if its > 0 {
            let ax = a.apply_vec(&x);
            axpy(-1.0, &ax, &mut r);
        }
        let beta = norm2(&r);
        if beta / bnorm < params.tol {
            break;
        }

        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(restart);
        // Column j of the Hessenberg matrix after the Givens rotations.
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(restart);
        let mut cs: Vec<(f64, f64)> = Vec::with_capacity(restart);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;

        let mut done = false;
        for j in 0..restart {
            let z = m.apply_vec(&v[j]);
            a.apply(&z, &mut w);
            zs.push(z);

            let mut col = vec![0.0; j + 2];
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let hij = dot(&w, vi);
                    col[i] += hij;
                    axpy(-hij, vi, &mut w);
                }
            }
            let hn = norm2(&w);
            col[j + 1] = hn;

            for (i, &(c, s)) in cs.iter().enumerate() {
                let (p, q) = (col[i], col[i + 1]);
                col[i] = c * p + s * q;
                col[i + 1] = -s * p + c * q;
            }
            let rr = col[j].hypot(col[j + 1]);
            let (c, s) = if rr == 0.0 { (1.0, 0.0) } else { (col[j] / rr, col[j + 1] / rr) };
            col[j] = rr;
            col[j + 1] = 0.0;
            cs.push((c, s));
            g[j + 1] = -s * g[j];
            g[j] *= c;
            h.push(col);

            its += 1;
            let rel = g[j + 1].abs() / bnorm;
            history.push(rel);
            let breakdown = hn <= 1e-14 * beta;
            if rel < params.tol || breakdown || its >= params.maxit {
                done = true;
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }

        // Back substitution on the triangular factor.
        let kk = h.len();
        let mut y = g[..kk].to_vec();
        for i in (0..kk).rev() {
            for jj in i + 1..kk {
                y[i] -= h[jj][i] * y[jj];
            }
            y[i] = if h[i][i] != 0.0 { y[i] / h[i][i] } else { 0.0 };
        }
        for (yi, zi) in y.iter().zip(&zs) {
            axpy(*yi, zi, &mut x);
        }
        if done {
            break 'outer;
        }
    }
    let t = start.elapsed().as_secs_f64();
    Ok((x, SolveReport::new(its, params.tol, history, t)))
}
