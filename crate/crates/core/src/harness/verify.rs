//! Dense spectral checks of the DDLR bounds on small problems.
//!
//! `M^-1` is assembled column by column from canonical vectors. With the
//! Cholesky factor `A = L L^T`, the matrix `L^T M^-1 L` is symmetric and
//! similar to `A M^-1`, so its eigenvalues are those of the preconditioned
//! operator.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::experiment::{ExperimentConfig, PrecondKind};
use crate::a0solve::{build_a0, A0Params};
use crate::ddlr::{build_ddlr1, build_ddlr2, dense_h, EOperator, ThetaMode};
use crate::error::{Error, Result};
use crate::lanczos::{lanczos_topk, LanczosParams};
use crate::linop::LinearOperator;
use crate::partition::{build_distributed, partition_graph};
use crate::sparse::{dense_eigs_sym, DenseMat};

/// Largest order accepted by [`verify_spectrum`].
pub const VERIFY_CAP: usize = 2000;

/// Eigenvalues within this distance of one count as one.
pub const UNIT_CLUSTER: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Claim {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            pass,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub precond: PrecondKind,
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub k: usize,
    pub alpha: f64,
    pub theta: Option<f64>,
    /// Eigenvalues of `H = E^T A0^-1 E`, ascending.
    pub h_eigenvalues: Vec<f64>,
    /// Lanczos Ritz values of the operator the preconditioner was built from.
    pub ritz_values: Vec<f64>,
    /// `max(lambda - lambda^2)` over the spectrum of `H`.
    pub rho: f64,
    /// Upper bound `1 + rho / (1 - theta)` (DDLR-1 with `theta > 0`).
    pub bound: Option<f64>,
    /// Eigenvalues of `A M^-1`, ascending.
    pub eigenvalues: Vec<f64>,
    pub unit_count: usize,
    pub claims: Vec<Claim>,
}

impl SpectrumReport {
    pub fn all_pass(&self) -> bool {
        self.claims.iter().all(|c| c.pass)
    }

    pub fn claim(&self, name: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.name == name)
    }

    pub fn eta_min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    pub fn eta_max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(f64::NAN)
    }
}

/// Dense matrix of an operator, one application per column.
pub fn dense_operator(op: &dyn LinearOperator) -> DenseMat {
    let n = op.dim();
    let mut out = DenseMat::zeros(n, n);
    let mut unit = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        unit[j] = 1.0;
        op.apply(&unit, &mut col);
        unit[j] = 0.0;
        for i in 0..n {
            out[(i, j)] = col[i];
        }
    }
    out
}

/// Builds the configured DDLR preconditioner with exact `A0` solves and a
/// Lanczos run over the whole interface space, then checks the spectral
/// claims for that variant.
pub fn verify_spectrum(cfg: &ExperimentConfig) -> Result<SpectrumReport> {
    if !cfg.precond.is_ddlr() {
        return Err(Error::InvalidArgument(
            "spectrum verification covers DDLR preconditioners only".into(),
        ));
    }
    let a = cfg.problem.load()?;
    let n = a.n();
    if n > VERIFY_CAP {
        return Err(Error::TooLarge { n, cap: VERIFY_CAP });
    }
    let part = partition_graph(&a, cfg.p, cfg.seed)?;
    let dist = Arc::new(build_distributed(&a, &part)?);
    let (m, s) = (dist.m(), dist.s());
    let a0 = Arc::new(build_a0(dist.clone(), &A0Params::exact(cfg.alpha))?);
    let e = EOperator::new(dist.clone(), cfg.alpha);
    let lp = LanczosParams::exhaustive(cfg.seed);
    let k = cfg.rank.min(s);

    let h = dense_h(&a0, &e);
    let h_eigenvalues = dense_eigs_sym(&h, false)?.eigenvalues;
    let rho = h_eigenvalues
        .iter()
        .map(|l| l - l * l)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);

    let mut claims = Vec::new();
    let h_max = h_eigenvalues.last().copied().unwrap_or(0.0);
    let h_min = h_eigenvalues.first().copied().unwrap_or(0.0);
    claims.push(Claim::new(
        "h_spectrum_in_unit_interval",
        s == 0 || (h_min >= -1e-12 && h_max <= 1.0 - 1e-10),
        format!("eig(H) in [{h_min:.6e}, {h_max:.12}]"),
    ));
    claims.push(Claim::new(
        "rho_at_most_quarter",
        rho <= 0.25 + 1e-12,
        format!("rho = {rho:.12}"),
    ));

    let (op, theta, ritz): (Box<dyn LinearOperator>, Option<f64>, Vec<f64>) = match cfg.precond {
        PrecondKind::Ddlr1 => {
            let p = build_ddlr1(a0.clone(), k, &lp, cfg.theta)?;
            let ritz = p.ritz_values().to_vec();
            // Lanczos on H over the full space must reproduce the top of the
            // dense spectrum.
            let dev = ritz
                .iter()
                .zip(h_eigenvalues.iter().rev())
                .map(|(r, d)| (r - d).abs())
                .fold(0.0, f64::max);
            claims.push(Claim::new(
                "ritz_match_dense",
                dev <= 1e-6,
                format!("max |ritz - dense| = {dev:.3e}"),
            ));
            claims.push(Claim::new(
                "ritz_in_unit_interval",
                ritz.iter().all(|&r| (0.0..1.0).contains(&r)),
                format!("ritz = {ritz:?}"),
            ));
            let theta = p.theta();
            (Box::new(p), Some(theta), ritz)
        }
        _ => {
            let p = build_ddlr2(a0.clone(), k, &lp)?;
            let ritz = p.ritz_values().to_vec();
            // Cross-check against a separate Lanczos run on H.
            if k > 0 {
                let h_op = HDense(&h);
                let top = lanczos_topk(&h_op, k, &lp)?;
                let dev = top
                    .values
                    .iter()
                    .zip(h_eigenvalues.iter().rev())
                    .map(|(r, d)| (r - d).abs())
                    .fold(0.0, f64::max);
                claims.push(Claim::new(
                    "ritz_match_dense",
                    dev <= 1e-6,
                    format!("max |ritz - dense| = {dev:.3e}"),
                ));
            }
            (Box::new(p), None, ritz)
        }
    };

    let minv = dense_operator(op.as_ref());
    let l = dist.permuted().to_dense().cholesky()?;
    let mut sym = l.transpose().matmul(&minv).matmul(&l);
    sym.symmetrize();
    let eigenvalues = dense_eigs_sym(&sym, false)?.eigenvalues;
    let unit_count = eigenvalues
        .iter()
        .filter(|&&v| (v - 1.0).abs() <= UNIT_CLUSTER)
        .count();
    let (lo, hi) = (eigenvalues[0], eigenvalues[n - 1]);

    let mut bound = None;
    match (cfg.precond, cfg.theta) {
        (PrecondKind::Ddlr1, ThetaMode::Zero) => {
            let rest_ok = eigenvalues
                .iter()
                .filter(|&&v| (v - 1.0).abs() > UNIT_CLUSTER)
                .all(|&v| v > 0.0 && v < 1.0);
            claims.push(Claim::new(
                "unit_multiplicity_m_plus_k",
                unit_count == m + k,
                format!("{unit_count} unit eigenvalues, m + k = {}", m + k),
            ));
            claims.push(Claim::new(
                "others_in_open_unit_interval",
                rest_ok,
                format!("eta in [{lo:.6e}, {hi:.12}]"),
            ));
        }
        (PrecondKind::Ddlr1, _) => {
            let th = theta.unwrap_or(0.0);
            let b = 1.0 + rho / (1.0 - th);
            bound = Some(b);
            claims.push(Claim::new(
                "eta_lower_bound",
                lo >= 1.0 - 1e-8,
                format!("min eta = {lo:.12}"),
            ));
            claims.push(Claim::new(
                "eta_upper_bound",
                hi <= b + 1e-6,
                format!("max eta = {hi:.6}, bound = {b:.6}"),
            ));
        }
        _ => {
            claims.push(Claim::new(
                "eta_in_unit_interval",
                lo > 1e-12 && hi <= 1.0 + 1e-8,
                format!("eta in [{lo:.6e}, {hi:.12}]"),
            ));
            claims.push(Claim::new(
                "unit_multiplicity_at_least",
                unit_count + s >= n + k,
                format!("{unit_count} unit eigenvalues, n - s + k = {}", n + k - s),
            ));
        }
    }

    Ok(SpectrumReport {
        precond: cfg.precond,
        n,
        m,
        s,
        k,
        alpha: cfg.alpha,
        theta,
        h_eigenvalues,
        ritz_values: ritz,
        rho,
        bound,
        eigenvalues,
        unit_count,
        claims,
    })
}

struct HDense<'a>(&'a DenseMat);

impl LinearOperator for HDense<'_> {
    fn dim(&self) -> usize {
        self.0.rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.0.mul_vec(x));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::Problem;

    fn cfg(precond: PrecondKind, theta: ThetaMode) -> ExperimentConfig {
        ExperimentConfig {
            problem: Problem::Laplacian {
                dims: vec![12, 12],
                sigma: 0.0,
            },
            p: 4,
            precond,
            rank: 4,
            theta,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn small_grid_claims_hold() {
        for (p, t) in [
            (PrecondKind::Ddlr1, ThetaMode::LambdaNext),
            (PrecondKind::Ddlr1, ThetaMode::Zero),
            (PrecondKind::Ddlr2, ThetaMode::LambdaNext),
        ] {
            let r = verify_spectrum(&cfg(p, t)).unwrap();
            assert!(r.all_pass(), "{p:?} {t:?}: {:?}", r.claims);
        }
    }

    #[test]
    fn size_cap_and_kind() {
        let mut c = cfg(PrecondKind::Ddlr1, ThetaMode::LambdaNext);
        c.problem = Problem::Laplacian {
            dims: vec![50, 50],
            sigma: 0.0,
        };
        assert!(matches!(verify_spectrum(&c), Err(Error::TooLarge { .. })));
        assert!(verify_spectrum(&cfg(PrecondKind::Ras, ThetaMode::Zero)).is_err());
    }

    #[test]
    fn dense_operator_of_diagonal() {
        let d = crate::sparse::SparseSym::diag(&[1.0, 2.0]);
        assert_eq!(dense_operator(&d).data(), &[1.0, 0.0, 0.0, 2.0]);
    }
}
