//! The two low-rank corrected domain decomposition preconditioners.
//!
//! Both start from `A^-1 = A0^-1 + A0^-1 E G^-1 E^T A0^-1` with
//! `G = I - H`, `H = E^T A0^-1 E`:
//!
//! * [`Ddlr1`] keeps the exact outer factors and replaces `G^-1` by the
//!   spectral surrogate built from the top-k eigenpairs of `H` and a shift
//!   `theta`. Two `A0` solves per application.
//! * [`Ddlr2`] approximates `A0^-1 E` itself by a rank-k factor, giving
//!   `M^-1 = A0^-1 + U_k H_k U_k^T` with one `A0` solve per application.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::a0solve::A0Operator;
use crate::error::{check_len, Error, Result};
use crate::lanczos::{lanczos_topk, lanczos_topk_deflated, EigenBundle, LanczosParams};
use crate::linop::{axpy, dot, LinearOperator};
use crate::partition::DistributedMatrix;
use crate::sparse::{dense_eigs_sym, DenseMat};

/// Largest rank accepted for the dense `k x k` matrices.
pub const MAX_RANK: usize = 512;

/// `E = [alpha^-1 Ê; -alpha I]`, applied implicitly through the local `E_i`.
#[derive(Debug, Clone)]
pub struct EOperator {
    dist: Arc<DistributedMatrix>,
    alpha: f64,
}

impl EOperator {
    pub fn new(dist: Arc<DistributedMatrix>, alpha: f64) -> Self {
        Self { dist, alpha }
    }

    pub fn n(&self) -> usize {
        self.dist.n()
    }

    pub fn s(&self) -> usize {
        self.dist.s()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `E w` for `w` of length `s`.
    pub fn e_mul(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_len(self.s(), w.len())?;
        let mut out = vec![0.0; self.n()];
        self.e_mul_into(w, &mut out);
        Ok(out)
    }

    pub fn e_mul_into(&self, w: &[f64], out: &mut [f64]) {
        let m = self.dist.m();
        let (u, y) = out.split_at_mut(m);
        let inv = 1.0 / self.alpha;
        for sd in self.dist.subdomains() {
            let ui = &mut u[sd.u_range.clone()];
            sd.e.mul_vec_into(&w[sd.y_range.clone()], ui);
            ui.iter_mut().for_each(|v| *v *= inv);
        }
        for (yi, wi) in y.iter_mut().zip(w) {
            *yi = -self.alpha * wi;
        }
    }

    /// `E^T z` for `z` of length `n`.
    pub fn et_mul(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), z.len())?;
        let mut out = vec![0.0; self.s()];
        self.et_mul_into(z, &mut out);
        Ok(out)
    }

    pub fn et_mul_into(&self, z: &[f64], out: &mut [f64]) {
        let m = self.dist.m();
        for (o, zy) in out.iter_mut().zip(&z[m..]) {
            *o = -self.alpha * zy;
        }
        let inv = 1.0 / self.alpha;
        for sd in self.dist.subdomains() {
            sd.e.tmul_vec_acc(inv, &z[sd.u_range.clone()], &mut out[sd.y_range.clone()]);
        }
    }
}

/// `v -> E^T A0^-p E v` for `p` = 1 or 2.
struct InterfaceOperator<'a> {
    a0: &'a A0Operator,
    e: &'a EOperator,
    power: usize,
}

impl LinearOperator for InterfaceOperator<'_> {
    fn dim(&self) -> usize {
        self.e.s()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.e.n();
        let mut t = vec![0.0; n];
        let mut z = vec![0.0; n];
        self.e.e_mul_into(x, &mut t);
        for _ in 0..self.power {
            self.a0.solve_into(&t, &mut z);
            std::mem::swap(&mut t, &mut z);
        }
        self.e.et_mul_into(&t, y);
    }
}

/// Dense `H = E^T A0^-1 E`, one `A0` solve per column.
pub fn dense_h(a0: &A0Operator, e: &EOperator) -> DenseMat {
    let s = e.s();
    let op = InterfaceOperator { a0, e, power: 1 };
    let mut h = DenseMat::zeros(s, s);
    let mut col = vec![0.0; s];
    let mut unit = vec![0.0; s];
    for j in 0..s {
        unit[j] = 1.0;
        op.apply(&unit, &mut col);
        unit[j] = 0.0;
        for i in 0..s {
            h[(i, j)] = col[i];
        }
    }
    h.symmetrize();
    h
}

/// Shift used in the DDLR-1 correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum ThetaMode {
    Zero,
    /// The `(k+1)`-th Ritz value.
    LambdaNext,
    Fixed(f64),
}

impl Default for ThetaMode {
    fn default() -> Self {
        ThetaMode::LambdaNext
    }
}

/// Values this close to 1 make `1 - value` unusable as a divisor.
const UNIT_MARGIN: f64 = 1e-12;

fn check_shift(v: f64) -> Result<()> {
    if (1.0 - v).abs() <= UNIT_MARGIN || !v.is_finite() {
        return Err(Error::ThetaOutOfRange(v));
    }
    Ok(())
}

/// `G_{k,theta}^-1 y = (1-theta)^-1 y + U [(I-Λ)^-1 - (1-theta)^-1 I] U^T y`.
pub fn apply_gktheta(u: &[Vec<f64>], lambda: &[f64], theta: f64, y: &[f64]) -> Result<Vec<f64>> {
    check_shift(theta)?;
    for &l in lambda {
        if (1.0 - l).abs() <= UNIT_MARGIN {
            return Err(Error::SingularCorrection);
        }
    }
    for ui in u {
        check_len(y.len(), ui.len())?;
    }
    let mut w = vec![0.0; y.len()];
    gktheta_into(u, lambda, theta, y, &mut w);
    Ok(w)
}

fn gktheta_into(u: &[Vec<f64>], lambda: &[f64], theta: f64, y: &[f64], w: &mut [f64]) {
    let base = 1.0 / (1.0 - theta);
    for (wi, yi) in w.iter_mut().zip(y) {
        *wi = base * yi;
    }
    for (ui, &l) in u.iter().zip(lambda) {
        let c = (1.0 / (1.0 - l) - base) * dot(ui, y);
        axpy(c, ui, w);
    }
}

#[derive(Debug, Clone)]
pub struct Ddlr1 {
    a0: Arc<A0Operator>,
    e: EOperator,
    u: Vec<Vec<f64>>,
    lambda: Vec<f64>,
    theta: f64,
    theta_mode: ThetaMode,
    spd_certified: bool,
    lanczos: LanczosParams,
    steps_used: usize,
    converged: bool,
    lambda_next: f64,
}

/// Runs Lanczos on `H = E^T A0^-1 E` and assembles DDLR-1.
pub fn build_ddlr1(
    a0: Arc<A0Operator>,
    k: usize,
    lanczos: &LanczosParams,
    theta_mode: ThetaMode,
) -> Result<Ddlr1> {
    let e = EOperator::new(a0.dist().clone(), a0.alpha());
    let s = e.s();
    let k = if s == 0 { 0 } else { k };
    if k > s {
        return Err(Error::InvalidArgument(format!("rank {k} exceeds interface size {s}")));
    }
    let bundle = if k == 0 {
        EigenBundle {
            vectors: Vec::new(),
            values: Vec::new(),
            lambda_next: 0.0,
            steps_used: 0,
            converged: true,
            residual_bounds: Vec::new(),
            top_ritz_history: Vec::new(),
        }
    } else {
        let op = InterfaceOperator {
            a0: &a0,
            e: &e,
            power: 1,
        };
        lanczos_topk(&op, k, lanczos).map_err(|err| err.at_stage("lanczos"))?
    };
    Ddlr1::assemble(a0, e, bundle, *lanczos, theta_mode)
}

impl Ddlr1 {
    fn assemble(
        a0: Arc<A0Operator>,
        e: EOperator,
        bundle: EigenBundle,
        lanczos: LanczosParams,
        theta_mode: ThetaMode,
    ) -> Result<Self> {
        let theta = match theta_mode {
            ThetaMode::Zero => 0.0,
            ThetaMode::LambdaNext if bundle.values.is_empty() => 0.0,
            ThetaMode::LambdaNext => bundle.lambda_next,
            ThetaMode::Fixed(t) => t,
        };
        check_shift(theta)?;
        if bundle.values.iter().any(|&l| (1.0 - l).abs() <= UNIT_MARGIN) {
            return Err(Error::SingularCorrection);
        }
        let max_ritz = bundle.values.first().copied().unwrap_or(0.0);
        let spd_certified = max_ritz < 1.0 - 1e-8 && theta < 1.0;
        Ok(Self {
            a0,
            e,
            u: bundle.vectors,
            lambda: bundle.values,
            theta,
            theta_mode,
            spd_certified,
            lanczos,
            steps_used: bundle.steps_used,
            converged: bundle.converged,
            lambda_next: bundle.lambda_next,
        })
    }

    pub fn k(&self) -> usize {
        self.u.len()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn ritz_values(&self) -> &[f64] {
        &self.lambda
    }

    pub fn ritz_vectors(&self) -> &[Vec<f64>] {
        &self.u
    }

    pub fn lambda_next(&self) -> f64 {
        self.lambda_next
    }

    pub fn spd_certified(&self) -> bool {
        self.spd_certified
    }

    pub fn lanczos_steps(&self) -> usize {
        self.steps_used
    }

    pub fn lanczos_converged(&self) -> bool {
        self.converged
    }

    pub fn a0(&self) -> &A0Operator {
        &self.a0
    }

    pub fn e(&self) -> &EOperator {
        &self.e
    }

    /// Stored entries: `A0` factors plus the `s x k` basis and `k` values.
    pub fn nnz(&self) -> usize {
        self.a0.nnz() + self.k() * (self.e.s() + 1)
    }

    pub fn apply_checked(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.e.n(), x.len())?;
        Ok(self.apply_vec(x))
    }

    /// Adds `extra` eigenpairs by a Lanczos run deflated against the current
    /// basis; existing vectors are kept as they are.
    pub fn extend_rank(&self, extra: usize) -> Result<Ddlr1> {
        if extra == 0 {
            return Ok(self.clone());
        }
        let s = self.e.s();
        if self.k() + extra >= s {
            return Err(Error::InvalidArgument(format!(
                "rank {} + {extra} must stay below interface size {s}",
                self.k()
            )));
        }
        let op = InterfaceOperator {
            a0: &self.a0,
            e: &self.e,
            power: 1,
        };
        let more = lanczos_topk_deflated(&op, extra, &self.lanczos, &self.u)
            .map_err(|err| err.at_stage("lanczos"))?;
        let mut pairs: Vec<(f64, Vec<f64>)> = self
            .lambda
            .iter()
            .copied()
            .zip(self.u.iter().cloned())
            .chain(more.values.iter().copied().zip(more.vectors))
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (values, vectors) = pairs.into_iter().unzip();
        let bundle = EigenBundle {
            vectors,
            values,
            lambda_next: more.lambda_next,
            steps_used: self.steps_used + more.steps_used,
            converged: self.converged && more.converged,
            residual_bounds: Vec::new(),
            top_ritz_history: Vec::new(),
        };
        Ddlr1::assemble(self.a0.clone(), self.e.clone(), bundle, self.lanczos, self.theta_mode)
    }
}

impl LinearOperator for Ddlr1 {
    fn dim(&self) -> usize {
        self.e.n()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.e.n();
        let s = self.e.s();
        let mut z = vec![0.0; n];
        self.a0.solve_into(x, &mut z);
        let mut y = vec![0.0; s];
        self.e.et_mul_into(&z, &mut y);
        let mut w = vec![0.0; s];
        gktheta_into(&self.u, &self.lambda, self.theta, &y, &mut w);
        let mut v = vec![0.0; n];
        self.e.e_mul_into(&w, &mut v);
        axpy(1.0, x, &mut v);
        self.a0.solve_into(&v, out);
    }
}

#[derive(Debug, Clone)]
pub struct Ddlr2 {
    a0: Arc<A0Operator>,
    u: Vec<Vec<f64>>,
    hk: DenseMat,
    spd_certified: bool,
    ritz: Vec<f64>,
    steps_used: usize,
    converged: bool,
}

/// Runs Lanczos on `E^T A0^-2 E`, forms `U_k = A0^-1 E V_k` and
/// `H_k = (I - U_k^T E V_k)^-1`.
pub fn build_ddlr2(a0: Arc<A0Operator>, k: usize, lanczos: &LanczosParams) -> Result<Ddlr2> {
    let e = EOperator::new(a0.dist().clone(), a0.alpha());
    let (n, s) = (e.n(), e.s());
    let k = if s == 0 { 0 } else { k };
    if k > s {
        return Err(Error::InvalidArgument(format!("rank {k} exceeds interface size {s}")));
    }
    if k > MAX_RANK {
        return Err(Error::TooLarge { n: k, cap: MAX_RANK });
    }
    let bundle = if k == 0 {
        None
    } else {
        let op = InterfaceOperator {
            a0: &a0,
            e: &e,
            power: 2,
        };
        Some(lanczos_topk(&op, k, lanczos).map_err(|err| err.at_stage("lanczos"))?)
    };
    let (vk, ritz, steps_used, converged) = match bundle {
        Some(b) => (b.vectors, b.values, b.steps_used, b.converged),
        None => (Vec::new(), Vec::new(), 0, true),
    };
    let k = vk.len();

    let mut u = Vec::with_capacity(k);
    let mut ev = Vec::with_capacity(k);
    for v in &vk {
        let mut evj = vec![0.0; n];
        e.e_mul_into(v, &mut evj);
        u.push(a0.solve(&evj)?);
        ev.push(evj);
    }
    let mut t = DenseMat::from_fn(k, k, |i, j| dot(&u[i], &ev[j]));
    t.symmetrize();
    let g = DenseMat::from_fn(k, k, |i, j| if i == j { 1.0 } else { 0.0 } - t[(i, j)]);
    let mut hk = g.inverse()?;
    hk.symmetrize();

    let rho = if k == 0 {
        0.0
    } else {
        let ev = dense_eigs_sym(&t, false)?.eigenvalues;
        ev[0].abs().max(ev[k - 1].abs())
    };
    let spd_certified = hk.cholesky().is_ok() && rho < 1.0;

    Ok(Ddlr2 {
        a0,
        u,
        hk,
        spd_certified,
        ritz,
        steps_used,
        converged,
    })
}

impl Ddlr2 {
    pub fn k(&self) -> usize {
        self.u.len()
    }

    pub fn hk(&self) -> &DenseMat {
        &self.hk
    }

    pub fn spd_certified(&self) -> bool {
        self.spd_certified
    }

    pub fn ritz_values(&self) -> &[f64] {
        &self.ritz
    }

    pub fn lanczos_steps(&self) -> usize {
        self.steps_used
    }

    pub fn lanczos_converged(&self) -> bool {
        self.converged
    }

    pub fn a0(&self) -> &A0Operator {
        &self.a0
    }

    /// Stored entries: `A0` factors plus the dense `n x k` factor and `H_k`.
    pub fn nnz(&self) -> usize {
        self.a0.nnz() + self.k() * (self.a0.n() + self.k())
    }

    pub fn apply_checked(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.a0.n(), x.len())?;
        Ok(self.apply_vec(x))
    }
}

impl LinearOperator for Ddlr2 {
    fn dim(&self) -> usize {
        self.a0.n()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.a0.solve_into(x, out);
        if self.u.is_empty() {
            return;
        }
        let utx: Vec<f64> = self.u.iter().map(|ui| dot(ui, x)).collect();
        let coef = self.hk.mul_vec(&utx);
        for (c, ui) in coef.iter().zip(&self.u) {
            axpy(*c, ui, out);
        }
    }
}
