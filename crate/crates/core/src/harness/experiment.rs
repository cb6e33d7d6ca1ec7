//! Experiment configuration and the end-to-end pipeline.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gen::gen_laplacian;
use super::mapping::{mapping_cost, MappingKind, PrecondFamily, UkPlacement};
use super::verify::{verify_spectrum, SpectrumReport};
use crate::a0solve::{build_a0, A0Params, CSolveMode};
use crate::baseline::build_ras;
use crate::ddlr::{build_ddlr1, build_ddlr2, ThetaMode};
use crate::error::{Error, Result};
use crate::krylov::{gmres, pcg, KrylovParams, SolveReport};
use crate::lanczos::LanczosParams;
use crate::linop::{norm2, Identity, LinearOperator};
use crate::partition::{build_distributed, partition_graph, Direction};
use crate::sparse::{mm_read, IldlParams, SparseSym};

/// Where the matrix comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Problem {
    /// Shifted Dirichlet Laplacian on a 1-, 2- or 3-D grid.
    Laplacian { dims: Vec<usize>, sigma: f64 },
    /// Matrix Market file.
    Matrix { path: PathBuf },
}

impl Problem {
    pub fn load(&self) -> Result<SparseSym> {
        match self {
            Problem::Laplacian { dims, sigma } => gen_laplacian(dims, *sigma),
            Problem::Matrix { path } => mm_read(path),
        }
    }

    /// Short name for tables: `128x128` or the file stem.
    pub fn label(&self) -> String {
        match self {
            Problem::Laplacian { dims, .. } => dims
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join("x"),
            Problem::Matrix { path } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
        }
    }
}

/// Parses `lap2d:NX,NY` or `lap3d:NX,NY,NZ` (`lap1d:N` also accepted); the
/// shift is set separately.
impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad generator spec '{s}'"));
        let (kind, sizes) = s.split_once(':').ok_or_else(bad)?;
        let want = match kind {
            "lap1d" => 1,
            "lap2d" => 2,
            "lap3d" => 3,
            _ => return Err(bad()),
        };
        let dims: Vec<usize> = sizes
            .split(',')
            .map(|t| t.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        if dims.len() != want || dims.contains(&0) {
            return Err(bad());
        }
        Ok(Problem::Laplacian { dims, sigma: 0.0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecondKind {
    Ddlr1,
    Ddlr2,
    Ras,
    BlockJacobi,
    None,
}

impl PrecondKind {
    pub fn is_ddlr(self) -> bool {
        matches!(self, PrecondKind::Ddlr1 | PrecondKind::Ddlr2)
    }
}

impl FromStr for PrecondKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ddlr1" => PrecondKind::Ddlr1,
            "ddlr2" => PrecondKind::Ddlr2,
            "ras" => PrecondKind::Ras,
            "bj" => PrecondKind::BlockJacobi,
            "none" => PrecondKind::None,
            _ => return Err(Error::InvalidArgument(format!("unknown preconditioner '{s}'"))),
        })
    }
}

/// `Auto` picks CG for preconditioners certified SPD and GMRES otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KrylovKind {
    Auto,
    Cg,
    Gmres,
}

impl FromStr for KrylovKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "auto" => KrylovKind::Auto,
            "cg" => KrylovKind::Cg,
            "gmres" => KrylovKind::Gmres,
            _ => return Err(Error::InvalidArgument(format!("unknown Krylov method '{s}'"))),
        })
    }
}

/// `zero`, `next` or a number.
impl FromStr for ThetaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "zero" => ThetaMode::Zero,
            "next" => ThetaMode::LambdaNext,
            _ => ThetaMode::Fixed(
                s.parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad theta '{s}'")))?,
            ),
        })
    }
}

/// `direct`, `cheb:ITERS` or `ainv:DROPTOL,MAXNNZ,STEPS`.
impl FromStr for CSolveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad interface solver '{s}'"));
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "direct" if args.is_empty() => Ok(CSolveMode::Direct),
            "cheb" => {
                let iterations = if args.is_empty() { 5 } else { args.parse().map_err(|_| bad())? };
                Ok(CSolveMode::Chebyshev {
                    iterations,
                    probe_steps: 10,
                })
            }
            "ainv" if args.is_empty() => Ok(CSolveMode::DEFAULT_APPROX_INVERSE),
            "ainv" => {
                let parts: Vec<&str> = args.split(',').collect();
                if parts.len() != 3 {
                    return Err(bad());
                }
                Ok(CSolveMode::ApproxInverse {
                    droptol: parts[0].parse().map_err(|_| bad())?,
                    max_nnz: parts[1].parse().map_err(|_| bad())?,
                    steps: parts[2].parse().map_err(|_| bad())?,
                })
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingSpec {
    pub kind: MappingKind,
    pub q: usize,
    pub placement: UkPlacement,
}

/// Everything one run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub p: usize,
    pub precond: PrecondKind,
    pub rank: usize,
    pub alpha: f64,
    pub theta: ThetaMode,
    pub c_mode: CSolveMode,
    /// Local subdomain factorizations, for DDLR and the baselines alike.
    pub local: IldlParams,
    /// Overlap layers for RAS.
    pub overlap: usize,
    pub krylov: KrylovKind,
    pub solver: KrylovParams,
    pub lanczos: LanczosParams,
    /// Drives the partitioner, the Lanczos start and the exact solution.
    pub seed: u64,
    pub verify_spectrum: bool,
    pub mapping: Option<MappingSpec>,
    pub report: ReportFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: Problem::Laplacian {
                dims: vec![32, 32],
                sigma: 0.0,
            },
            p: 4,
            precond: PrecondKind::Ddlr1,
            rank: 8,
            alpha: 1.0,
            theta: ThetaMode::LambdaNext,
            c_mode: CSolveMode::default(),
            local: IldlParams::exact(),
            overlap: 1,
            krylov: KrylovKind::Auto,
            solver: KrylovParams::default(),
            lanczos: LanczosParams::default(),
            seed: 0,
            verify_spectrum: false,
            mapping: None,
            report: ReportFormat::Json,
        }
    }
}

impl ExperimentConfig {
    fn a0_params(&self) -> A0Params {
        A0Params {
            alpha: self.alpha,
            local: self.local,
            c_mode: self.c_mode,
        }
    }

    fn lanczos_params(&self) -> LanczosParams {
        LanczosParams {
            seed: self.seed,
            ..self.lanczos
        }
    }
}

/// Outcome of [`run_experiment`]: the solve report plus what was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub n: usize,
    pub nnz: usize,
    /// Interior and interface sizes (DDLR only).
    pub m: Option<usize>,
    pub s: Option<usize>,
    pub krylov_used: KrylovKind,
    pub spd_certified: Option<bool>,
    pub theta: Option<f64>,
    /// Effective rank after clamping to the interface size.
    pub rank: usize,
    pub ritz_values: Vec<f64>,
    pub lanczos_steps: usize,
    /// `||b - A x|| / ||b||` recomputed from the returned solution.
    pub true_residual: f64,
    pub solve: SolveReport,
    pub spectrum: Option<SpectrumReport>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON with the wall-clock fields zeroed, for reproducibility checks.
    pub fn to_json_without_timings(&self) -> Result<String> {
        let mut r = self.clone();
        r.solve.build_time = 0.0;
        r.solve.apply_time = 0.0;
        r.to_json()
    }

    /// One-row table: mesh or matrix, Np, rank, fill, iterations, build and
    /// iteration times.
    pub fn to_csv(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Row<'a> {
            matrix: &'a str,
            np: usize,
            rk: usize,
            nz: f64,
            its: String,
            p_t: f64,
            i_t: f64,
        }
        let label = self.config.problem.label();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(Row {
            matrix: &label,
            np: self.config.p,
            rk: self.rank,
            nz: self.solve.fill_ratio,
            its: if self.solve.converged {
                self.solve.iterations.to_string()
            } else {
                "F".into()
            },
            p_t: self.solve.build_time,
            i_t: self.solve.apply_time,
        })
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    /// Whether the run met its goal: convergence, and every spectral claim
    /// when verification was requested.
    pub fn passed(&self) -> bool {
        self.solve.converged && self.spectrum.as_ref().is_none_or(SpectrumReport::all_pass)
    }
}

impl fmt::Display for ExperimentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} p={} {:?} k={} its={}{} fill={:.2} build={:.3}s solve={:.3}s",
            self.config.problem.label(),
            self.config.p,
            self.config.precond,
            self.rank,
            self.solve.iterations,
            if self.solve.converged { "" } else { " (F)" },
            self.solve.fill_ratio,
            self.solve.build_time,
            self.solve.apply_time
        )
    }
}

/// Right-hand side `b = A x*` with `x*` all ones for seed 0, otherwise
/// uniform in `[-1, 1)`.
pub fn manufactured_rhs(a: &SparseSym, seed: u64) -> Vec<f64> {
    let x: Vec<f64> = if seed == 0 {
        vec![1.0; a.n()]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        (0..a.n()).map(|_| rng.random_range(-1.0..1.0)).collect()
    };
    a.apply_vec(&x)
}

struct Built {
    op: Box<dyn LinearOperator>,
    nnz: usize,
    spd: Option<bool>,
    symmetric: bool,
    theta: Option<f64>,
    rank: usize,
    ritz: Vec<f64>,
    steps: usize,
}

/// Generate or load, partition, build, solve and report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let a = cfg.problem.load().map_err(|e| e.at_stage("problem"))?;
    let part = partition_graph(&a, cfg.p, cfg.seed).map_err(|e| e.at_stage("partition"))?;
    let b = manufactured_rhs(&a, cfg.seed);

    let t0 = Instant::now();
    let mut dist = None;
    let mut tallies = None;
    let built = match cfg.precond {
        PrecondKind::Ddlr1 | PrecondKind::Ddlr2 => {
            let d = Arc::new(build_distributed(&a, &part).map_err(|e| e.at_stage("partition"))?);
            let a0 = Arc::new(build_a0(d.clone(), &cfg.a0_params()).map_err(|e| e.at_stage("build"))?);
            let lp = cfg.lanczos_params();
            let built = if cfg.precond == PrecondKind::Ddlr1 {
                let p = build_ddlr1(a0.clone(), cfg.rank, &lp, cfg.theta).map_err(|e| e.at_stage("build"))?;
                Built {
                    nnz: p.nnz(),
                    spd: Some(p.spd_certified()),
                    symmetric: true,
                    theta: Some(p.theta()),
                    rank: p.k(),
                    ritz: p.ritz_values().to_vec(),
                    steps: p.lanczos_steps(),
                    op: Box::new(p),
                }
            } else {
                let p = build_ddlr2(a0.clone(), cfg.rank, &lp).map_err(|e| e.at_stage("build"))?;
                Built {
                    nnz: p.nnz(),
                    spd: Some(p.spd_certified()),
                    symmetric: true,
                    theta: None,
                    rank: p.k(),
                    ritz: p.ritz_values().to_vec(),
                    steps: p.lanczos_steps(),
                    op: Box::new(p),
                }
            };
            if let Some(m) = cfg.mapping {
                let family = if cfg.precond == PrecondKind::Ddlr1 {
                    PrecondFamily::Ddlr1
                } else {
                    PrecondFamily::Ddlr2
                };
                tallies = Some(
                    mapping_cost(&a0, family, m.kind, m.q, built.rank, m.placement)
                        .map_err(|e| e.at_stage("mapping"))?,
                );
            }
            dist = Some(d);
            built
        }
        PrecondKind::Ras | PrecondKind::BlockJacobi => {
            let overlap = if cfg.precond == PrecondKind::Ras { cfg.overlap } else { 0 };
            let p = build_ras(&a, &part, overlap, &cfg.local).map_err(|e| e.at_stage("build"))?;
            Built {
                nnz: p.nnz(),
                spd: None,
                symmetric: overlap == 0,
                theta: None,
                rank: 0,
                ritz: Vec::new(),
                steps: 0,
                op: Box::new(p),
            }
        }
        PrecondKind::None => Built {
            op: Box::new(Identity(a.n())),
            nnz: 0,
            spd: Some(true),
            symmetric: true,
            theta: None,
            rank: 0,
            ritz: Vec::new(),
            steps: 0,
        },
    };
    if cfg.mapping.is_some() && !cfg.precond.is_ddlr() {
        return Err(Error::InvalidArgument("the mapping model covers DDLR preconditioners only".into())
            .at_stage("mapping"));
    }
    let build_time = t0.elapsed().as_secs_f64();

    // DDLR works in the interior-then-interface ordering.
    let (amat, rhs) = match &dist {
        Some(d) => (
            d.permuted().clone(),
            d.permute_vector(&b, Direction::Forward)?,
        ),
        None => (a.clone(), b.clone()),
    };

    let cg_ok = built.symmetric && built.spd.unwrap_or(true);
    let krylov_used = match cfg.krylov {
        KrylovKind::Gmres => KrylovKind::Gmres,
        KrylovKind::Cg | KrylovKind::Auto if cg_ok => KrylovKind::Cg,
        _ => KrylovKind::Gmres,
    };
    let (x, mut solve) = match krylov_used {
        KrylovKind::Cg => pcg(&amat, built.op.as_ref(), &rhs, &cfg.solver),
        _ => gmres(&amat, built.op.as_ref(), &rhs, &cfg.solver),
    }
    .map_err(|e| e.at_stage("solve"))?;

    let ax = amat.apply_vec(&x);
    let res: Vec<f64> = ax.iter().zip(&rhs).map(|(p, q)| p - q).collect();
    let true_residual = norm2(&res) / norm2(&rhs).max(f64::MIN_POSITIVE);

    solve.build_time = build_time;
    solve.fill_ratio = built.nnz as f64 / a.nnz().max(1) as f64;
    solve.comm_tallies = tallies;

    let spectrum = if cfg.verify_spectrum {
        Some(verify_spectrum(cfg).map_err(|e| e.at_stage("verify"))?)
    } else {
        None
    };

    Ok(ExperimentReport {
        config: cfg.clone(),
        n: a.n(),
        nnz: a.nnz(),
        m: dist.as_ref().map(|d| d.m()),
        s: dist.as_ref().map(|d| d.s()),
        krylov_used,
        spd_certified: built.spd,
        theta: built.theta,
        rank: built.rank,
        ritz_values: built.ritz,
        lanczos_steps: built.steps,
        true_residual,
        solve,
        spectrum,
    })
}
