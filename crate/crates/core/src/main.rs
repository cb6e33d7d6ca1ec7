use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use ddlr::a0solve::CSolveMode;
use ddlr::ddlr::ThetaMode;
use ddlr::harness::{
    run_experiment, ExperimentConfig, KrylovKind, MappingKind, MappingSpec, PrecondKind, Problem,
    ReportFormat, UkPlacement,
};
use ddlr::krylov::KrylovParams;
use ddlr::sparse::IldlParams;

#[derive(Clone, Copy, ValueEnum)]
enum Mapping {
    Standard,
    Unbalanced,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Solve a sparse symmetric system with a domain-decomposition low-rank
/// preconditioner and report iterations, fill and timings.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Matrix Market file.
    #[arg(long, conflicts_with = "gen")]
    matrix: Option<PathBuf>,
    /// Model problem: lap2d:NX,NY or lap3d:NX,NY,NZ.
    #[arg(long, default_value = "lap2d:32,32")]
    gen: String,
    /// Diagonal shift of the generated Laplacian.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    sigma: f64,
    /// Number of subdomains.
    #[arg(long, default_value_t = 4)]
    np: usize,
    /// ddlr1, ddlr2, ras, bj or none.
    #[arg(long, default_value = "ddlr1")]
    prec: String,
    #[arg(long, default_value_t = 8)]
    rank: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// zero, next or a number.
    #[arg(long, default_value = "next")]
    theta: String,
    /// direct, cheb:ITERS or ainv:DROPTOL,MAXNNZ,STEPS.
    #[arg(long, default_value = "ainv:1e-3,10,5")]
    csolve: String,
    /// Drop tolerance of the local factorizations (0 = exact).
    #[arg(long, default_value_t = 0.0)]
    droptol: f64,
    /// Overlap layers for RAS.
    #[arg(long, default_value_t = 1)]
    overlap: usize,
    /// cg, gmres or auto.
    #[arg(long, default_value = "auto")]
    krylov: String,
    #[arg(long, default_value_t = 40)]
    restart: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    maxit: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Check the spectral bounds on the dense preconditioned matrix.
    #[arg(long)]
    verify_spectrum: bool,
    #[arg(long, value_enum)]
    mapping: Option<Mapping>,
    /// Interface processors for the unbalanced mapping.
    #[arg(long, default_value_t = 1)]
    q: usize,
    /// Keep U_k on the interface processors instead of spreading it.
    #[arg(long)]
    uk_on_interface: bool,
    #[arg(long, value_enum, default_value = "json")]
    report: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn config(cli: &Cli) -> ddlr::Result<ExperimentConfig> {
    let problem = match &cli.matrix {
        Some(path) => Problem::Matrix { path: path.clone() },
        None => match cli.gen.parse()? {
            Problem::Laplacian { dims, .. } => Problem::Laplacian {
                dims,
                sigma: cli.sigma,
            },
            other => other,
        },
    };
    let local = if cli.droptol > 0.0 {
        IldlParams {
            droptol: cli.droptol,
            maxfill: usize::MAX,
        }
    } else {
        IldlParams::exact()
    };
    let mapping = cli.mapping.map(|m| MappingSpec {
        kind: match m {
            Mapping::Standard => MappingKind::Standard,
            Mapping::Unbalanced => MappingKind::Unbalanced,
        },
        q: match m {
            Mapping::Standard => 0,
            Mapping::Unbalanced => cli.q,
        },
        placement: if cli.uk_on_interface {
            UkPlacement::InterfaceProcessors
        } else {
            UkPlacement::Distributed
        },
    });
    Ok(ExperimentConfig {
        problem,
        p: cli.np,
        precond: cli.prec.parse::<PrecondKind>()?,
        rank: cli.rank,
        alpha: cli.alpha,
        theta: cli.theta.parse::<ThetaMode>()?,
        c_mode: cli.csolve.parse::<CSolveMode>()?,
        local,
        overlap: cli.overlap,
        krylov: cli.krylov.parse::<KrylovKind>()?,
        solver: KrylovParams {
            tol: cli.tol,
            maxit: cli.maxit,
            restart: cli.restart,
        },
        seed: cli.seed,
        verify_spectrum: cli.verify_spectrum,
        mapping,
        report: match cli.report {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
        },
        ..ExperimentConfig::default()
    })
}

fn run(cli: &Cli) -> ddlr::Result<bool> {
    let cfg = config(cli)?;
    let report = run_experiment(&cfg)?;
    let text = match cfg.report {
        ReportFormat::Json => report.to_json()? + "\n",
        ReportFormat::Csv => report.to_csv()?,
    };
    match &cli.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    eprintln!("{report}");
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(2)
        }
    }
}
