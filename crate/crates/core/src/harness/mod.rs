//! Problem generators, the experiment pipeline, dense spectrum verification,
//! the communication cost model and report output.

mod experiment;
mod gen;
mod mapping;
mod verify;

pub use experiment::{
    manufactured_rhs, run_experiment, ExperimentConfig, ExperimentReport, KrylovKind, MappingSpec,
    PrecondKind, Problem, ReportFormat,
};
pub use gen::gen_laplacian;
pub use mapping::{mapping_cost, MappingCostReport, MappingKind, PrecondFamily, UkPlacement};
pub use verify::{dense_operator, verify_spectrum, Claim, SpectrumReport, UNIT_CLUSTER, VERIFY_CAP};
