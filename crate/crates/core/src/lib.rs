//! Domain-decomposition low-rank (DDLR) preconditioners for sparse symmetric
//! linear systems.
//!
//! The global matrix is partitioned with an edge separator and reordered so
//! that interior unknowns of every subdomain come first and interface unknowns
//! last. The reordered matrix is split as `A = A0 - E E^T`, where `A0` is
//! block-decoupled, and the Sherman-Morrison-Woodbury correction through
//! `G = I - E^T A0^{-1} E` is approximated by a low-rank spectral surrogate
//! computed with Lanczos.
//!
//! Two preconditioners are provided:
//!
//! * [`ddlr::Ddlr1`], the one-sided variant, applies
//!   `A0^{-1} (I + E G_{k,theta}^{-1} E^T A0^{-1})` with two `A0` solves.
//! * [`ddlr::Ddlr2`], the two-sided variant, applies `A0^{-1} + U_k H_k U_k^T`
//!   with a single `A0` solve.
//!
//! Supporting pieces: sparse storage and factorization ([`sparse`]), the
//! partitioner ([`partition`]), the decoupled operator ([`a0solve`]), Lanczos
//! ([`lanczos`]), Krylov accelerators ([`krylov`]), Schwarz baselines
//! ([`baseline`]) and the experiment harness ([`harness`]).

pub mod a0solve;
pub mod baseline;
pub mod ddlr;
pub mod error;
pub mod harness;
pub mod krylov;
pub mod lanczos;
pub mod linop;
pub mod partition;
pub mod sparse;

pub use error::{Error, Result};
pub use linop::LinearOperator;
