//! Analytical per-application communication model for the two processor
//! mappings.
//!
//! *Standard*: processor `i` holds subdomain `i`, interior and interface.
//! *Unbalanced*: processors `0..p` hold the interiors and `q` extra
//! processors hold all interface unknowns. `B` solves are always local; the
//! interface solve exchanges boundary values according to the sparsity of
//! whatever operator the `C_alpha` solver applies; moving interface data
//! between the two processor groups costs scatter/gather pairs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::a0solve::{A0Operator, CSolver};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingKind {
    Standard,
    Unbalanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecondFamily {
    Ddlr1,
    Ddlr2,
}

/// Where the DDLR-1 basis lives under the unbalanced mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UkPlacement {
    /// Spread over the `p` interior processors.
    #[default]
    Distributed,
    /// On the interface processors.
    InterfaceProcessors,
}

/// Tallies per preconditioner application.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingCostReport {
    pub family: PrecondFamily,
    pub mapping: MappingKind,
    pub placement: UkPlacement,
    pub p: usize,
    pub q: usize,
    pub k: usize,
    pub a0_solves: usize,
    /// Local interior solves never communicate.
    pub b_solve_messages: usize,
    /// Point-to-point messages inside the interface solves.
    pub c_solve_messages: usize,
    /// Interface values carried by those messages.
    pub c_solve_volume: usize,
    pub all_reduce_count: usize,
    pub scatter_gather_pairs: usize,
}

/// Evaluates the model for a built `A0`. `q = 0` selects the standard
/// mapping whatever `mapping` says.
pub fn mapping_cost(
    a0: &A0Operator,
    family: PrecondFamily,
    mapping: MappingKind,
    q: usize,
    k: usize,
    placement: UkPlacement,
) -> Result<MappingCostReport> {
    let dist = a0.dist();
    let p = dist.p();
    if q > p {
        return Err(Error::InvalidArgument(format!(
            "{q} interface processors for {p} subdomains"
        )));
    }
    let mapping = if q == 0 { MappingKind::Standard } else { mapping };
    let q = if mapping == MappingKind::Standard { 0 } else { q };
    let a0_solves = match family {
        PrecondFamily::Ddlr1 => 2,
        PrecondFamily::Ddlr2 => 1,
    };
    let mut rep = MappingCostReport {
        family,
        mapping,
        placement,
        p,
        q,
        k,
        a0_solves,
        b_solve_messages: 0,
        c_solve_messages: 0,
        c_solve_volume: 0,
        all_reduce_count: 0,
        scatter_gather_pairs: 0,
    };
    if p == 1 {
        return Ok(rep);
    }

    // Owning processor of every interface unknown.
    let mut owner = vec![0; dist.s()];
    for (i, sd) in dist.subdomains().iter().enumerate() {
        let proc = match mapping {
            MappingKind::Standard => i,
            MappingKind::Unbalanced => p + i * q / p,
        };
        owner[sd.y_range.clone()].fill(proc);
    }

    let (messages, volume) = match a0.c_solver() {
        CSolver::Direct(_) => dense_exchange(&owner),
        CSolver::Chebyshev(cp) => {
            let (m, v) = pattern_exchange(&owner, |r| a0.c_alpha().row(r).0);
            let matvecs = cp.iterations.saturating_sub(1);
            (m * matvecs, v * matvecs)
        }
        CSolver::ApproxInverse(x) => pattern_exchange(&owner, |r| x.row(r).0),
    };
    rep.c_solve_messages = messages * a0_solves;
    rep.c_solve_volume = volume * a0_solves;

    if k > 0 {
        rep.all_reduce_count = match (family, mapping, placement) {
            (PrecondFamily::Ddlr1, MappingKind::Unbalanced, UkPlacement::InterfaceProcessors) => {
                usize::from(q > 1)
            }
            _ => 1,
        };
    }
    if mapping == MappingKind::Unbalanced {
        rep.scatter_gather_pairs = match (family, placement) {
            (PrecondFamily::Ddlr1, UkPlacement::InterfaceProcessors) => 2,
            _ => 1,
        };
    }
    Ok(rep)
}

/// Messages and volume of one product with a sparse interface operator.
fn pattern_exchange<'a>(owner: &[usize], row: impl Fn(usize) -> &'a [usize]) -> (usize, usize) {
    let mut pairs = BTreeSet::new();
    let mut needed = BTreeSet::new();
    for (r, &dst) in owner.iter().enumerate() {
        for &c in row(r) {
            let src = owner[c];
            if src != dst {
                pairs.insert((src, dst));
                needed.insert((dst, c));
            }
        }
    }
    (pairs.len(), needed.len())
}

/// A direct solve couples every interface unknown to every other one.
fn dense_exchange(owner: &[usize]) -> (usize, usize) {
    let procs: BTreeSet<usize> = owner.iter().copied().collect();
    let t = procs.len();
    let messages = t * t.saturating_sub(1);
    let volume = procs
        .iter()
        .map(|&pr| owner.iter().filter(|&&o| o != pr).count())
        .sum();
    (messages, volume)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::a0solve::{build_a0, A0Params, CSolveMode};
    use crate::harness::gen_laplacian;
    use crate::partition::{build_distributed, partition_graph};
    use std::sync::Arc;

    fn a0(p: usize, mode: CSolveMode) -> A0Operator {
        let a = gen_laplacian(&[16, 16], 0.0).unwrap();
        let part = partition_graph(&a, p, 0).unwrap();
        let d = Arc::new(build_distributed(&a, &part).unwrap());
        build_a0(
            d,
            &A0Params {
                c_mode: mode,
                ..A0Params::exact(1.0)
            },
        )
        .unwrap()
    }

    #[test]
    fn single_processor_is_silent() {
        let op = a0(1, CSolveMode::Direct);
        for fam in [PrecondFamily::Ddlr1, PrecondFamily::Ddlr2] {
            let r = mapping_cost(&op, fam, MappingKind::Unbalanced, 1, 8, UkPlacement::Distributed).unwrap();
            assert_eq!(
                (r.c_solve_messages, r.all_reduce_count, r.scatter_gather_pairs),
                (0, 0, 0)
            );
        }
    }

    #[test]
    fn standard_and_unbalanced_tallies() {
        let op = a0(4, CSolveMode::DEFAULT_APPROX_INVERSE);
        let std2 = mapping_cost(&op, PrecondFamily::Ddlr2, MappingKind::Standard, 0, 8, UkPlacement::Distributed).unwrap();
        assert_eq!(std2.scatter_gather_pairs, 0);
        assert_eq!(std2.all_reduce_count, 1);
        assert!(std2.c_solve_messages > 0);

        let ub = mapping_cost(&op, PrecondFamily::Ddlr1, MappingKind::Unbalanced, 1, 8, UkPlacement::Distributed).unwrap();
        assert_eq!((ub.c_solve_messages, ub.scatter_gather_pairs), (0, 1));
        let ub2 = mapping_cost(
            &op,
            PrecondFamily::Ddlr1,
            MappingKind::Unbalanced,
            1,
            8,
            UkPlacement::InterfaceProcessors,
        )
        .unwrap();
        assert_eq!((ub2.scatter_gather_pairs, ub2.all_reduce_count), (2, 0));
    }

    #[test]
    fn more_interface_processors_bring_messages_back() {
        let op = a0(4, CSolveMode::DEFAULT_CHEBYSHEV);
        let q2 = mapping_cost(&op, PrecondFamily::Ddlr1, MappingKind::Unbalanced, 2, 4, UkPlacement::Distributed).unwrap();
        assert!(q2.c_solve_messages > 0);
        assert!(mapping_cost(&op, PrecondFamily::Ddlr1, MappingKind::Unbalanced, 5, 4, UkPlacement::Distributed).is_err());
    }

    #[test]
    fn direct_solve_is_all_to_all() {
        assert_eq!(dense_exchange(&[0, 0, 1, 2]), (6, 2 + 3 + 3));
        assert_eq!(pattern_exchange(&[0, 1], |_| &[0, 1][..]), (2, 2));
    }
}
