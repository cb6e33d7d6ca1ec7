//! Restricted additive Schwarz, and block Jacobi as its zero-overlap case.

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::linop::LinearOperator;
use crate::partition::Partition;
use crate::sparse::{ildl_reordered, IldlParams, SparseSym, TriFactor};

#[derive(Debug, Clone)]
struct RasBlock {
    /// Overlapped index set, ascending.
    overlapped: Vec<usize>,
    /// Positions within `overlapped` of the owned (non-overlap) indices.
    owned: Vec<usize>,
    factor: TriFactor,
}

#[derive(Debug, Clone)]
pub struct RasPrecond {
    blocks: Vec<RasBlock>,
    n: usize,
    overlap: usize,
}

/// Grows each part by `overlap` layers of graph neighbours and factors the
/// overlapped principal submatrices.
pub fn build_ras(a: &SparseSym, part: &Partition, overlap: usize, params: &IldlParams) -> Result<RasPrecond> {
    check_len(a.n(), part.assign().len())?;
    let n = a.n();
    let members = part.members();
    let blocks = members
        .par_iter()
        .enumerate()
        .map(|(id, own)| {
            let mut inside = vec![false; n];
            own.iter().for_each(|&v| inside[v] = true);
            let mut frontier = own.clone();
            for _ in 0..overlap {
                let mut next = Vec::new();
                for &v in &frontier {
                    for w in a.neighbors(v) {
                        if !inside[w] {
                            inside[w] = true;
                            next.push(w);
                        }
                    }
                }
                frontier = next;
            }
            let overlapped: Vec<usize> = (0..n).filter(|&v| inside[v]).collect();
            let owned: Vec<usize> = overlapped
                .iter()
                .enumerate()
                .filter(|(_, &v)| part.assign()[v] == id)
                .map(|(i, _)| i)
                .collect();
            let factor = ildl_reordered(&a.principal(&overlapped), params).map_err(|e| Error::Subdomain {
                id,
                source: Box::new(e),
            })?;
            Ok(RasBlock {
                overlapped,
                owned,
                factor,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RasPrecond { blocks, n, overlap })
}

/// Block Jacobi: RAS without overlap.
pub fn build_block_jacobi(a: &SparseSym, part: &Partition, params: &IldlParams) -> Result<RasPrecond> {
    build_ras(a, part, 0, params)
}

impl RasPrecond {
    pub fn overlap(&self) -> usize {
        self.overlap
    }

    /// Overlapped index sets, one per subdomain.
    pub fn overlapped_sets(&self) -> Vec<&[usize]> {
        self.blocks.iter().map(|b| b.overlapped.as_slice()).collect()
    }

    /// Indices each subdomain writes on application.
    pub fn owned_sets(&self) -> Vec<Vec<usize>> {
        self.blocks
            .iter()
            .map(|b| b.owned.iter().map(|&i| b.overlapped[i]).collect())
            .collect()
    }

    pub fn nnz(&self) -> usize {
        self.blocks.iter().map(|b| b.factor.nnz()).sum()
    }

    pub fn apply_ras(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        Ok(self.apply_vec(x))
    }
}

impl LinearOperator for RasPrecond {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let parts: Vec<Vec<f64>> = self
            .blocks
            .par_iter()
            .map(|b| {
                let local: Vec<f64> = b.overlapped.iter().map(|&i| x[i]).collect();
                let mut sol = vec![0.0; local.len()];
                b.factor.solve_into(&local, &mut sol);
                sol
            })
            .collect();
        for (b, sol) in self.blocks.iter().zip(parts) {
            for &i in &b.owned {
                y[b.overlapped[i]] = sol[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::gen_laplacian;
    use crate::krylov::{gmres, KrylovParams};
    use crate::linop::dot;
    use crate::partition::partition_graph;

    fn path4_part() -> Partition {
        Partition::from_assignment(2, vec![0, 0, 1, 1]).unwrap()
    }

    #[test]
    fn path_overlap_sets() {
        let a = SparseSym::tridiag(4, -1.0, 2.0);
        let r = build_ras(&a, &path4_part(), 1, &IldlParams::exact()).unwrap();
        assert_eq!(r.overlapped_sets(), vec![&[0, 1, 2][..], &[1, 2, 3][..]]);
        assert_eq!(r.owned_sets(), vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn owned_sets_partition_indices() {
        let a = gen_laplacian(&[10, 10], 0.0).unwrap();
        let part = partition_graph(&a, 4, 0).unwrap();
        let r = build_ras(&a, &part, 2, &IldlParams::exact()).unwrap();
        let mut all: Vec<usize> = r.owned_sets().concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn single_domain_is_exact() {
        let a = gen_laplacian(&[6, 5], 0.0).unwrap();
        let part = partition_graph(&a, 1, 0).unwrap();
        let r = build_ras(&a, &part, 0, &IldlParams::exact()).unwrap();
        let b = vec![1.0; 30];
        let (_, rep) = gmres(&a, &r, &b, &KrylovParams::default()).unwrap();
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn aligned_block_diagonal_is_exact() {
        let a = SparseSym::from_triangle(
            4,
            &[(0, 0, 2.0), (1, 0, 1.0), (1, 1, 3.0), (2, 2, 4.0), (3, 2, -1.0), (3, 3, 5.0)],
        )
        .unwrap();
        let r = build_block_jacobi(&a, &path4_part(), &IldlParams::exact()).unwrap();
        let x = vec![1.0, -1.0, 2.0, 0.5];
        let y = r.apply_ras(&a.spmv(&x).unwrap()).unwrap();
        for (p, q) in y.iter().zip(&x) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn overlap_breaks_symmetry() {
        let a = SparseSym::tridiag(8, -1.0, 2.0);
        let part = Partition::from_assignment(2, vec![0, 0, 0, 0, 1, 1, 1, 1]).unwrap();
        let bj = build_ras(&a, &part, 0, &IldlParams::exact()).unwrap();
        let ras = build_ras(&a, &part, 1, &IldlParams::exact()).unwrap();
        let x: Vec<f64> = (0..8).map(|i| (i as f64 * 1.3).sin()).collect();
        let y: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).cos()).collect();
        let sym = |p: &RasPrecond| (dot(&x, &p.apply_vec(&y)) - dot(&y, &p.apply_vec(&x))).abs();
        assert!(sym(&bj) < 1e-13);
        assert!(sym(&ras) > 1e-6);
    }

    #[test]
    fn ras_helps_gmres() {
        let a = gen_laplacian(&[24, 24], 0.0).unwrap();
        let part = partition_graph(&a, 4, 0).unwrap();
        let b = vec![1.0; a.n()];
        let p = KrylovParams::default();
        let (_, plain) = gmres(&a, &crate::linop::Identity(a.n()), &b, &p).unwrap();
        let ras = build_ras(&a, &part, 1, &IldlParams::default()).unwrap();
        let (_, pre) = gmres(&a, &ras, &b, &p).unwrap();
        assert!(pre.converged);
        assert!(pre.iterations < plain.iterations);
    }
}
