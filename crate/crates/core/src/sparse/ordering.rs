//! Fill-reducing symmetric ordering.

use super::SparseSym;

/// Approximate minimum degree ordering of `a` (`order[new] = old`).
///
/// Deterministic for a fixed input. A matrix without off-diagonal entries
/// gets the identity.
pub fn fill_reducing_order(a: &SparseSym) -> Vec<usize> {
    let n = a.n();
    if n == 0 {
        return Vec::new();
    }
    if (0..n).all(|i| a.neighbors(i).next().is_none()) {
        return (0..n).collect();
    }
    let csr = a.as_csr();
    let control = amd::Control::default();
    match amd::order::<usize>(n, csr.row_ptr(), csr.col_idx(), &control) {
        Ok((perm, _, _)) => perm,
        // The pattern is always valid (sorted, in range), so this is unreachable
        // in practice; fall back to the natural ordering.
        Err(_) => (0..n).collect(),
    }
}

/// Number of strictly-lower nonzeros of the exact Cholesky factor of `a`
/// under `order`, computed symbolically from the elimination tree.
pub fn symbolic_lnnz(a: &SparseSym, order: &[usize]) -> usize {
    let n = a.n();
    let mut pos = vec![0; n];
    for (new, &old) in order.iter().enumerate() {
        pos[old] = new;
    }
    let mut parent = vec![usize::MAX; n];
    let mut mark = vec![usize::MAX; n];
    let mut count = 0;
    for i in 0..n {
        mark[i] = i;
        let old_i = order[i];
        for j in a.neighbors(old_i).map(|o| pos[o]).filter(|&j| j < i) {
            // Walk up the row subtree of i, counting newly reached nodes.
            let mut k = j;
            while mark[k] != i {
                mark[k] = i;
                count += 1;
                if parent[k] == usize::MAX {
                    parent[k] = i;
                }
                k = parent[k];
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::gen_laplacian;
    use crate::sparse::{ildl_factor, IldlParams};

    #[test]
    fn diagonal_gives_identity() {
        let a = SparseSym::diag(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(fill_reducing_order(&a), vec![0, 1, 2, 3]);
    }

    fn arrow(n: usize) -> SparseSym {
        let mut t = vec![(0, 0, n as f64 + 1.0)];
        for i in 1..n {
            t.push((i, i, 2.0));
            t.push((i, 0, -1.0));
        }
        SparseSym::from_triangle(n, &t).unwrap()
    }

    #[test]
    fn arrow_hub_goes_last() {
        let a = arrow(6);
        let natural: Vec<usize> = (0..6).collect();
        let order = fill_reducing_order(&a);
        assert_eq!(*order.last().unwrap(), 0);
        // Natural order fills the whole trailing triangle; the reordered one
        // adds nothing beyond the original pattern.
        assert_eq!(symbolic_lnnz(&a, &natural), 15);
        assert_eq!(symbolic_lnnz(&a, &order), 5);
    }

    #[test]
    fn laplacian_ordering_reduces_fill() {
        let a = gen_laplacian(&[8, 8], 0.0).unwrap();
        let natural: Vec<usize> = (0..a.n()).collect();
        let order = fill_reducing_order(&a);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, natural);
        assert!(symbolic_lnnz(&a, &order) <= symbolic_lnnz(&a, &natural));
        assert_eq!(order, fill_reducing_order(&a));
    }

    #[test]
    fn symbolic_count_matches_numeric_exact_factor() {
        let a = gen_laplacian(&[7, 6], 0.0).unwrap();
        for order in [(0..a.n()).collect::<Vec<_>>(), fill_reducing_order(&a)] {
            let f = ildl_factor(&a, &IldlParams::exact(), &order).unwrap();
            assert_eq!(f.l().nnz(), symbolic_lnnz(&a, &order));
        }
    }
}
