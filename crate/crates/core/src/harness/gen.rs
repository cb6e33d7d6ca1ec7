//! Model problem generators.

use crate::error::{Error, Result};
use crate::sparse::SparseSym;

/// Negative Laplacian on a regular grid with homogeneous Dirichlet boundary
/// conditions (3-, 5- or 7-point stencil for 1, 2 or 3 dimensions), shifted
/// by `-sigma` on the diagonal. Unknowns are numbered x-fastest.
pub fn gen_laplacian(dims: &[usize], sigma: f64) -> Result<SparseSym> {
    if dims.is_empty() || dims.len() > 3 || dims.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "grid dimensions must be 1 to 3 positive sizes, got {dims:?}"
        )));
    }
    let n: usize = dims.iter().product();
    let center = 2.0 * dims.len() as f64 - sigma;
    let mut stride = 1;
    let mut strides = Vec::with_capacity(dims.len());
    for &d in dims {
        strides.push(stride);
        stride *= d;
    }

    let mut t = Vec::with_capacity(n * (1 + dims.len()));
    for i in 0..n {
        t.push((i, i, center));
        for (axis, &d) in dims.iter().enumerate() {
            let coord = (i / strides[axis]) % d;
            if coord > 0 {
                t.push((i, i - strides[axis], -1.0));
            }
        }
    }
    SparseSym::from_triangle(n, &t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::dense_eigs_sym;
    use std::f64::consts::PI;

    #[test]
    fn single_point() {
        assert_eq!(gen_laplacian(&[1, 1], 0.0).unwrap().to_dense().data(), &[4.0]);
    }

    #[test]
    fn three_by_three_center_row() {
        let a = gen_laplacian(&[3, 3], 0.0).unwrap();
        assert_eq!(a.n(), 9);
        let (cols, vals) = a.row(4);
        assert_eq!(cols, &[1, 3, 4, 5, 7]);
        assert_eq!(vals, &[-1.0, -1.0, 4.0, -1.0, -1.0]);
    }

    #[test]
    fn sizes_and_stencils() {
        assert_eq!(gen_laplacian(&[30, 30], 0.0).unwrap().n(), 900);
        let a = gen_laplacian(&[3, 4, 5], 0.5).unwrap();
        assert_eq!(a.n(), 60);
        assert_eq!(a.get(0, 0), 5.5);
        // Interior point of the 3-D grid has six neighbours.
        let c = 1 + 3 * (1 + 4 * 2);
        assert_eq!(a.row(c).0.len(), 7);
        assert!(gen_laplacian(&[], 0.0).is_err());
        assert!(gen_laplacian(&[3, 0], 0.0).is_err());
    }

    #[test]
    fn spectrum_matches_closed_form() {
        let (nx, ny) = (6, 5);
        let a = gen_laplacian(&[nx, ny], 0.3).unwrap();
        let got = dense_eigs_sym(&a.to_dense(), false).unwrap().eigenvalues;
        let mut want = Vec::new();
        for i in 1..=nx {
            for j in 1..=ny {
                let lx = 2.0 - 2.0 * (i as f64 * PI / (nx + 1) as f64).cos();
                let ly = 2.0 - 2.0 * (j as f64 * PI / (ny + 1) as f64).cos();
                want.push(lx + ly - 0.3);
            }
        }
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }
}
