//! Dense kernels shared by the operator types.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100_000;

/// Singular values in descending order.
pub(crate) fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let svd = m
        .clone()
        .try_svd(false, false, f64::EPSILON, MAX_SWEEPS)
        .ok_or(Error::Numeric("SVD did not converge"))?;
    let mut values: Vec<f64> = svd.singular_values.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// Eigendecomposition of a symmetric matrix, eigenvalues descending.
///
/// Eigenvector signs are fixed so that the first coordinate that is not
/// negligible is positive; ties keep the solver's relative order.
pub(crate) fn symmetric_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    // symmetrize to kill round-off asymmetry before the solver sees it
    let sym = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, MAX_SWEEPS)
        .ok_or(Error::Numeric("symmetric eigensolver did not converge"))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for idx in order {
        values.push(eig.eigenvalues[idx]);
        let mut v: DVector<f64> = eig.eigenvectors.column(idx).into_owned();
        let scale = v.amax();
        if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12 * scale) {
            if first < 0.0 {
                v.neg_mut();
            }
        }
        vectors.push(v);
    }
    Ok((values, vectors))
}
