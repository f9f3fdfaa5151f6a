//! Ready-made kernel operators used as model ingredients.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods take over when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hilbert::{tensor, GridFunction, GridSpace, LinearOp};

/// Covariance operator of the Brownian bridge, kernel `min(s,t) - st`.
/// Its eigenvalues are `(πj)^{-2}` with eigenfunctions `√2 sin(jπt)`.
pub fn brownian_bridge(space: &GridSpace) -> LinearOp {
    LinearOp::from_kernel_fn(space, space, |s, t| s.min(t) - s * t)
}

/// Gaussian kernel `exp(-(s-t)² / (2 b²))`.
pub fn gaussian(space: &GridSpace, bandwidth: f64) -> Result<LinearOp> {
    if !(bandwidth > 0.0) {
        return Err(Error::Domain(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let denom = 2.0 * bandwidth * bandwidth;
    Ok(LinearOp::from_kernel_fn(space, space, |s, t| (-(s - t) * (s - t) / denom).exp()))
}

/// `Σ_j c_j e_j ⊗ e_j`: diagonal in the given orthonormal system.
pub fn spectral(basis: &[GridFunction], coefficients: &[f64]) -> Result<LinearOp> {
    if basis.len() < coefficients.len() {
        return Err(Error::Dimension(format!(
            "{} coefficients for a basis of {} functions",
            coefficients.len(),
            basis.len()
        )));
    }
    let space = basis
        .first()
        .map(|e| e.space().clone())
        .ok_or_else(|| Error::Dimension("empty basis".into()))?;
    let mut op = LinearOp::zero(&space, &space);
    for (e, c) in basis.iter().zip(coefficients) {
        op = op.add(&tensor(e, e).scale(*c))?;
    }
    Ok(op)
}

/// Rescale `op` so that its operator norm equals `target`.
pub fn with_op_norm(op: &LinearOp, target: f64) -> Result<LinearOp> {
    if target < 0.0 {
        return Err(Error::Domain(format!("target norm {target} is negative")));
    }
    let current = op.op_norm()?;
    if current == 0.0 {
        if target == 0.0 {
            return Ok(op.clone());
        }
        return Err(Error::Domain("cannot rescale the zero operator".into()));
    }
    Ok(op.scale(target / current))
}

/// Eigenvalues of a self-adjoint operator, descending.
pub fn eigenvalues(op: &LinearOp) -> Result<Vec<f64>> {
    Ok(crate::linalg::symmetric_eigen(&op.weighted_matrix())?.0)
}
