//! Tychonoff-regularized Yule-Walker estimation of the operator row
//! `Ψ = (ψ_1, …, ψ_p)` in `X_{k+1} = Σ_i ψ_i(X_{k+1-i}) + ε_{k+1}`:
//!
//! `Ψ̂ = Ĉ^1_{X^[p], X} (Ĉ_{X^[p]} + ϑ)^{-1}`,
//!
//! optionally with the inverse restricted to the top `K` empirical
//! eigenfunctions. Applied with a growing `p = m` to an invertible fARMA
//! sample it estimates the leading coefficients of the fAR(∞) expansion.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // inherent float methods take over when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::estimators::{empirical_auto_cov, empirical_cross_cov};
use crate::hilbert::{GridFunction, LinearOp};
use crate::product::{compose_blocks, BlockOp};
use crate::spectral::{eig, EigenSystem};

/// Share of the total variance captured by the automatic rank choice.
pub const EXPLAINED_VARIANCE: f64 = 0.999;
pub const MAX_AUTO_RANK: usize = 12;
const RANK_TOL: f64 = 1e-12;

/// `ϑ_N = N^{-1/3}`.
pub fn default_ridge(sample_size: usize) -> f64 {
    (sample_size as f64).powf(-1.0 / 3.0)
}

/// Smallest `K` whose leading eigenvalues explain `share` of the trace,
/// capped at `cap`.
pub fn explained_variance_rank(values: &[f64], share: f64, cap: usize) -> usize {
    let total: f64 = values.iter().filter(|v| **v > 0.0).sum();
    if total <= 0.0 {
        return 0;
    }
    let mut acc = 0.0;
    for (k, v) in values.iter().enumerate() {
        acc += v.max(0.0);
        if acc >= share * total {
            return (k + 1).min(cap);
        }
    }
    values.len().min(cap)
}

fn spectral_inverse(sys: &EigenSystem, ridge: f64, rank: usize) -> Result<BlockOp> {
    let first = sys.functions.first().ok_or_else(|| Error::Dimension("empty eigensystem".into()))?;
    let (space, power) = (first.space().clone(), first.power());
    let d = space.dim();
    let n = power * d;
    // weighted representation U diag(1/(λ+ϑ)) Uᵀ with U the W^{1/2}-scaled eigenfunctions
    let sqrt_w: Vec<f64> = (0..n).map(|i| space.weights()[i % d].sqrt()).collect();
    let mut u = DMatrix::zeros(n, rank);
    for (j, c) in sys.functions.iter().take(rank).enumerate() {
        let stacked = c.stacked();
        for i in 0..n {
            u[(i, j)] = stacked[i] * sqrt_w[i];
        }
    }
    let mut scaled = u.clone();
    for (j, lambda) in sys.values.iter().take(rank).enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / (lambda.max(0.0) + ridge));
    }
    BlockOp::from_weighted_flat(&space, &space, power, power, &(scaled * u.transpose()))
}

/// `(C + ϑ I)^{-1}` for a self-adjoint positive semi-definite `C`.
pub fn tychonoff_inverse(c: &BlockOp, ridge: f64) -> Result<BlockOp> {
    if !(ridge > 0.0) {
        return Err(Error::Domain(format!("ridge parameter must be positive, got {ridge}")));
    }
    let sys = eig(c)?;
    spectral_inverse(&sys, ridge, sys.len())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct YwDiagnostics {
    /// `‖Ĉ^1 - Ψ̂ Ĉ‖_S`.
    pub residual: f64,
    /// `(λ̂_1 + ϑ)/(λ̂_K + ϑ)` over the retained spectrum.
    pub condition: f64,
    /// `‖ψ̂_i‖_S` for each block.
    pub block_norms: Vec<f64>,
    /// `‖Ψ̂(m) - Ψ̂(m')‖_S` for `m' = 1, …, m-1`, blocks beyond `m'` taken as zero.
    pub truncation_decay: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct YwFit {
    /// Row `(ψ̂_1 … ψ̂_p)`: one codomain block, `p` domain blocks.
    pub psi_hat: BlockOp,
    pub ridge: f64,
    /// Spectral truncation rank actually used; 0 means none.
    pub rank: usize,
    pub diagnostics: YwDiagnostics,
}

impl YwFit {
    pub fn order(&self) -> usize {
        self.psi_hat.cols()
    }

    /// `ψ̂_i`, 1-based.
    pub fn coefficient(&self, i: usize) -> &LinearOp {
        self.psi_hat.block(0, i - 1)
    }
}

/// Fit `p` autoregressive operators with ridge `ϑ`; `rank > 0` restricts the
/// inverse to the top `rank` eigenfunctions of `Ĉ_{X^[p]}`.
pub fn yw_fit(xs: &[GridFunction], p: usize, ridge: f64, rank: usize) -> Result<YwFit> {
    if p == 0 {
        return Err(Error::Domain("autoregressive order must be positive".into()));
    }
    if xs.len() <= p + 1 {
        return Err(Error::Window(format!("N > p + 1 violated (N = {}, p = {p})", xs.len())));
    }
    if !(ridge > 0.0) {
        return Err(Error::Domain(format!("ridge parameter must be positive, got {ridge}")));
    }
    let c0 = empirical_auto_cov(xs, 0, p)?.op;
    let c1 = empirical_cross_cov(xs, xs, 1, p, 1)?.op;
    let sys = eig(&c0)?;
    let mut warnings = Vec::new();
    let numerical_rank = sys.values.iter().filter(|v| **v > RANK_TOL * sys.values[0].max(0.0)).count();
    let used = if rank == 0 {
        sys.len()
    } else if rank > numerical_rank {
        warnings.push(format!("rank {rank} exceeds numerical rank {numerical_rank}; truncated"));
        numerical_rank.max(1)
    } else {
        rank
    };
    let inverse = spectral_inverse(&sys, ridge, used)?;
    let psi_hat = compose_blocks(&c1, &inverse)?;
    let residual = c1.sub(&compose_blocks(&psi_hat, &c0)?)?.hs_norm();
    let condition = (sys.values[0].max(0.0) + ridge) / (sys.values[used - 1].max(0.0) + ridge);
    let block_norms = (0..p).map(|i| psi_hat.block(0, i).hs_norm()).collect();
    Ok(YwFit {
        psi_hat,
        ridge,
        rank: if rank == 0 { 0 } else { used },
        diagnostics: YwDiagnostics { residual, condition, block_norms, truncation_decay: Vec::new(), warnings },
    })
}

/// Distance between operator rows of different length, the shorter one
/// padded with zero blocks.
pub fn padded_distance(a: &BlockOp, b: &BlockOp) -> f64 {
    let (long, short) = if a.cols() >= b.cols() { (a, b) } else { (b, a) };
    (0..long.cols())
        .map(|i| {
            if i < short.cols() {
                long.block(0, i).sub(short.block(0, i)).map(|d| d.hs_norm_squared()).unwrap_or(f64::NAN)
            } else {
                long.block(0, i).hs_norm_squared()
            }
        })
        .sum::<f64>()
        .sqrt()
}

/// Truncated fAR(∞) fit of order `m`, with the distances to the fits of
/// every lower order recorded in the diagnostics.
pub fn yw_fit_truncated(xs: &[GridFunction], m: usize, ridge: f64, rank: usize) -> Result<YwFit> {
    let mut fit = yw_fit(xs, m, ridge, rank)?;
    let mut decay = Vec::with_capacity(m.saturating_sub(1));
    for lower in 1..m {
        let other = yw_fit(xs, lower, ridge, rank)?;
        decay.push(padded_distance(&fit.psi_hat, &other.psi_hat));
    }
    fit.diagnostics.truncation_decay = decay;
    Ok(fit)
}

/// fAR(∞) coefficients `ψ_ℓ = -(-β)^ℓ` of the invertible fMA(1)
/// `X_k = ε_k + β(ε_{k-1})`, `ℓ = 1..=count`.
pub fn fma1_inversion_coeffs(beta: &LinearOp, count: usize) -> Result<Vec<LinearOp>> {
    let minus_beta = beta.scale(-1.0);
    let mut out = Vec::with_capacity(count);
    let mut power = minus_beta.clone();
    for _ in 0..count {
        out.push(power.scale(-1.0));
        power = crate::hilbert::compose(&power, &minus_beta)?;
    }
    Ok(out)
}
