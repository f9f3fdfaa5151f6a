//! Explicit upper bounds for the mean squared Hilbert-Schmidt error of the
//! lagged covariance estimators, and their propagation through sums and
//! products of estimators.
//!
//! With `ν = ν₄(X₁)`, `μ = ν₄(Y₁)` and coupling sums
//! `S_X = Σ_{k≥κ'} ν₄(X_k - X_k^(k))` (likewise `S_Y`):
//!
//! * `ξ_{X,Y} = ν²μ² + 2√2/(2κ'-1) · νμ · (μ S_X + ν S_Y)`,
//! * `ξ_{X,X} = ν⁴ + 4√2/(2κ'-1) · ν³ S_X`,
//! * `τ_X = ν⁴ + 4/(2κ'-1) · ν³ S_X`,
//!
//! so that `E‖Ĉ - C‖_S² ≤ mn(2κ'-1)/N' · ξ`.

use alloc::format;

#[allow(unused_imports)] // inherent float methods take over when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::process::{MomentProvenance, MomentSet, TailRule};
use crate::product::{lag_window, LagWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formula {
    XiCross,
    XiAuto,
    Tau,
    TauTilde,
    Far1Closed,
    SumProp,
    ProdProp,
}

impl Formula {
    pub fn as_str(self) -> &'static str {
        match self {
            Formula::XiCross => "xi_cross",
            Formula::XiAuto => "xi_auto",
            Formula::Tau => "tau",
            Formula::TauTilde => "tau_tilde",
            Formula::Far1Closed => "far1_closed",
            Formula::SumProp => "sum_prop",
            Formula::ProdProp => "prod_prop",
        }
    }
}

impl core::fmt::Display for Formula {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Value of a bound constant, split into the moment product and the
/// coupling-sum contribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub value: f64,
    pub leading_term: f64,
    pub tail_term: f64,
    pub window: LagWindow,
    pub formula: Formula,
    pub tail_rule: TailRule,
    pub provenance: MomentProvenance,
}

impl BoundReport {
    /// Bound on the mean squared error: `mn(2κ'-1)/N' · value`.
    pub fn mse_bound(&self) -> f64 {
        self.value / self.window.normalization()
    }
}

fn report(
    moments: &MomentSet,
    window: LagWindow,
    formula: Formula,
    leading_term: f64,
    tail_term: f64,
) -> BoundReport {
    BoundReport {
        value: leading_term + tail_term,
        leading_term,
        tail_term,
        window,
        formula,
        tail_rule: moments.x.tail,
        provenance: moments.provenance,
    }
}

fn dependence_weight(window: &LagWindow) -> f64 {
    1.0 / (2 * window.kappa_prime - 1) as f64
}

/// `ξ_{X,Y}(h,m,n)`; for models without a cross link `Y = X` is used.
pub fn xi_cross(moments: &MomentSet, window: &LagWindow) -> Result<BoundReport> {
    let (x, y) = (&moments.x, moments.y_or_x());
    let (nu, mu) = (x.nu4.mean, y.nu4.mean);
    let from = window.kappa_prime;
    let (sx, sy) = (x.coupling_sum(from)?, y.coupling_sum(from)?);
    let leading = nu * nu * mu * mu;
    let tail = 2.0 * core::f64::consts::SQRT_2 * dependence_weight(window) * nu * mu * (mu * sx + nu * sy);
    Ok(report(moments, *window, Formula::XiCross, leading, tail))
}

/// `ξ_{X,X}(h,m,n)`.
pub fn xi_auto(moments: &MomentSet, window: &LagWindow) -> Result<BoundReport> {
    let nu = moments.x.nu4.mean;
    let sx = moments.x.coupling_sum(window.kappa_prime)?;
    let leading = nu.powi(4);
    let tail = 4.0 * core::f64::consts::SQRT_2 * dependence_weight(window) * nu.powi(3) * sx;
    Ok(report(moments, *window, Formula::XiAuto, leading, tail))
}

/// `τ_X(h,m,n)`.
pub fn tau(moments: &MomentSet, window: &LagWindow) -> Result<BoundReport> {
    let nu = moments.x.nu4.mean;
    let sx = moments.x.coupling_sum(window.kappa_prime)?;
    let leading = nu.powi(4);
    let tail = 4.0 * dependence_weight(window) * nu.powi(3) * sx;
    Ok(report(moments, *window, Formula::Tau, leading, tail))
}

/// `τ̃_X(h,m) = τ_X(h,m,m)` for a sample of size `N`.
pub fn tau_tilde(moments: &MomentSet, h: i64, m: usize, sample_size: usize) -> Result<BoundReport> {
    let window = lag_window(sample_size, h, m, m)?;
    let mut out = tau(moments, &window)?;
    out.formula = Formula::TauTilde;
    Ok(out)
}

/// Closed-form fAR(1) constants for `‖ψ‖_L = ξ < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Far1Closed {
    /// `Σ_k ν₄(X_k - X_k^(k)) ≤ 2ξ/(1-ξ)² ν₄(ε)`.
    pub coupling_sum: f64,
    /// Bound on `τ̃_X(0, m)`.
    pub tau_tilde: f64,
    /// `ν₄⁴(ε)/(1-ξ)⁴`, the limit of `tau_tilde` as `m → ∞`.
    pub limit: f64,
}

pub fn far1_closed_bounds(xi: f64, nu4_eps: f64, m: usize) -> Result<Far1Closed> {
    if !(0.0..1.0).contains(&xi) {
        return Err(Error::Domain(format!("contraction must lie in [0,1), got {xi}")));
    }
    if !(nu4_eps >= 0.0) {
        return Err(Error::Domain(format!("ν₄(ε) must be nonnegative, got {nu4_eps}")));
    }
    if m == 0 {
        return Err(Error::Domain("m must be positive".into()));
    }
    let gap = 1.0 - xi;
    let limit = nu4_eps.powi(4) / gap.powi(4);
    let decay = if m <= 2 { xi } else { xi.powi(m as i32 - 1) / (2 * m - 3) as f64 };
    Ok(Far1Closed {
        coupling_sum: 2.0 * xi / (gap * gap) * nu4_eps,
        tau_tilde: limit * (1.0 + 8.0 / gap * decay),
        limit,
    })
}

fn check_nonnegative(name: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be a nonnegative number, got {value}")))
    }
}

/// Bound on `E‖Ψ̂ - Ψ‖_S²` for `Ψ = Δ + C^h`, given
/// `f · E‖Δ̂ - Δ‖² ≤ τ` and the constant `xi` of the covariance estimator.
pub fn sum_propagation(tau: f64, f_val: f64, xi: f64, window: &LagWindow) -> Result<f64> {
    if !(f_val > 0.0) {
        return Err(Error::Domain(format!("rate f must be positive, got {f_val}")));
    }
    check_nonnegative("tau", tau)?;
    check_nonnegative("xi", xi)?;
    Ok(2.0 * tau / f_val + 2.0 * xi / window.normalization())
}

/// Bound on `E‖Ψ̂ - Ψ‖_S` for `Ψ = Δ ∘ C^h` (or `C^h ∘ Δ`).
pub fn prod_propagation(
    tau: f64,
    f_val: f64,
    xi: f64,
    window: &LagWindow,
    delta_norm: f64,
    nu2_x: f64,
    nu2_y: f64,
) -> Result<f64> {
    if !(f_val > 0.0) {
        return Err(Error::Domain(format!("rate f must be positive, got {f_val}")));
    }
    for (name, v) in [("tau", tau), ("xi", xi), ("‖Δ‖_S", delta_norm), ("ν₂(X)", nu2_x), ("ν₂(Y)", nu2_y)] {
        check_nonnegative(name, v)?;
    }
    let mn = (window.m * window.n) as f64;
    let cov_rmse = (xi / window.normalization()).sqrt();
    Ok(cov_rmse * ((tau / f_val).sqrt() + delta_norm) + (mn * tau / f_val).sqrt() * nu2_x * nu2_y)
}
