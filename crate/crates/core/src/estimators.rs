//! Empirical lagged covariance operators of `X^[m]`, `Y^[n]` and the
//! analytic population covariances of i.i.d., fAR(1) and degenerate models.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // inherent float methods take over when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hilbert::{compose, GridFunction, LinearOp};
use crate::process::{ModelKind, ModelSpec};
use crate::product::{embed, lag_window, BlockOp, LagWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovKind {
    Cross,
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovEstimate {
    pub op: BlockOp,
    pub window: LagWindow,
    pub kind: CovKind,
}

/// `(1/N') Σ_k X_k^[m] ⊗ Y_{k+h}^[n]` over `k = max{m, n-h} ..= min{N, N-h}`.
pub fn empirical_cross_cov(
    xs: &[GridFunction],
    ys: &[GridFunction],
    h: i64,
    m: usize,
    n: usize,
) -> Result<CovEstimate> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension(format!("paths of length {} and {}", xs.len(), ys.len())));
    }
    let window = lag_window(xs.len(), h, m, n)?;
    let (dx, dy) = (xs[0].space().clone(), ys[0].space().clone());
    if xs.iter().any(|x| x.space() != &dx) || ys.iter().any(|y| y.space() != &dy) {
        return Err(Error::Dimension("path values live on different grids".into()));
    }
    let (start, end) = window.summation_range();
    let mut flat = DMatrix::<f64>::zeros(n * dy.dim(), m * dx.dim());
    for k in start..=end {
        let x = embed(xs, k, m)?.stacked();
        let y = embed(ys, (k as i64 + h) as usize, n)?.stacked();
        // entrywise y_r x_c, so that the lag -h estimator of (Y, X) is the exact transpose
        for (c, xc) in x.iter().enumerate() {
            for (r, yr) in y.iter().enumerate() {
                flat[(r, c)] += yr * xc;
            }
        }
    }
    flat /= window.n_eff as f64;
    Ok(CovEstimate { op: BlockOp::from_flat(&dx, &dy, n, m, &flat)?, window, kind: CovKind::Cross })
}

/// Lag-`h` auto-covariance estimator of `X^[m]`.
pub fn empirical_auto_cov(xs: &[GridFunction], h: i64, m: usize) -> Result<CovEstimate> {
    let mut est = empirical_cross_cov(xs, xs, h, m, m)?;
    est.kind = CovKind::Auto;
    Ok(est)
}

/// Squared Hilbert-Schmidt distance `‖Ĉ - C‖_S²`.
pub fn estimation_error(est: &CovEstimate, truth: &BlockOp) -> Result<f64> {
    Ok(est.op.sub(truth)?.hs_norm_squared())
}

fn lyapunov_terms(xi: f64) -> usize {
    if xi == 0.0 {
        1
    } else {
        ((1e-12f64).ln() / (xi * xi).ln()).ceil() as usize
    }
}

/// Stationary covariance `C_X = Σ_j ψ^j C_ε (ψ*)^j` of an fAR(1) model
/// (`C_ε` for i.i.d. models).
pub fn analytic_cov_far1(model: &ModelSpec) -> Result<LinearOp> {
    let c_eps = model.innovation().covariance();
    match model.kind() {
        ModelKind::Iid => Ok(c_eps),
        ModelKind::Far if model.ar_ops().len() == 1 => {
            let xi = model.contraction().unwrap_or(f64::INFINITY);
            if !(xi < 1.0) {
                return Err(Error::Stability(format!("‖ψ‖_L = {xi} is not below 1")));
            }
            let psi = &model.ar_ops()[0];
            let psi_star = psi.adjoint();
            let mut total = c_eps.clone();
            let mut term = c_eps;
            for _ in 0..lyapunov_terms(xi) {
                term = compose(&compose(psi, &term)?, &psi_star)?;
                total = total.add(&term)?;
            }
            Ok(total)
        }
        _ => Err(Error::Oracle("stationary covariance is only available for i.i.d. and fAR(1) models")),
    }
}

/// Covariance operator of a single observation `X_k`.
pub fn marginal_covariance(model: &ModelSpec) -> Result<LinearOp> {
    match model.kind() {
        ModelKind::Degenerate => Ok(model.innovation().covariance()),
        _ => analytic_cov_far1(model),
    }
}

/// `C^g_X`: `ψ^g C_X` for `g ≥ 0`, the adjoint of `C^{-g}_X` otherwise.
fn lagged_cov(model: &ModelSpec, c_x: &LinearOp, g: i64) -> Result<LinearOp> {
    let space = c_x.domain();
    match model.kind() {
        ModelKind::Degenerate => Ok(c_x.clone()),
        ModelKind::Iid if g != 0 => Ok(LinearOp::zero(space, space)),
        ModelKind::Iid => Ok(c_x.clone()),
        _ => {
            let forward = compose(&model.ar_ops()[0].power(g.unsigned_abs() as usize)?, c_x)?;
            Ok(if g >= 0 { forward } else { forward.adjoint() })
        }
    }
}

/// Population `C^h_{X^[m], Y^[n]}` (or of `X^[m]`, `X^[n]` when `cross` is
/// false): block `(i, j)` (1-based) is `C^{h-i+j}`, composed with `Θ` for the
/// cross-linked `Y`.
pub fn analytic_block_cov(model: &ModelSpec, h: i64, m: usize, n: usize, cross: bool) -> Result<BlockOp> {
    if m == 0 || n == 0 {
        return Err(Error::Window(format!("Cartesian powers must be positive (m = {m}, n = {n})")));
    }
    let c_x = marginal_covariance(model)?;
    let theta = if cross {
        let link = model.cross_link().ok_or(Error::Oracle("model has no cross link"))?;
        Some(&link.theta)
    } else {
        None
    };
    let mut cache: Vec<(i64, LinearOp)> = Vec::new();
    BlockOp::from_fn(n, m, |i, j| {
        let g = h - i as i64 + j as i64;
        if let Some((_, op)) = cache.iter().find(|(lag, _)| *lag == g) {
            return Ok(op.clone());
        }
        let mut op = lagged_cov(model, &c_x, g)?;
        if let Some(theta) = theta {
            op = compose(theta, &op)?;
        }
        cache.push((g, op.clone()));
        Ok(op)
    })
}

/// Population `ν₂(X_0)` and, for cross-linked models, `ν₂(Y_0)`.
pub fn analytic_nu2(model: &ModelSpec) -> Result<(f64, Option<f64>)> {
    let c_x = marginal_covariance(model)?;
    let nu_x = c_x.trace()?.max(0.0).sqrt();
    let nu_y = match model.cross_link() {
        Some(link) => {
            let c_y = compose(&compose(&link.theta, &c_x)?, &link.theta.adjoint())?;
            Some((c_y.trace()? + link.noise.covariance().trace()?).max(0.0).sqrt())
        }
        None => None,
    };
    Ok((nu_x, nu_y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{tensor, GridSpace};
    use crate::kernels;
    use crate::process::InnovationLaw;
    use crate::product::product_tensor;
    use alloc::vec;
    use rand::{Rng, SeedableRng};

    fn random_path(space: &GridSpace, len: usize, seed: u64) -> Vec<GridFunction> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|_| GridFunction::new(space, (0..space.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
            .collect()
    }

    fn scalar_model(psi: f64) -> ModelSpec {
        let sp = GridSpace::uniform(1).unwrap();
        let law = InnovationLaw::gaussian(LinearOp::identity(&sp), 1.0).unwrap();
        ModelSpec::far1(LinearOp::identity(&sp).scale(psi), law).unwrap()
    }

    #[test]
    fn single_observation_is_a_tensor() {
        let sp = GridSpace::uniform(6).unwrap();
        let xs = random_path(&sp, 1, 1);
        let ys = random_path(&sp, 1, 2);
        let est = empirical_cross_cov(&xs, &ys, 0, 1, 1).unwrap();
        assert_eq!(est.window.n_eff, 1);
        assert!(est.op.block(0, 0).max_abs_diff(&tensor(&xs[0], &ys[0])) < 1e-15);
    }

    #[test]
    fn lag_zero_auto_is_psd() {
        let sp = GridSpace::uniform(8).unwrap();
        let xs = random_path(&sp, 20, 3);
        let est = empirical_auto_cov(&xs, 0, 1).unwrap();
        assert!(est.op.is_self_adjoint(1e-14));
        let w = est.op.weighted_flat();
        let (ev, _) = crate::linalg::symmetric_eigen(&w).unwrap();
        assert!(ev.iter().all(|&l| l >= -1e-10));
    }

    #[test]
    fn matches_brute_force_sum() {
        let sp = GridSpace::uniform(4).unwrap();
        let xs = random_path(&sp, 5, 4);
        let ys = random_path(&sp, 5, 5);
        let (h, m, n) = (1i64, 2usize, 1usize);
        let est = empirical_cross_cov(&xs, &ys, h, m, n).unwrap();
        // k runs from max{2, 0} = 2 to min{5, 4} = 4
        let mut oracle = BlockOp::zeros(&sp, &sp, n, m);
        for k in 2..=4usize {
            let x = embed(&xs, k, m).unwrap();
            let y = embed(&ys, k + 1, n).unwrap();
            oracle = oracle.add(&product_tensor(&x, &y)).unwrap();
        }
        let oracle = oracle.scale(1.0 / 3.0);
        assert!(est.op.max_abs_diff(&oracle) < 1e-12);
        assert_eq!(est.window.n_eff, 3);
    }

    #[test]
    fn adjoint_identity_is_exact() {
        let sp = GridSpace::uniform(5).unwrap();
        let xs = random_path(&sp, 12, 6);
        let ys = random_path(&sp, 12, 7);
        for (h, m, n) in [(0i64, 1usize, 1usize), (2, 3, 2), (-3, 2, 4), (1, 1, 3)] {
            let a = empirical_cross_cov(&xs, &ys, h, m, n).unwrap();
            let b = empirical_cross_cov(&ys, &xs, -h, n, m).unwrap();
            assert_eq!(a.op.adjoint(), b.op, "h={h} m={m} n={n}");
        }
    }

    #[test]
    fn auto_equals_cross_bitwise() {
        let sp = GridSpace::uniform(5).unwrap();
        let xs = random_path(&sp, 10, 8);
        let a = empirical_auto_cov(&xs, 2, 3).unwrap();
        let c = empirical_cross_cov(&xs, &xs, 2, 3, 3).unwrap();
        assert_eq!(a.op, c.op);
        assert_eq!(a.kind, CovKind::Auto);
        assert_eq!(c.kind, CovKind::Cross);
    }

    #[test]
    fn lag_zero_trace_is_mean_squared_norm() {
        let sp = GridSpace::uniform(6).unwrap();
        let xs = random_path(&sp, 15, 9);
        let m = 3;
        let est = empirical_auto_cov(&xs, 0, m).unwrap();
        let n_eff = 15 - m + 1;
        let oracle: f64 = (m..=15)
            .map(|k| (0..m).map(|i| xs[k - 1 - i].norm_squared()).sum::<f64>())
            .sum::<f64>()
            / n_eff as f64;
        assert!((est.op.trace().unwrap() - oracle).abs() < 1e-12 * oracle);
    }

    #[test]
    fn extreme_lag_has_single_summand() {
        let sp = GridSpace::uniform(3).unwrap();
        let xs = random_path(&sp, 6, 10);
        let est = empirical_auto_cov(&xs, 4, 2).unwrap();
        assert_eq!(est.window.n_eff, 1);
        assert!(empirical_auto_cov(&xs, 5, 2).is_err());
    }

    #[test]
    fn error_measure() {
        let sp = GridSpace::uniform(4).unwrap();
        let xs = random_path(&sp, 8, 11);
        let est = empirical_auto_cov(&xs, 1, 2).unwrap();
        assert_eq!(estimation_error(&est, &est.op).unwrap(), 0.0);
        let zero = BlockOp::zeros(&sp, &sp, 2, 2);
        let e = estimation_error(&est, &zero).unwrap();
        assert!((e - est.op.hs_norm_squared()).abs() < 1e-14 * e);
        let flat = est.op.weighted_flat();
        assert!((e - flat.norm_squared()).abs() < 1e-12 * e);
        assert!(estimation_error(&est, &BlockOp::zeros(&sp, &sp, 1, 2)).is_err());
    }

    #[test]
    fn scalar_far1_oracles() {
        let model = scalar_model(0.5);
        let c = analytic_cov_far1(&model).unwrap();
        assert!((c.kernel()[(0, 0)] - 4.0 / 3.0).abs() < 1e-12);
        let b = analytic_block_cov(&model, 1, 2, 1, false).unwrap();
        assert!((b.block(0, 0).kernel()[(0, 0)] - 2.0 / 3.0).abs() < 1e-12);
        assert!((b.block(0, 1).kernel()[(0, 0)] - 1.0 / 3.0).abs() < 1e-12);
        let single = analytic_block_cov(&model, 0, 1, 1, false).unwrap();
        assert!(single.block(0, 0).max_abs_diff(&c) < 1e-15);
    }

    #[test]
    fn lyapunov_residual_is_small() {
        let sp = GridSpace::uniform(16).unwrap();
        let law = InnovationLaw::brownian_bridge(&sp).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let raw = LinearOp::new(&sp, &sp, DMatrix::from_fn(16, 16, |_, _| rng.gen_range(-1.0..1.0))).unwrap();
        let psi = kernels::with_op_norm(&raw, 0.8).unwrap();
        let model = ModelSpec::far1(psi.clone(), law.clone()).unwrap();
        let c = analytic_cov_far1(&model).unwrap();
        let resid = c
            .sub(&compose(&compose(&psi, &c).unwrap(), &psi.adjoint()).unwrap())
            .unwrap()
            .sub(&law.covariance())
            .unwrap();
        assert!(resid.hs_norm() < 1e-10);
        assert!(c.is_self_adjoint(1e-12));
        let zero = ModelSpec::far1(LinearOp::zero(&sp, &sp), law.clone()).unwrap();
        assert!(analytic_cov_far1(&zero).unwrap().max_abs_diff(&law.covariance()) < 1e-15);
    }

    #[test]
    fn iid_and_degenerate_block_structure() {
        let sp = GridSpace::uniform(6).unwrap();
        let law = InnovationLaw::brownian_bridge(&sp).unwrap();
        let c_eps = law.covariance();
        let iid = analytic_block_cov(&ModelSpec::iid(law.clone()), 0, 2, 2, false).unwrap();
        assert!(iid.block(0, 0).max_abs_diff(&c_eps) == 0.0 && iid.block(1, 1).max_abs_diff(&c_eps) == 0.0);
        assert_eq!(iid.block(0, 1).kernel().amax(), 0.0);
        let deg = analytic_block_cov(&ModelSpec::degenerate(law), 3, 2, 3, false).unwrap();
        assert!(deg.blocks().iter().all(|b| b.max_abs_diff(&c_eps) == 0.0));
    }

    #[test]
    fn shift_invariance_and_cross_blocks() {
        let sp = GridSpace::uniform(8).unwrap();
        let law = InnovationLaw::brownian_bridge(&sp).unwrap().normalized().unwrap();
        let psi = kernels::with_op_norm(&kernels::gaussian(&sp, 0.1).unwrap(), 0.5).unwrap();
        let theta = kernels::with_op_norm(&kernels::gaussian(&sp, 0.2).unwrap(), 0.7).unwrap();
        let model = ModelSpec::far1(psi, law.clone()).unwrap().with_cross_link(theta.clone(), law).unwrap();
        let b = analytic_block_cov(&model, -1, 3, 3, true).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!(b.block(i, j).max_abs_diff(b.block(i + 1, j + 1)) < 1e-15);
            }
        }
        let auto = analytic_block_cov(&model, -1, 3, 3, false).unwrap();
        let expected = compose(&theta, auto.block(0, 2)).unwrap();
        assert!(b.block(0, 2).max_abs_diff(&expected) < 1e-15);
        let (nx, ny) = analytic_nu2(&model).unwrap();
        assert!(b.hs_norm() <= 3.0 * nx * ny.unwrap());
        assert!(analytic_block_cov(&ModelSpec::iid(InnovationLaw::brownian_bridge(&sp).unwrap()), 0, 1, 1, true).is_err());
    }

    #[test]
    fn unsupported_oracles() {
        let sp = GridSpace::uniform(4).unwrap();
        let law = InnovationLaw::brownian_bridge(&sp).unwrap();
        let op = LinearOp::identity(&sp).scale(0.3);
        let far2 = ModelSpec::far(vec![op.clone(), op], law).unwrap();
        assert!(matches!(analytic_cov_far1(&far2), Err(Error::Oracle(_))));
        assert!(matches!(analytic_block_cov(&far2, 0, 1, 1, false), Err(Error::Oracle(_))));
    }
}
