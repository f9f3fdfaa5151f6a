//! Eigenelements of self-adjoint block operators and the perturbation
//! inequalities relating estimated and population eigenelements:
//!
//! * `|λ̂_j - λ_j| ≤ ‖Ĉ - C‖_L`,
//! * `‖ĉ'_j - c_j‖ ≤ 2√2/α_j · ‖Ĉ - C‖_L` with `ĉ'_j = sgn⟨ĉ_j, c_j⟩ ĉ_j`,
//! * `sup_{j≤k} ‖ĉ'_j - c_j‖ ≤ 2√2 Λ_k ‖Ĉ - C‖_L`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DVector;
#[allow(unused_imports)] // inherent float methods take over when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::estimators::{analytic_block_cov, marginal_covariance};
use crate::linalg;
use crate::process::ModelSpec;
use crate::product::{product_inner, product_tensor, BlockOp, ProductElement};

/// Gaps at or below this are treated as multiplicities.
pub const GAP_TOL: f64 = 1e-6;
const SYMMETRY_TOL: f64 = 1e-8;
const CLIP_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// `λ_1 ≥ λ_2 ≥ …`; values in `[-1e-10, 0)` are clipped to zero.
    pub values: Vec<f64>,
    /// Orthonormal eigenfunctions `c_j`.
    pub functions: Vec<ProductElement>,
    /// `α_1 = λ_1 - λ_2`, `α_j = min{λ_{j-1} - λ_j, λ_j - λ_{j+1}}`.
    pub gaps: Vec<f64>,
    /// `Λ_k = max_{j≤k} (λ_j - λ_{j+1})^{-1}`.
    pub lambda_caps: Vec<f64>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `λ_j - λ_{j+1}` (1-based `j`), with `λ` beyond the last value taken as zero.
    pub fn spacing(&self, j: usize) -> f64 {
        let next = self.values.get(j).copied().unwrap_or(0.0);
        self.values[j - 1] - next
    }

    /// `Σ_{j≤rank} λ_j c_j ⊗ c_j`.
    pub fn reconstruct(&self, rank: usize) -> Result<BlockOp> {
        let first = self.functions.first().ok_or_else(|| Error::Dimension("empty eigensystem".into()))?;
        let (space, power) = (first.space().clone(), first.power());
        let mut out = BlockOp::zeros(&space, &space, power, power);
        for (lambda, c) in self.values.iter().zip(&self.functions).take(rank) {
            out = out.add(&product_tensor(c, c).scale(*lambda))?;
        }
        Ok(out)
    }
}

fn gaps_and_caps(values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let spacing = |j: usize| values[j] - values.get(j + 1).copied().unwrap_or(0.0);
    let gaps = (0..values.len())
        .map(|j| if j == 0 { spacing(0) } else { spacing(j - 1).min(spacing(j)) })
        .collect();
    let mut caps = Vec::with_capacity(values.len());
    let mut worst = 0.0f64;
    for j in 0..values.len() {
        let s = spacing(j);
        worst = worst.max(if s > 0.0 { 1.0 / s } else { f64::INFINITY });
        caps.push(worst);
    }
    (gaps, caps)
}

/// Eigendecomposition of a self-adjoint `C: H^m → H^m`.
pub fn eig(c: &BlockOp) -> Result<EigenSystem> {
    if c.rows() != c.cols() || c.domain() != c.codomain() {
        return Err(Error::Domain("eigendecomposition needs an endomorphism".into()));
    }
    let asym = c.sub(&c.adjoint())?.hs_norm();
    if asym >= SYMMETRY_TOL {
        return Err(Error::Domain(format!("operator is not self-adjoint (‖C - C*‖_S = {asym:e})")));
    }
    let space = c.domain().clone();
    let power = c.rows();
    let (raw, vectors) = linalg::symmetric_eigen(&c.weighted_flat())?;
    let d = space.dim();
    let inv_sqrt = DVector::from_iterator(power * d, (0..power * d).map(|i| 1.0 / space.sqrt_weights()[i % d]));
    let values: Vec<f64> = raw.iter().map(|&l| if (-CLIP_TOL..0.0).contains(&l) { 0.0 } else { l }).collect();
    let functions = vectors
        .iter()
        .map(|u| ProductElement::from_stacked(&space, power, &u.component_mul(&inv_sqrt)))
        .collect::<Result<Vec<_>>>()?;
    let (gaps, lambda_caps) = gaps_and_caps(&values);
    Ok(EigenSystem { values, functions, gaps, lambda_caps })
}

/// `sgn⟨ĉ, c⟩ ĉ` with `sgn(0) = +1`.
pub fn sign_align(c_hat: &ProductElement, c: &ProductElement) -> Result<ProductElement> {
    Ok(if product_inner(c_hat, c)? >= 0.0 { c_hat.clone() } else { c_hat.scale(-1.0) })
}

/// Slack `RHS - LHS` of each inequality; `None` where a gap is too small
/// for the inequality to apply.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    /// `‖Ĉ - C‖_L`.
    pub op_error: f64,
    pub eigenvalue: Vec<f64>,
    pub eigenfunction: Vec<Option<f64>>,
    pub uniform: Vec<Option<f64>>,
    /// `‖ĉ'_j - c_j‖`.
    pub function_errors: Vec<f64>,
}

impl PerturbationReport {
    /// Smallest slack over all checked inequalities.
    pub fn min_slack(&self) -> f64 {
        self.eigenvalue
            .iter()
            .chain(self.eigenfunction.iter().flatten())
            .chain(self.uniform.iter().flatten())
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.min_slack() >= -tol
    }

    pub fn skipped(&self) -> usize {
        self.eigenfunction.iter().chain(&self.uniform).filter(|s| s.is_none()).count()
    }
}

/// Check the three inequality families for `j, k ≤ k_max`.
pub fn perturbation_checks(
    est: &EigenSystem,
    truth: &EigenSystem,
    c_hat: &BlockOp,
    c: &BlockOp,
    k_max: usize,
) -> Result<PerturbationReport> {
    if est.len() != truth.len() {
        return Err(Error::Dimension(format!("{} vs {} eigenpairs", est.len(), truth.len())));
    }
    let op_error = c_hat.sub(c)?.op_norm()?;
    let k_max = k_max.min(truth.len());
    let bound = 2.0 * core::f64::consts::SQRT_2 * op_error;
    let mut report = PerturbationReport {
        op_error,
        eigenvalue: Vec::with_capacity(k_max),
        eigenfunction: Vec::with_capacity(k_max),
        uniform: Vec::with_capacity(k_max),
        function_errors: Vec::with_capacity(k_max),
    };
    let mut worst_fn = 0.0f64;
    let mut gapped = true;
    for j in 0..k_max {
        report.eigenvalue.push(op_error - (est.values[j] - truth.values[j]).abs());
        let aligned = sign_align(&est.functions[j], &truth.functions[j])?;
        let err = aligned.sub(&truth.functions[j])?.norm();
        report.function_errors.push(err);
        worst_fn = worst_fn.max(err);
        let alpha = truth.gaps[j];
        report.eigenfunction.push((alpha > GAP_TOL).then(|| bound / alpha - err));
        gapped &= truth.spacing(j + 1) > GAP_TOL;
        report.uniform.push(gapped.then(|| bound * truth.lambda_caps[j] - worst_fn));
    }
    Ok(report)
}

/// `(‖C_{X^[m]}‖_N, m ‖C_X‖_N)` from the analytic covariances.
pub fn nuclear_identity_check(model: &ModelSpec, m: usize) -> Result<(f64, f64)> {
    let block = analytic_block_cov(model, 0, m, m, false)?;
    let single = marginal_covariance(model)?;
    Ok((block.norms()?.nuclear, m as f64 * single.norms()?.nuclear))
}

/// Bound `λ_j(m) ≤ factor · λ_j(1)` for a diagonal fAR(1) model with
/// `ψ e_j = ψ_j e_j`: the largest row sum of the Toeplitz matrix
/// `(ψ_j^{|i-l|})_{i,l≤m}`, i.e. `max_ℓ [1 + ψ_j(1 - ψ_j^{ℓ-1} - ψ_j^{m-ℓ})]/(1 - ψ_j)`.
/// The maximum sits at the middle row; it tends to `(1 + ψ_j)/(1 - ψ_j)`.
pub fn commuting_far_eigbound(psi: f64, m: usize) -> Result<f64> {
    if !(psi > 0.0 && psi < 1.0) {
        return Err(Error::Domain(format!("ψ_j must lie in (0,1), got {psi}")));
    }
    if m == 0 {
        return Err(Error::Domain("m must be positive".into()));
    }
    let row = |l: usize| (1.0 + psi * (1.0 - psi.powi(l as i32 - 1) - psi.powi((m - l) as i32))) / (1.0 - psi);
    Ok((1..=m).map(row).fold(f64::NEG_INFINITY, f64::max))
}

/// Eigenvalues of the scalar Toeplitz block `(ψ^{|i-l|} λ)_{i,l≤m}`.
pub fn lag_toeplitz_eigenvalues(psi: f64, lambda: f64, m: usize) -> Result<Vec<f64>> {
    let t = nalgebra::DMatrix::from_fn(m, m, |i, l| psi.powi((i as i32 - l as i32).abs()) * lambda);
    Ok(linalg::symmetric_eigen(&t)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{analytic_cov_far1, empirical_auto_cov};
    use crate::hilbert::{brownian_bridge_eigenfunctions, tensor, GridFunction, LinearOp};
    use crate::kernels;
    use crate::process::{simulate, InnovationLaw};
    use alloc::vec;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};

    use crate::hilbert::GridSpace;

    fn sp(d: usize) -> GridSpace {
        GridSpace::uniform(d).unwrap()
    }

    #[test]
    fn rank_one() {
        let space = sp(16);
        let x = GridFunction::from_fn(&space, |t| t);
        let x = x.scale(1.0 / x.norm());
        let sys = eig(&BlockOp::single(tensor(&x, &x))).unwrap();
        assert!((sys.values[0] - 1.0).abs() < 1e-12);
        assert!(sys.values[1..].iter().all(|v| v.abs() < 1e-12));
        let c1 = sys.functions[0].component(0);
        assert!((crate::hilbert::inner(c1, &x).unwrap().abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_dense_solver_and_reconstructs() {
        let space = sp(8);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let a = DMatrix::from_fn(8, 8, |_, _| rng.gen_range(-1.0..1.0));
        let weighted = &a * a.transpose();
        let op = LinearOp::from_weighted_matrix(&space, &space, weighted.clone()).unwrap();
        let sys = eig(&BlockOp::single(op.clone())).unwrap();
        let mut oracle: Vec<f64> = weighted.symmetric_eigenvalues().iter().copied().collect();
        oracle.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in sys.values.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10);
        }
        for i in 0..8 {
            for j in 0..8 {
                let ip = product_inner(&sys.functions[i], &sys.functions[j]).unwrap();
                assert!((ip - if i == j { 1.0 } else { 0.0 }).abs() < 1e-8);
            }
        }
        let back = sys.reconstruct(8).unwrap();
        assert!(back.sub(&BlockOp::single(op)).unwrap().hs_norm() < 1e-8);
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let space = sp(4);
        let op = LinearOp::from_kernel_fn(&space, &space, |s, t| s - 2.0 * t);
        assert!(matches!(eig(&BlockOp::single(op)), Err(Error::Domain(_))));
    }

    #[test]
    fn gap_sequences() {
        let (gaps, caps) = gaps_and_caps(&[4.0, 2.0, 1.5, 0.0]);
        assert_eq!(gaps, vec![2.0, 0.5, 0.5, 0.0]);
        assert_eq!(caps, vec![0.5, 2.0, 2.0, f64::INFINITY]);
    }

    #[test]
    fn degenerate_model_eigenstructure() {
        // λ_j(1) = j^{-2}: the eigenvalues of C_{X^[m]} are m j^{-2}
        let space = sp(64);
        let basis = brownian_bridge_eigenfunctions(&space, 6);
        let coeffs: Vec<f64> = (1..=6).map(|j| 1.0 / (j * j) as f64).collect();
        let law = InnovationLaw::gaussian(kernels::spectral(&basis, &coeffs).unwrap(), 1.0).unwrap();
        let model = ModelSpec::degenerate(law);
        let m = 3;
        let sys = eig(&analytic_block_cov(&model, 0, m, m, false).unwrap()).unwrap();
        for (j, (value, c)) in sys.values.iter().zip(coeffs).enumerate() {
            assert!((value - m as f64 * c).abs() < 1e-10, "j={j}");
        }
        assert!(sys.values[6..].iter().all(|v| v.abs() < 1e-10));
        // Λ_k = k(k+1)²/(m(2 + 1/k))
        for k in 1..=5usize {
            let kf = k as f64;
            let expected = kf * (kf + 1.0).powi(2) / (m as f64 * (2.0 + 1.0 / kf));
            assert!((sys.lambda_caps[k - 1] - expected).abs() < 1e-8 * expected, "k={k}");
        }
        let one = eig(&analytic_block_cov(&model, 0, 1, 1, false).unwrap()).unwrap();
        assert!((one.lambda_caps[1] - 7.2).abs() < 1e-8);
    }

    #[test]
    fn sign_alignment() {
        let space = sp(8);
        let c = ProductElement::new(vec![GridFunction::from_fn(&space, |t| t)]).unwrap();
        assert_eq!(sign_align(&c.scale(-1.0), &c).unwrap(), c);
        let orth = ProductElement::new(vec![GridFunction::from_fn(&space, |t| t - 0.5)]).unwrap();
        let flat = ProductElement::new(vec![GridFunction::from_fn(&space, |_| 1.0)]).unwrap();
        assert!(product_inner(&orth, &flat).unwrap().abs() < 1e-15);
        let kept = sign_align(&orth, &flat).unwrap();
        assert_eq!(kept, orth);
    }

    #[test]
    fn identical_operators_have_full_slack() {
        let space = sp(16);
        let law = InnovationLaw::brownian_bridge(&space).unwrap();
        let c = BlockOp::single(law.covariance());
        let sys = eig(&c).unwrap();
        let r = perturbation_checks(&sys, &sys, &c, &c, 5).unwrap();
        assert_eq!(r.op_error, 0.0);
        assert!(r.eigenvalue.iter().all(|&s| s == 0.0));
        assert!(r.holds(0.0));
        assert_eq!(r.skipped(), 0);
    }

    #[test]
    fn scalar_case_is_tight() {
        let space = sp(1);
        let c = BlockOp::single(LinearOp::identity(&space).scale(2.0));
        let c_hat = BlockOp::single(LinearOp::identity(&space).scale(2.5));
        let r = perturbation_checks(&eig(&c_hat).unwrap(), &eig(&c).unwrap(), &c_hat, &c, 1).unwrap();
        assert!(r.eigenvalue[0].abs() < 1e-15);
    }

    #[test]
    fn far1_replication_satisfies_inequalities() {
        let space = sp(16);
        let law = InnovationLaw::brownian_bridge(&space).unwrap().normalized().unwrap();
        let psi = kernels::with_op_norm(&kernels::gaussian(&space, 0.1).unwrap(), 0.5).unwrap();
        let model = ModelSpec::far1(psi, law).unwrap();
        let c = BlockOp::single(analytic_cov_far1(&model).unwrap());
        let truth = eig(&c).unwrap();
        let path = simulate(&model, 400, 17).unwrap();
        let c_hat = empirical_auto_cov(&path.xs, 0, 1).unwrap().op;
        let r = perturbation_checks(&eig(&c_hat).unwrap(), &truth, &c_hat, &c, 5).unwrap();
        assert!(r.holds(1e-8), "{r:?}");
    }

    #[test]
    fn iid_multiplicity_is_skipped() {
        let space = sp(8);
        let law = InnovationLaw::brownian_bridge(&space).unwrap();
        let c = analytic_block_cov(&ModelSpec::iid(law), 0, 2, 2, false).unwrap();
        let sys = eig(&c).unwrap();
        let r = perturbation_checks(&sys, &sys, &c, &c, 3).unwrap();
        assert!(r.eigenfunction[0].is_none());
        assert!(r.uniform.iter().all(Option::is_none));
    }

    #[test]
    fn nuclear_identity() {
        let space = sp(16);
        let law = InnovationLaw::brownian_bridge(&space).unwrap();
        let psi = kernels::with_op_norm(&kernels::gaussian(&space, 0.1).unwrap(), 0.5).unwrap();
        let far = ModelSpec::far1(psi, law.clone()).unwrap();
        for (model, m) in [(ModelSpec::iid(law.clone()), 3), (far.clone(), 1), (far, 4)] {
            let (lhs, rhs) = nuclear_identity_check(&model, m).unwrap();
            assert!((lhs - rhs).abs() < 1e-8 * rhs, "m={m}: {lhs} vs {rhs}");
        }
        let iid_rhs = 3.0 * law.covariance().norms().unwrap().nuclear;
        let (lhs, _) = nuclear_identity_check(&ModelSpec::iid(law), 3).unwrap();
        assert!((lhs - iid_rhs).abs() < 1e-10 * iid_rhs);
    }

    #[test]
    fn commuting_factor() {
        assert!((commuting_far_eigbound(0.5, 3).unwrap() - 2.0).abs() < 1e-15);
        assert!((commuting_far_eigbound(0.5, 200).unwrap() - 3.0).abs() < 1e-12);
        assert!((commuting_far_eigbound(0.5, 2).unwrap() - 1.5).abs() < 1e-15);
        assert!(commuting_far_eigbound(1.0, 3).is_err());
        for m in 1..=12usize {
            let bound = commuting_far_eigbound(0.5, m).unwrap();
            let top = lag_toeplitz_eigenvalues(0.5, 1.0, m).unwrap()[0];
            assert!(top <= bound + 1e-12, "m={m}: {top} > {bound}");
            if m % 2 == 1 {
                let printed = (1.0 + 0.5 * (1.0 - 2.0 * 0.5f64.powi(m.div_ceil(2) as i32 - 1))) / 0.5;
                assert!((printed - bound).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn diagonal_far_blocks_respect_factor() {
        let space = sp(32);
        let basis = brownian_bridge_eigenfunctions(&space, 10);
        let law = InnovationLaw::gaussian(kernels::spectral(&basis, &[1.0; 10]).unwrap(), 1.0).unwrap();
        let psi = kernels::spectral(&basis, &[0.5; 10]).unwrap();
        let model = ModelSpec::far1(psi, law).unwrap();
        let c_x = analytic_cov_far1(&model).unwrap();
        let m = 5;
        let block = analytic_block_cov(&model, 0, m, m, false).unwrap();
        let sys = eig(&block).unwrap();
        let lambda1 = crate::hilbert::inner(&c_x.apply(&basis[0]).unwrap(), &basis[0]).unwrap();
        assert!((lambda1 - 4.0 / 3.0).abs() < 1e-10);
        let factor = commuting_far_eigbound(0.5, m).unwrap();
        assert!(sys.values[0] <= factor * lambda1 + 1e-8);
        let top = lag_toeplitz_eigenvalues(0.5, lambda1, m).unwrap()[0];
        assert!((sys.values[0] - top).abs() < 1e-8);
    }
}
