//! Named property suites run by `lagcov suite NAME`.

use lagcov::bounds::{far1_closed_bounds, sum_propagation, tau_tilde, xi_cross};
use lagcov::estimators::{analytic_block_cov, analytic_cov_far1, empirical_auto_cov, empirical_cross_cov};
use lagcov::hilbert::{brownian_bridge_eigenfunctions, compose, inner, tensor, GridFunction, GridSpace, LinearOp};
use lagcov::kernels;
use lagcov::process::{
    replication_seed, simulate, InnovationLaw, MomentProvenance, MomentSet, ModelSpec,
    SeriesMoments, TailRule,
};
use lagcov::product::{embed, lag_window, product_tensor, ProductElement};
use lagcov::spectral::{commuting_far_eigbound, eig, lag_toeplitz_eigenvalues, nuclear_identity_check, perturbation_checks};
use lagcov::stats::{median, MeanSe};
use lagcov::yule_walker::{default_ridge, fma1_inversion_coeffs, yw_fit, yw_fit_truncated};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::LabResult;
use crate::experiments::INEQUALITY_TOL;
use crate::runner::Runner;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteName {
    Invariants,
    Eigen,
    Yulewalker,
    BoundsClosedForm,
}

impl SuiteName {
    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::Invariants => "invariants",
            SuiteName::Eigen => "eigen",
            SuiteName::Yulewalker => "yulewalker",
            SuiteName::BoundsClosedForm => "bounds-closed-form",
        }
    }
}

/// One property check. For tolerance checks `value` is the observed
/// discrepancy and `limit` the allowed one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: SuiteName,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn within(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.0.push(Check { name: name.into(), passed: value <= limit, value, limit, detail: String::new() });
    }

    fn close(&mut self, name: impl Into<String>, got: f64, want: f64, tol: f64) {
        let diff = (got - want).abs();
        self.0.push(Check {
            name: name.into(),
            passed: diff <= tol,
            value: diff,
            limit: tol,
            detail: format!("got {got}, expected {want}"),
        });
    }

    fn holds(&mut self, name: impl Into<String>, ok: bool, detail: impl Into<String>) {
        let value = if ok { 0.0 } else { 1.0 };
        self.0.push(Check { name: name.into(), passed: ok, value, limit: 0.0, detail: detail.into() });
    }
}

pub fn run_suite(name: SuiteName, seed: u64, runner: &Runner) -> LabResult<SuiteReport> {
    let mut c = Checks::default();
    match name {
        SuiteName::Invariants => invariants(&mut c, seed, runner)?,
        SuiteName::Eigen => eigen(&mut c, seed)?,
        SuiteName::Yulewalker => yulewalker(&mut c, seed)?,
        SuiteName::BoundsClosedForm => bounds_closed_form(&mut c)?,
    }
    Ok(SuiteReport { suite: name, seed, checks: c.0 })
}

fn random_function(space: &GridSpace, rng: &mut ChaCha8Rng) -> GridFunction {
    GridFunction::new(space, (0..space.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("matching length")
}

fn random_op(space: &GridSpace, rng: &mut ChaCha8Rng) -> LinearOp {
    let d = space.dim();
    let kernel = nalgebra::DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
    LinearOp::new(space, space, kernel).expect("square kernel")
}

/// fAR(1) with a smooth Gaussian-kernel `ψ` and normalized bridge innovations.
pub fn reference_far1(d: usize, xi: f64) -> LabResult<ModelSpec> {
    let space = GridSpace::uniform(d)?;
    let psi = kernels::with_op_norm(&kernels::gaussian(&space, 0.1)?, xi)?;
    Ok(ModelSpec::far1(psi, InnovationLaw::brownian_bridge(&space)?.normalized()?)?)
}

fn invariants(c: &mut Checks, seed: u64, runner: &Runner) -> LabResult<()> {
    let space = GridSpace::uniform(16)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (f, g, h) = (random_function(&space, &mut rng), random_function(&space, &mut rng), random_function(&space, &mut rng));
    let a = random_op(&space, &mut rng);
    let b = random_op(&space, &mut rng);

    c.close("inner product symmetry", inner(&f, &g)?, inner(&g, &f)?, 1e-14);
    let mut sum = f.clone();
    sum.axpy(2.5, &g);
    c.close("inner product linearity", inner(&sum, &h)?, inner(&f, &h)? + 2.5 * inner(&g, &h)?, 1e-12);
    c.close("adjoint identity", inner(&a.apply(&f)?, &g)?, inner(&f, &a.adjoint().apply(&g)?)?, 1e-12);
    c.close("adjoint of composition", compose(&a, &b)?.adjoint().max_abs_diff(&compose(&b.adjoint(), &a.adjoint())?), 0.0, 1e-10);

    let t = tensor(&f, &g);
    c.close("tensor applies as <f,.>g", t.apply(&h)?.values().iter().zip(g.scale(inner(&f, &h)?).values().iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max), 0.0, 1e-12);
    let norms = t.norms()?;
    c.close("tensor Hilbert-Schmidt norm", norms.hilbert_schmidt, f.norm() * g.norm(), 1e-12);
    c.close("tensor nuclear norm", norms.nuclear, f.norm() * g.norm(), 1e-10);
    let n = a.norms()?;
    c.holds(
        "norm ordering",
        n.operator <= n.hilbert_schmidt + 1e-12 && n.hilbert_schmidt <= n.nuclear + 1e-12,
        format!("{} <= {} <= {}", n.operator, n.hilbert_schmidt, n.nuclear),
    );
    c.close("identity is neutral", compose(&LinearOp::identity(&space), &a)?.max_abs_diff(&a), 0.0, 1e-12);

    let x = ProductElement::new(vec![f.clone(), g.clone()])?;
    let y = ProductElement::new(vec![h.clone(), f.clone(), g.clone()])?;
    c.close("product norm", x.norm_squared(), f.norm_squared() + g.norm_squared(), 1e-12);
    let z = ProductElement::new(vec![g.clone(), h.clone()])?;
    let applied = product_tensor(&x, &y).apply(&z)?;
    let expect = y.scale(x.components().iter().zip(z.components()).map(|(p, q)| inner(p, q).unwrap()).sum());
    c.close("product tensor action", applied.sub(&expect)?.norm(), 0.0, 1e-12);

    let model = reference_far1(8, 0.5)?.with_cross_link(
        kernels::with_op_norm(&kernels::gaussian(&space_of(8)?, 0.2)?, 0.7)?,
        InnovationLaw::brownian_bridge(&space_of(8)?)?.normalized()?,
    )?;
    let path = simulate(&model, 40, replication_seed(seed, 0))?;
    let ys = path.ys.as_ref().expect("cross-linked model");
    let e = embed(&path.xs, 10, 3)?;
    c.holds("embedding order", e.component(0) == &path.xs[9] && e.component(2) == &path.xs[7], "X^[3]_10 = (X_10, X_9, X_8)");
    for (h, m, n) in [(0i64, 1usize, 1usize), (1, 2, 3), (-3, 3, 2), (5, 1, 2)] {
        let fwd = empirical_cross_cov(&path.xs, ys, h, m, n)?;
        let back = empirical_cross_cov(ys, &path.xs, -h, n, m)?;
        c.close(format!("estimator adjoint identity (h={h}, m={m}, n={n})"), fwd.op.adjoint().max_abs_diff(&back.op), 0.0, 1e-12);
        let w = lag_window(40, h, m, n)?;
        let (lo, hi) = w.summation_range();
        c.holds(format!("window size (h={h}, m={m}, n={n})"), hi + 1 - lo == w.n_eff, format!("[{lo}, {hi}] vs N' = {}", w.n_eff));
    }

    let again = simulate(&model, 40, replication_seed(seed, 0))?;
    c.holds("simulation is deterministic", again.xs == path.xs && again.ys == path.ys, "same seed, same path");
    let other = simulate(&model, 40, replication_seed(seed, 1))?;
    c.holds("replication streams differ", other.xs != path.xs, "distinct replication seeds");

    let serial = Runner::serial().map(16, |r| Ok(simulate(&model, 10, replication_seed(seed, r as u64))?.xs))?;
    let parallel = Runner::with_jobs(runner.jobs.max(2)).map(16, |r| Ok(simulate(&model, 10, replication_seed(seed, r as u64))?.xs))?;
    c.holds("serial and parallel replications agree", serial == parallel, "per-replication streams");
    Ok(())
}

fn space_of(d: usize) -> LabResult<GridSpace> {
    Ok(GridSpace::uniform(d)?)
}

fn eigen(c: &mut Checks, seed: u64) -> LabResult<()> {
    let model = reference_far1(16, 0.5)?;
    for m in [1usize, 2, 4, 8] {
        let (block, scaled) = nuclear_identity_check(&model, m)?;
        c.within(format!("nuclear identity m={m}"), (block - scaled).abs() / scaled, 1e-8);
    }

    let degenerate = ModelSpec::degenerate(InnovationLaw::brownian_bridge(&space_of(16)?)?);
    let single = eig(&analytic_block_cov(&degenerate, 0, 1, 1, false)?)?;
    for m in [2usize, 4, 8] {
        let sys = eig(&analytic_block_cov(&degenerate, 0, m, m, false)?)?;
        let worst = single.values.iter().zip(&sys.values).map(|(l1, lm)| (lm - m as f64 * l1).abs()).fold(0.0, f64::max);
        c.within(format!("degenerate eigenvalues scale by m={m}"), worst, 1e-8);
        let zeros = sys.values[single.len()..].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        c.within(format!("degenerate remaining eigenvalues vanish m={m}"), zeros, 1e-8);
    }

    c.close("commuting factor at psi=0.5, m=3", commuting_far_eigbound(0.5, 3)?, 2.0, 1e-12);
    c.close("commuting factor limit at psi=0.5", commuting_far_eigbound(0.5, 400)?, 3.0, 1e-10);
    for m in 1..=8usize {
        let top = lag_toeplitz_eigenvalues(0.5, 1.0, m)?[0];
        c.within(format!("Toeplitz top eigenvalue below factor m={m}"), top - commuting_far_eigbound(0.5, m)?, 1e-12);
    }
    let space = space_of(32)?;
    let basis = brownian_bridge_eigenfunctions(&space, 10);
    let law = InnovationLaw::gaussian(kernels::spectral(&basis, &[1.0; 10])?, 1.0)?;
    let diag = ModelSpec::far1(kernels::spectral(&basis, &[0.5; 10])?, law)?;
    let lambda1 = inner(&analytic_cov_far1(&diag)?.apply(&basis[0])?, &basis[0])?;
    let sys = eig(&analytic_block_cov(&diag, 0, 3, 3, false)?)?;
    c.within("commuting fAR block eigenvalue cap m=3", sys.values[0] - 2.0 * lambda1, 1e-8);
    c.close("commuting fAR dense vs Toeplitz", sys.values[0], lag_toeplitz_eigenvalues(0.5, lambda1, 3)?[0], 1e-8);

    let truth_op = lagcov::product::BlockOp::single(analytic_cov_far1(&model)?);
    let truth = eig(&truth_op)?;
    let mut worst = f64::INFINITY;
    for r in 0..20u64 {
        let path = simulate(&model, 400, replication_seed(seed, r))?;
        let c_hat = empirical_auto_cov(&path.xs, 0, 1)?.op;
        let rep = perturbation_checks(&eig(&c_hat)?, &truth, &c_hat, &truth_op, 5)?;
        worst = worst.min(rep.min_slack());
    }
    c.within("perturbation inequalities, 20 replications", -worst, INEQUALITY_TOL);
    Ok(())
}

fn yulewalker(c: &mut Checks, seed: u64) -> LabResult<()> {
    let space = space_of(16)?;
    let beta = kernels::with_op_norm(&kernels::gaussian(&space, 0.1)?, 0.4)?;
    let coeffs = fma1_inversion_coeffs(&beta, 3)?;
    c.close("fMA inversion psi_1 = beta", coeffs[0].max_abs_diff(&beta), 0.0, 1e-12);
    c.close("fMA inversion psi_2 = -beta^2", coeffs[1].max_abs_diff(&beta.power(2)?.scale(-1.0)), 0.0, 1e-10);
    c.close("fMA inversion psi_3 = beta^3", coeffs[2].max_abs_diff(&beta.power(3)?), 0.0, 1e-10);

    let model = reference_far1(8, 0.5)?;
    let path = simulate(&model, 200, replication_seed(seed, 0))?;
    let fit = yw_fit(&path.xs, 2, 0.1, 0)?;
    let target = 0.1 * fit.psi_hat.hs_norm();
    c.close("ridge residual identity", fit.diagnostics.residual, target, 1e-9 * target.max(1.0));
    let truncated = yw_fit_truncated(&path.xs, 3, 0.1, 4)?;
    c.holds("truncated fit records lower orders", truncated.diagnostics.truncation_decay.len() == 2, "m = 3");

    let white = ModelSpec::iid(InnovationLaw::brownian_bridge(&space)?.normalized()?);
    let far = reference_far1(16, 0.5)?;
    let psi = far.ar_ops()[0].clone();
    let mut noise_medians = Vec::new();
    let mut far_medians = Vec::new();
    for n in [200usize, 800] {
        let mut noise = Vec::new();
        let mut dist = Vec::new();
        for r in 0..20u64 {
            let s = replication_seed(seed ^ n as u64, r);
            let xs = simulate(&white, n, s)?.xs;
            noise.push(yw_fit(&xs, 1, default_ridge(n), 8)?.psi_hat.hs_norm());
            let xs = simulate(&far, n, s)?.xs;
            dist.push(yw_fit(&xs, 1, default_ridge(n), 8)?.coefficient(1).sub(&psi)?.hs_norm());
        }
        noise_medians.push(median(&noise));
        far_medians.push(median(&dist));
    }
    c.holds(
        "white-noise fit shrinks with N",
        noise_medians[1] < noise_medians[0],
        format!("medians {noise_medians:?} at N = 200, 800"),
    );
    c.holds(
        "fAR(1) fit error shrinks with N",
        far_medians[1] < far_medians[0],
        format!("medians {far_medians:?} at N = 200, 800"),
    );
    Ok(())
}

fn exact(v: f64) -> MeanSe {
    MeanSe { mean: v, se: 0.0 }
}

fn geometric_series(xi: f64, nu4_eps: f64, horizon: usize) -> SeriesMoments {
    // ν₄(X_k - X_k^(k)) ≤ 2 ν₄(ε) ξ^k / (1 - ξ), the closed-form fAR(1) coupling bound
    let coupling = (1..=horizon).map(|k| exact(2.0 * nu4_eps * xi.powi(k as i32) / (1.0 - xi))).collect();
    SeriesMoments {
        nu2: exact(nu4_eps / (1.0 - xi)),
        nu4: exact(nu4_eps / (1.0 - xi)),
        coupling,
        tail: TailRule::Geometric { ratio: xi },
    }
}

fn bounds_closed_form(c: &mut Checks) -> LabResult<()> {
    let (xi, nu) = (0.5, 1.0);
    let m1 = far1_closed_bounds(xi, nu, 1)?;
    c.close("coupling-sum bound", m1.coupling_sum, 4.0, 1e-12);
    c.close("tau-tilde bound m=1", m1.tau_tilde, 144.0, 1e-12);
    c.close("tau-tilde bound m=2", far1_closed_bounds(xi, nu, 2)?.tau_tilde, 144.0, 1e-12);
    c.close("tau-tilde bound m=4", far1_closed_bounds(xi, nu, 4)?.tau_tilde, 22.4, 1e-12);
    c.close("tau-tilde limit", m1.limit, 16.0, 1e-12);

    let series = geometric_series(xi, nu, 40);
    let moments = MomentSet {
        x: series,
        y: None,
        nu4_eps: exact(nu),
        replications: 0,
        provenance: MomentProvenance::UserCapped,
    };
    for m in 1..=8usize {
        let plug_in = tau_tilde(&moments, 0, m, 1000)?.value;
        c.close(format!("plug-in tau-tilde matches closed form m={m}"), plug_in, far1_closed_bounds(xi, nu, m)?.tau_tilde, 1e-9);
    }

    let halves = SeriesMoments {
        nu2: exact(1.0),
        nu4: exact(1.0),
        coupling: (1..=10).map(|k| exact(0.5f64.powi(k))).collect(),
        tail: TailRule::Geometric { ratio: 0.5 },
    };
    let both = MomentSet { x: halves.clone(), y: Some(halves), nu4_eps: exact(1.0), replications: 0, provenance: MomentProvenance::UserCapped };
    let unit = lag_window(100, 0, 1, 1)?;
    c.close("cross constant with unit couplings", xi_cross(&both, &unit)?.value, 1.0 + 4.0 * std::f64::consts::SQRT_2, 1e-12);
    let w20 = lag_window(20, 0, 1, 1)?;
    c.close("sum propagation", sum_propagation(1.0, 100.0, 2.0, &w20)?, 0.22, 1e-15);
    Ok(())
}
