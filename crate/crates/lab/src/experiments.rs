//! The experiments behind the command-line subcommands.

use lagcov::bounds::{self, BoundReport};
use lagcov::estimators::{analytic_block_cov, empirical_cross_cov, estimation_error};
use lagcov::hilbert::{GridFunction, LinearOp};
use lagcov::process::{
    derive_seed, moment_sample, replication_seed, simulate, summarize_moments, MomentProvenance, MomentSet,
    ModelKind, ModelSpec, PathBundle, TailRule,
};
use lagcov::product::{lag_window, BlockOp};
use lagcov::spectral::{eig, perturbation_checks};
use lagcov::stats::{mean_se, median};
use lagcov::yule_walker::{default_ridge, fma1_inversion_coeffs, yw_fit, YwFit};
use serde::Serialize;

use crate::config::{Cell, Config, Pair};
use crate::error::{LabError, LabResult};
use crate::runner::Runner;

/// Seed branch of the moment estimation behind the bounds, kept apart from
/// the replication streams so that the bound is not fitted to the same noise
/// as the error it is compared with.
pub const MOMENT_BRANCH: u64 = 0x6d6f_6d65_6e74;

/// Slack of a deterministic inequality below which it counts as violated.
pub const INEQUALITY_TOL: f64 = 1e-8;

fn provenance_name(p: MomentProvenance) -> &'static str {
    match p {
        MomentProvenance::Estimated => "estimated",
        MomentProvenance::UserCapped => "user_capped",
    }
}

fn tail_parts(rule: TailRule) -> (&'static str, Option<f64>) {
    match rule {
        TailRule::None => ("none", None),
        TailRule::Geometric { ratio } => ("geometric", Some(ratio)),
    }
}

fn paths(model: &ModelSpec, sample_size: usize, seed: u64) -> LabResult<(Vec<GridFunction>, Option<Vec<GridFunction>>)> {
    let PathBundle { xs, ys, .. } = simulate(model, sample_size, seed)?;
    Ok((xs, ys))
}

fn cell_estimate(
    xs: &[GridFunction],
    ys: Option<&[GridFunction]>,
    pair: Pair,
    cell: &Cell,
) -> LabResult<lagcov::estimators::CovEstimate> {
    let n = cell.sample_size;
    let second = match pair {
        Pair::Cross => ys.ok_or_else(|| LabError::config("cross pair requested for a model without cross link"))?,
        Pair::Auto => xs,
    };
    Ok(empirical_cross_cov(&xs[..n], &second[..n], cell.lag, cell.m, cell.n)?)
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub seed: u64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub xs: Vec<Vec<f64>>,
    pub ys: Option<Vec<Vec<f64>>>,
}

/// One path of length `max N` on the first replication stream.
pub fn run_simulate(cfg: &Config, model: &ModelSpec) -> LabResult<SimulateReport> {
    let n = *cfg.experiment.sample_sizes.iter().max().unwrap_or(&0);
    let seed = replication_seed(cfg.seed, 0);
    let (xs, ys) = paths(model, n, seed)?;
    let values = |fs: &[GridFunction]| fs.iter().map(|f| f.values().iter().copied().collect()).collect();
    Ok(SimulateReport {
        seed,
        nodes: model.space().nodes().to_vec(),
        weights: model.space().weights().to_vec(),
        xs: values(&xs),
        ys: ys.as_deref().map(values),
    })
}

// ---------------------------------------------------------------- estimate

#[derive(Debug, Clone, Serialize)]
pub struct EstimateBlock {
    pub sample_size: usize,
    pub lag: i64,
    pub m: usize,
    pub n: usize,
    pub n_eff: usize,
    /// Kernel of the estimate on the stacked grid, row by row.
    pub kernel: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub seed: u64,
    pub pair: Pair,
    pub blocks: Vec<EstimateBlock>,
}

/// Estimates for every cell from a single path.
pub fn run_estimate(cfg: &Config, model: &ModelSpec) -> LabResult<EstimateReport> {
    let n = *cfg.experiment.sample_sizes.iter().max().unwrap_or(&0);
    let seed = replication_seed(cfg.seed, 0);
    let (xs, ys) = paths(model, n, seed)?;
    let pair = cfg.pair();
    let blocks = cfg
        .cells()
        .iter()
        .map(|cell| {
            let est = cell_estimate(&xs, ys.as_deref(), pair, cell)?;
            let flat = est.op.flatten();
            Ok(EstimateBlock {
                sample_size: cell.sample_size,
                lag: cell.lag,
                m: cell.m,
                n: cell.n,
                n_eff: est.window.n_eff,
                kernel: flat.row_iter().map(|r| r.iter().copied().collect()).collect(),
            })
        })
        .collect::<LabResult<_>>()?;
    Ok(EstimateReport { seed, pair, blocks })
}

// ---------------------------------------------------------------- moments and bounds

/// Moment estimates for the bounds, on their own seed branch, with user caps
/// and tail-rule overrides applied.
pub fn bound_moments(cfg: &Config, model: &ModelSpec, runner: &Runner) -> LabResult<MomentSet> {
    if model.kind() == ModelKind::Degenerate {
        return Err(LabError::config("the degenerate model has no finite coupling sums; bounds are undefined"));
    }
    let seed = derive_seed(cfg.seed, MOMENT_BRANCH);
    let horizon = cfg.bounds.horizon;
    let samples = runner.map(cfg.bounds.moment_replications, |r| Ok(moment_sample(model, seed, r as u64, horizon)?))?;
    let mut moments = summarize_moments(&samples)?.with_caps(cfg.bounds.nu4_x, cfg.bounds.nu4_y);
    if let Some(rule) = cfg.tail_rule_override() {
        moments = moments.with_tail_rule(rule);
    }
    Ok(moments)
}

/// The bound constants that apply to one cell.
pub fn cell_bounds(moments: &MomentSet, pair: Pair, cell: &Cell) -> LabResult<Vec<BoundReport>> {
    let window = lag_window(cell.sample_size, cell.lag, cell.m, cell.n)?;
    Ok(match pair {
        Pair::Cross => vec![bounds::xi_cross(moments, &window)?],
        Pair::Auto => {
            let mut out = vec![bounds::xi_auto(moments, &window)?, bounds::tau(moments, &window)?];
            if cell.m == cell.n {
                out.push(bounds::tau_tilde(moments, cell.lag, cell.m, cell.sample_size)?);
            }
            out
        }
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub sample_size: usize,
    pub lag: i64,
    pub m: usize,
    pub n: usize,
    pub n_eff: usize,
    pub kappa_prime: usize,
    pub formula: &'static str,
    pub value: f64,
    pub leading: f64,
    pub tail: f64,
    pub mse_bound: f64,
    pub provenance: &'static str,
    pub tail_rule: &'static str,
    pub tail_ratio: Option<f64>,
}

impl BoundRow {
    fn new(cell: &Cell, b: &BoundReport) -> Self {
        let (tail_rule, tail_ratio) = tail_parts(b.tail_rule);
        BoundRow {
            sample_size: cell.sample_size,
            lag: cell.lag,
            m: cell.m,
            n: cell.n,
            n_eff: b.window.n_eff,
            kappa_prime: b.window.kappa_prime,
            formula: b.formula.as_str(),
            value: b.value,
            leading: b.leading_term,
            tail: b.tail_term,
            mse_bound: b.mse_bound(),
            provenance: provenance_name(b.provenance),
            tail_rule,
            tail_ratio,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentSummary {
    pub replications: usize,
    pub nu4_eps: f64,
    pub nu2_x: f64,
    pub nu4_x: f64,
    pub nu4_x_se: f64,
    pub coupling_x: Vec<f64>,
    pub nu4_y: Option<f64>,
    pub coupling_y: Option<Vec<f64>>,
}

impl MomentSummary {
    pub fn new(m: &MomentSet) -> Self {
        MomentSummary {
            replications: m.replications,
            nu4_eps: m.nu4_eps.mean,
            nu2_x: m.x.nu2.mean,
            nu4_x: m.x.nu4.mean,
            nu4_x_se: m.x.nu4.se,
            coupling_x: m.x.coupling_values(),
            nu4_y: m.y.as_ref().map(|y| y.nu4.mean),
            coupling_y: m.y.as_ref().map(|y| y.coupling_values()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsTable {
    pub seed: u64,
    pub pair: Pair,
    pub moments: MomentSummary,
    pub rows: Vec<BoundRow>,
}

pub fn run_bounds(cfg: &Config, model: &ModelSpec, runner: &Runner) -> LabResult<BoundsTable> {
    let moments = bound_moments(cfg, model, runner)?;
    let pair = cfg.pair();
    let mut rows = Vec::new();
    for cell in cfg.cells() {
        for b in cell_bounds(&moments, pair, &cell)? {
            rows.push(BoundRow::new(&cell, &b));
        }
    }
    Ok(BoundsTable { seed: cfg.seed, pair, moments: MomentSummary::new(&moments), rows })
}

// ---------------------------------------------------------------- verify

/// One row of the Monte Carlo comparison: the normalized mean squared error
/// `N'/(mn(2κ'-1)) · mean ‖Ĉ - C‖_S²` against a bound constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub sample_size: usize,
    pub lag: i64,
    pub m: usize,
    pub n: usize,
    pub n_eff: usize,
    pub kappa_prime: usize,
    pub nmse: f64,
    pub se: f64,
    pub formula: &'static str,
    pub bound: f64,
    pub leading: f64,
    pub tail: f64,
    /// `nmse ≤ bound + 3·se`.
    pub pass: bool,
    pub provenance: &'static str,
    pub tail_rule: &'static str,
    pub tail_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct McSummary {
    pub seed: u64,
    pub replications: usize,
    pub pair: Pair,
    pub moments: MomentSummary,
    pub rows: Vec<SummaryRow>,
}

impl McSummary {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

pub fn run_verify(cfg: &Config, model: &ModelSpec, runner: &Runner) -> LabResult<McSummary> {
    let pair = cfg.pair();
    let cells = cfg.cells();
    let truths = cells
        .iter()
        .map(|c| Ok(analytic_block_cov(model, c.lag, c.m, c.n, pair == Pair::Cross)?))
        .collect::<LabResult<Vec<BlockOp>>>()?;
    let moments = bound_moments(cfg, model, runner)?;
    let mut sizes: Vec<usize> = cells.iter().map(|c| c.sample_size).collect();
    sizes.sort_unstable();
    sizes.dedup();

    let reps = cfg.experiment.replications;
    let errors: Vec<Vec<f64>> = runner.map(reps, |r| {
        let seed = replication_seed(cfg.seed, r as u64);
        let mut out = vec![0.0; cells.len()];
        for &size in &sizes {
            let (xs, ys) = paths(model, size, seed)?;
            for (i, cell) in cells.iter().enumerate().filter(|(_, c)| c.sample_size == size) {
                let est = cell_estimate(&xs, ys.as_deref(), pair, cell)?;
                out[i] = estimation_error(&est, &truths[i])?;
            }
        }
        Ok(out)
    })?;

    let mut rows = Vec::new();
    for (i, cell) in cells.iter().enumerate() {
        let column: Vec<f64> = errors.iter().map(|e| e[i]).collect();
        let s = mean_se(&column);
        for b in cell_bounds(&moments, pair, cell)? {
            let scale = b.window.normalization();
            let (nmse, se) = (scale * s.mean, scale * s.se);
            let (tail_rule, tail_ratio) = tail_parts(b.tail_rule);
            rows.push(SummaryRow {
                sample_size: cell.sample_size,
                lag: cell.lag,
                m: cell.m,
                n: cell.n,
                n_eff: b.window.n_eff,
                kappa_prime: b.window.kappa_prime,
                nmse,
                se,
                formula: b.formula.as_str(),
                bound: b.value,
                leading: b.leading_term,
                tail: b.tail_term,
                pass: nmse <= b.value + 3.0 * se,
                provenance: provenance_name(b.provenance),
                tail_rule,
                tail_ratio,
            });
        }
    }
    Ok(McSummary { seed: cfg.seed, replications: reps, pair, moments: MomentSummary::new(&moments), rows })
}

// ---------------------------------------------------------------- eigen

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenRow {
    pub sample_size: usize,
    pub m: usize,
    pub replication: usize,
    pub j: usize,
    pub lambda: f64,
    pub lambda_hat: f64,
    pub gap: f64,
    pub op_error: f64,
    pub function_error: f64,
    pub eigenvalue_slack: f64,
    /// Absent when the gap is below the tolerance.
    pub eigenfunction_slack: Option<f64>,
    pub uniform_slack: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenReport {
    pub seed: u64,
    pub replications: usize,
    pub violations: usize,
    pub min_slack: f64,
    pub rows: Vec<EigenRow>,
}

/// Perturbation inequalities for the empirical eigenpairs of `Ĉ_{X^[m]}`,
/// for every sample size and every `m` of the grid.
pub fn run_eigen(cfg: &Config, model: &ModelSpec, runner: &Runner) -> LabResult<EigenReport> {
    let mut ms = cfg.experiment.m.clone();
    ms.sort_unstable();
    ms.dedup();
    let truths = ms
        .iter()
        .map(|&m| {
            let c = analytic_block_cov(model, 0, m, m, false)?;
            let sys = eig(&c)?;
            Ok((c, sys))
        })
        .collect::<LabResult<Vec<_>>>()?;
    let k = cfg.eigen.k;
    let mut rows = Vec::new();
    for &size in &cfg.experiment.sample_sizes {
        let per_rep: Vec<Vec<EigenRow>> = runner.map(cfg.experiment.replications, |r| {
            let (xs, _) = paths(model, size, replication_seed(cfg.seed, r as u64))?;
            let mut out = Vec::new();
            for (&m, (c, truth)) in ms.iter().zip(&truths) {
                let c_hat = empirical_cross_cov(&xs, &xs, 0, m, m)?.op;
                let est = eig(&c_hat)?;
                let rep = perturbation_checks(&est, truth, &c_hat, c, k)?;
                for j in 0..rep.eigenvalue.len() {
                    out.push(EigenRow {
                        sample_size: size,
                        m,
                        replication: r,
                        j: j + 1,
                        lambda: truth.values[j],
                        lambda_hat: est.values[j],
                        gap: truth.gaps[j],
                        op_error: rep.op_error,
                        function_error: rep.function_errors[j],
                        eigenvalue_slack: rep.eigenvalue[j],
                        eigenfunction_slack: rep.eigenfunction[j],
                        uniform_slack: rep.uniform[j],
                    });
                }
            }
            Ok(out)
        })?;
        rows.extend(per_rep.into_iter().flatten());
    }
    let slacks = || {
        rows.iter()
            .flat_map(|r| [Some(r.eigenvalue_slack), r.eigenfunction_slack, r.uniform_slack])
            .flatten()
    };
    let violations = slacks().filter(|s| *s < -INEQUALITY_TOL).count();
    let min_slack = slacks().fold(f64::INFINITY, f64::min);
    Ok(EigenReport { seed: cfg.seed, replications: cfg.experiment.replications, violations, min_slack, rows })
}

// ---------------------------------------------------------------- Yule-Walker

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YwRow {
    pub sample_size: usize,
    pub replication: usize,
    pub order: usize,
    pub ridge: f64,
    pub rank: usize,
    pub residual: f64,
    pub condition: f64,
    pub leading_norm: f64,
    /// `‖ψ̂_1 - ψ_1‖_S` when the model has a known autoregressive row.
    pub leading_distance: Option<f64>,
    pub warnings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YwTrend {
    pub sample_size: usize,
    pub median_leading_distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct YwReport {
    pub seed: u64,
    pub rows: Vec<YwRow>,
    pub trend: Vec<YwTrend>,
    /// Medians strictly decreasing in `N`; absent without an oracle or with a
    /// single sample size.
    pub decreasing: Option<bool>,
}

/// `ψ_1` of the autoregressive representation, where it is known: the first
/// fAR operator, zero for white noise, `β` for an invertible fMA(1).
pub fn leading_oracle(model: &ModelSpec) -> LabResult<Option<LinearOp>> {
    let space = model.space();
    Ok(match model.kind() {
        ModelKind::Iid => Some(LinearOp::zero(space, space)),
        ModelKind::Far => Some(model.ar_ops()[0].clone()),
        ModelKind::Farma if model.ar_ops().is_empty() && model.ma_ops().len() == 1 => {
            Some(fma1_inversion_coeffs(&model.ma_ops()[0], 1)?.remove(0))
        }
        _ => None,
    })
}

pub fn yw_fit_for(cfg: &Config, xs: &[GridFunction]) -> LabResult<YwFit> {
    let ridge = cfg.yule_walker.ridge.unwrap_or_else(|| default_ridge(xs.len()));
    Ok(yw_fit(xs, cfg.yule_walker.order, ridge, cfg.yule_walker.rank)?)
}

pub fn run_ywfit(cfg: &Config, model: &ModelSpec, runner: &Runner) -> LabResult<YwReport> {
    let oracle = leading_oracle(model)?;
    let mut rows = Vec::new();
    let mut trend = Vec::new();
    for &size in &cfg.experiment.sample_sizes {
        let block: Vec<YwRow> = runner.map(cfg.experiment.replications, |r| {
            let (xs, _) = paths(model, size, replication_seed(cfg.seed, r as u64))?;
            let fit = yw_fit_for(cfg, &xs)?;
            let lead = fit.coefficient(1);
            let leading_distance = match &oracle {
                Some(psi) => Some(lead.sub(psi)?.hs_norm()),
                None => None,
            };
            Ok(YwRow {
                sample_size: size,
                replication: r,
                order: fit.order(),
                ridge: fit.ridge,
                rank: fit.rank,
                residual: fit.diagnostics.residual,
                condition: fit.diagnostics.condition,
                leading_norm: lead.hs_norm(),
                leading_distance,
                warnings: fit.diagnostics.warnings.len(),
            })
        })?;
        if oracle.is_some() {
            let d: Vec<f64> = block.iter().filter_map(|r| r.leading_distance).collect();
            trend.push(YwTrend { sample_size: size, median_leading_distance: median(&d) });
        }
        rows.extend(block);
    }
    let decreasing = (trend.len() >= 2).then(|| {
        let mut sorted = trend.clone();
        sorted.sort_by_key(|t| t.sample_size);
        sorted.windows(2).all(|w| w[1].median_leading_distance < w[0].median_leading_distance)
    });
    Ok(YwReport { seed: cfg.seed, rows, trend, decreasing })
}
