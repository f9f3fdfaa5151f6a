//! Experiment configuration, read from TOML.
//!
//! ```toml
//! schema_version = 1
//! seed = 7
//!
//! [grid]
//! d = 32
//!
//! [model]
//! kind = "far"                      # iid | far | linear | farma | degenerate
//! ar = [{ type = "gaussian", bandwidth = 0.1, opnorm = 0.5 }]
//! innovation = { kernel = "brownian_bridge", normalize_nu4 = true }
//! cross = { theta = { type = "gaussian", bandwidth = 0.2, opnorm = 0.7 } }
//!
//! [experiment]
//! sample_sizes = [400]
//! lags = [0, 1, 3]
//! m = [1, 2, 3]
//! n = [1, 2, 3]
//! replications = 200
//!
//! [bounds]
//! moment_replications = 2000
//! horizon = 30
//! tail_rule = "geometric"
//! ```
//!
//! Operators are one of `gaussian { bandwidth, opnorm? }`,
//! `scaled_identity { scale }`, `zero`, `spectral { coefficients }` (in the
//! Brownian bridge eigenbasis) or `matrix { rows }` (kernel values on the grid).

use std::path::{Path, PathBuf};

use lagcov::hilbert::{brownian_bridge_eigenfunctions, GridSpace, LinearOp};
use lagcov::kernels;
use lagcov::process::{InnovationLaw, LinearCoeffs, ModelSpec, TailRule};
use lagcov::product::lag_window;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub eigen: EigenConfig,
    #[serde(default)]
    pub yule_walker: YuleWalkerConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub d: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { d: lagcov::hilbert::DEFAULT_DIM }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKindConfig {
    Iid,
    Far,
    Linear,
    Farma,
    Degenerate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKindConfig,
    #[serde(default)]
    pub ar: Vec<OperatorConfig>,
    #[serde(default)]
    pub ma: Vec<OperatorConfig>,
    pub linear: Option<LinearConfig>,
    #[serde(default)]
    pub innovation: InnovationConfig,
    pub cross: Option<CrossConfig>,
    pub burn_in: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorConfig {
    Gaussian { bandwidth: f64, opnorm: Option<f64> },
    ScaledIdentity { scale: f64 },
    Zero,
    Spectral { coefficients: Vec<f64> },
    Matrix { rows: Vec<Vec<f64>> },
}

/// Either explicit `coefficients` or `base` with geometric `ratio`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    #[serde(default)]
    pub coefficients: Vec<OperatorConfig>,
    pub base: Option<OperatorConfig>,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelConfig {
    BrownianBridge,
    Gaussian,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnovationConfig {
    pub kernel: KernelConfig,
    pub bandwidth: Option<f64>,
    /// Rescale so that `ν₄ = 1` before applying `scale`.
    pub normalize_nu4: bool,
    pub scale: f64,
}

impl Default for InnovationConfig {
    fn default() -> Self {
        InnovationConfig { kernel: KernelConfig::BrownianBridge, bandwidth: None, normalize_nu4: true, scale: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossConfig {
    pub theta: OperatorConfig,
    #[serde(default)]
    pub noise: InnovationConfig,
}

/// Which pair the estimators target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pair {
    /// `Ĉ^h_{X^[m],Y^[n]}` against the cross link.
    Cross,
    /// `Ĉ^h_{X^[m],X^[n]}`.
    Auto,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub sample_sizes: Vec<usize>,
    pub lags: Vec<i64>,
    pub m: Vec<usize>,
    pub n: Vec<usize>,
    pub replications: usize,
    /// Defaults to `cross` when the model has a cross link.
    pub pair: Option<Pair>,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            sample_sizes: vec![400],
            lags: vec![0],
            m: vec![1],
            n: vec![1],
            replications: 200,
            pair: None,
            output: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRuleConfig {
    Geometric,
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub moment_replications: usize,
    pub horizon: usize,
    pub tail_rule: TailRuleConfig,
    /// User caps replacing the estimated `ν₄(X)` and `ν₄(Y)`.
    pub nu4_x: Option<f64>,
    pub nu4_y: Option<f64>,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig { moment_replications: 2000, horizon: 30, tail_rule: TailRuleConfig::Geometric, nu4_x: None, nu4_y: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenConfig {
    /// Number of leading eigenpairs checked.
    pub k: usize,
}

impl Default for EigenConfig {
    fn default() -> Self {
        EigenConfig { k: 5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct YuleWalkerConfig {
    pub order: usize,
    /// Defaults to `N^{-1/3}`.
    pub ridge: Option<f64>,
    /// Spectral truncation of the inverse; 0 keeps every eigenpair.
    pub rank: usize,
}

impl Default for YuleWalkerConfig {
    fn default() -> Self {
        YuleWalkerConfig { order: 1, ridge: None, rank: 8 }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> LabResult<Self> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| LabError::Read { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> LabResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(LabError::config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.grid.d == 0 {
            return Err(LabError::config("grid.d must be positive"));
        }
        let e = &self.experiment;
        if e.replications < 2 {
            return Err(LabError::config(format!("experiment.replications must be at least 2, got {}", e.replications)));
        }
        for (name, list) in [("sample_sizes", e.sample_sizes.len()), ("lags", e.lags.len()), ("m", e.m.len()), ("n", e.n.len())] {
            if list == 0 {
                return Err(LabError::config(format!("experiment.{name} must not be empty")));
            }
        }
        if e.pair == Some(Pair::Cross) && self.model.cross.is_none() {
            return Err(LabError::config("experiment.pair = \"cross\" needs a model.cross section"));
        }
        for cell in self.cells() {
            lag_window(cell.sample_size, cell.lag, cell.m, cell.n)
                .map_err(|err| LabError::config(format!("cell (N={}, h={}, m={}, n={}): {err}", cell.sample_size, cell.lag, cell.m, cell.n)))?;
        }
        if self.bounds.moment_replications < 2 {
            return Err(LabError::config("bounds.moment_replications must be at least 2"));
        }
        if self.bounds.horizon < 3 {
            return Err(LabError::config("bounds.horizon must be at least 3"));
        }
        if self.yule_walker.order == 0 {
            return Err(LabError::config("yule_walker.order must be positive"));
        }
        if let Some(r) = self.yule_walker.ridge {
            if !(r > 0.0) {
                return Err(LabError::config(format!("yule_walker.ridge must be positive, got {r}")));
            }
        }
        Ok(())
    }

    pub fn pair(&self) -> Pair {
        self.experiment.pair.unwrap_or(if self.model.cross.is_some() { Pair::Cross } else { Pair::Auto })
    }

    /// All `(N, h, m, n)` cells of the experiment grid, in a fixed order.
    pub fn cells(&self) -> Vec<Cell> {
        let e = &self.experiment;
        let mut out = Vec::new();
        for &sample_size in &e.sample_sizes {
            for &lag in &e.lags {
                for &m in &e.m {
                    for &n in &e.n {
                        out.push(Cell { sample_size, lag, m, n });
                    }
                }
            }
        }
        out
    }

    pub fn space(&self) -> LabResult<GridSpace> {
        Ok(GridSpace::uniform(self.grid.d)?)
    }

    pub fn build_model(&self) -> LabResult<ModelSpec> {
        let space = self.space()?;
        let m = &self.model;
        let ops = |list: &[OperatorConfig], what: &str| -> LabResult<Vec<LinearOp>> {
            list.iter()
                .enumerate()
                .map(|(i, op)| op.build(&space).map_err(|e| LabError::config(format!("model.{what}[{i}]: {e}"))))
                .collect()
        };
        let innovation = m.innovation.build(&space)?;
        let unused = |field: &str, empty: bool| -> LabResult<()> {
            if empty {
                Ok(())
            } else {
                Err(LabError::config(format!("model.{field} is not used by kind {:?}", m.kind)))
            }
        };
        let model = match m.kind {
            ModelKindConfig::Iid | ModelKindConfig::Degenerate => {
                unused("ar", m.ar.is_empty())?;
                unused("ma", m.ma.is_empty())?;
                unused("linear", m.linear.is_none())?;
                if m.kind == ModelKindConfig::Iid {
                    ModelSpec::iid(innovation)
                } else {
                    ModelSpec::degenerate(innovation)
                }
            }
            ModelKindConfig::Far => {
                unused("ma", m.ma.is_empty())?;
                unused("linear", m.linear.is_none())?;
                ModelSpec::far(ops(&m.ar, "ar")?, innovation)?
            }
            ModelKindConfig::Farma => {
                unused("linear", m.linear.is_none())?;
                ModelSpec::farma(ops(&m.ar, "ar")?, ops(&m.ma, "ma")?, innovation)?
            }
            ModelKindConfig::Linear => {
                unused("ar", m.ar.is_empty())?;
                unused("ma", m.ma.is_empty())?;
                let lin = m.linear.as_ref().ok_or_else(|| LabError::config("model.linear is required for kind linear"))?;
                let coeffs = match (&lin.base, lin.ratio, lin.coefficients.is_empty()) {
                    (Some(base), Some(ratio), true) => LinearCoeffs::Geometric {
                        base: base.build(&space).map_err(|e| LabError::config(format!("model.linear.base: {e}")))?,
                        ratio,
                    },
                    (None, None, false) => LinearCoeffs::Explicit(ops(&lin.coefficients, "linear.coefficients")?),
                    _ => {
                        return Err(LabError::config(
                            "model.linear needs either `coefficients` or both `base` and `ratio`",
                        ))
                    }
                };
                ModelSpec::linear(coeffs, innovation)?
            }
        };
        let model = match &m.cross {
            Some(c) => {
                let theta = c.theta.build(&space).map_err(|e| LabError::config(format!("model.cross.theta: {e}")))?;
                model.with_cross_link(theta, c.noise.build(&space)?)?
            }
            None => model,
        };
        Ok(match m.burn_in {
            Some(b) => model.with_burn_in(b)?,
            None => model,
        })
    }

    pub fn tail_rule_override(&self) -> Option<TailRule> {
        match self.bounds.tail_rule {
            TailRuleConfig::Geometric => None,
            TailRuleConfig::None => Some(TailRule::None),
        }
    }
}

/// One `(N, h, m, n)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub sample_size: usize,
    pub lag: i64,
    pub m: usize,
    pub n: usize,
}

impl OperatorConfig {
    pub fn build(&self, space: &GridSpace) -> LabResult<LinearOp> {
        let op = match self {
            OperatorConfig::Gaussian { bandwidth, opnorm } => {
                let k = kernels::gaussian(space, *bandwidth)?;
                match opnorm {
                    Some(t) => kernels::with_op_norm(&k, *t)?,
                    None => k,
                }
            }
            OperatorConfig::ScaledIdentity { scale } => LinearOp::identity(space).scale(*scale),
            OperatorConfig::Zero => LinearOp::zero(space, space),
            OperatorConfig::Spectral { coefficients } => {
                let basis = brownian_bridge_eigenfunctions(space, coefficients.len());
                kernels::spectral(&basis, coefficients)?
            }
            OperatorConfig::Matrix { rows } => {
                let d = space.dim();
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(LabError::config(format!("matrix operator must be {d} x {d}")));
                }
                LinearOp::new(space, space, DMatrix::from_fn(d, d, |i, j| rows[i][j]))?
            }
        };
        Ok(op)
    }
}

impl InnovationConfig {
    pub fn build(&self, space: &GridSpace) -> LabResult<InnovationLaw> {
        let law = match (self.kernel, self.bandwidth) {
            (KernelConfig::BrownianBridge, None) => InnovationLaw::brownian_bridge(space)?,
            (KernelConfig::Gaussian, Some(b)) => InnovationLaw::gaussian(kernels::gaussian(space, b)?, 1.0)?,
            (KernelConfig::BrownianBridge, Some(_)) => {
                return Err(LabError::config("bandwidth is only used by the gaussian innovation kernel"))
            }
            (KernelConfig::Gaussian, None) => return Err(LabError::config("gaussian innovation kernel needs a bandwidth")),
        };
        if !(self.scale > 0.0) {
            return Err(LabError::config(format!("innovation scale must be positive, got {}", self.scale)));
        }
        let law = if self.normalize_nu4 { law.normalized()? } else { law };
        Ok(law.with_scale(law.scale() * self.scale)?)
    }
}
