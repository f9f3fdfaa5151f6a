//! Discretized real separable Hilbert space `L²[0,1]`.
//!
//! A [`GridSpace`] fixes quadrature nodes and weights. Functions are their
//! values at the nodes, and an operator `A` is a kernel matrix `K` acting by
//! `(A f)(t_i) = Σ_j K[i,j] w_j f(t_j)`. With this convention the adjoint
//! kernel is the plain transpose and `x ⊗ y = ⟨x, ·⟩ y` has kernel `y xᵀ`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods take over when std is linked
use num_traits::Float;
use core::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Grid size used when nothing else is configured.
pub const DEFAULT_DIM: usize = 32;

#[derive(Debug)]
struct GridData {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    sqrt_weights: DVector<f64>,
}

/// Quadrature grid on `[0,1]`: strictly increasing nodes, positive weights
/// summing to one. Cheap to clone; clones share the same data.
#[derive(Debug, Clone)]
pub struct GridSpace(Arc<GridData>);

impl PartialEq for GridSpace {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.nodes == other.0.nodes && self.0.weights == other.0.weights)
    }
}

impl GridSpace {
    /// Uniform midpoint grid `t_i = (i + 1/2)/d`, `w_i = 1/d`.
    pub fn uniform(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Dimension("grid needs at least one node".into()));
        }
        let h = 1.0 / d as f64;
        let nodes = (0..d).map(|i| (i as f64 + 0.5) * h).collect();
        Self::new(nodes, alloc::vec![h; d])
    }

    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::Dimension(format!(
                "{} nodes vs {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Domain("grid nodes must lie in [0,1]".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("grid nodes must be strictly increasing".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Domain("quadrature weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("quadrature weights sum to {total}, not 1")));
        }
        let sqrt_weights = DVector::from_iterator(weights.len(), weights.iter().map(|w| w.sqrt()));
        Ok(Self(Arc::new(GridData { nodes, weights, sqrt_weights })))
    }

    pub fn dim(&self) -> usize {
        self.0.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.0.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.0.weights
    }

    pub(crate) fn sqrt_weights(&self) -> &DVector<f64> {
        &self.0.sqrt_weights
    }

    fn ensure_same(&self, other: &GridSpace, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{what}: grids of size {} and {} differ",
                self.dim(),
                other.dim()
            )))
        }
    }
}

/// Element of the discretized space: values at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    space: GridSpace,
    values: DVector<f64>,
}

impl GridFunction {
    pub fn new(space: &GridSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.dim() {
            return Err(Error::Dimension(format!(
                "{} values on a grid of size {}",
                values.len(),
                space.dim()
            )));
        }
        Ok(Self { space: space.clone(), values: DVector::from_vec(values) })
    }

    pub(crate) fn from_vector(space: &GridSpace, values: DVector<f64>) -> Self {
        debug_assert_eq!(values.len(), space.dim());
        Self { space: space.clone(), values }
    }

    pub fn from_fn(space: &GridSpace, f: impl Fn(f64) -> f64) -> Self {
        let values = DVector::from_iterator(space.dim(), space.nodes().iter().map(|&t| f(t)));
        Self { space: space.clone(), values }
    }

    pub fn zeros(space: &GridSpace) -> Self {
        Self { space: space.clone(), values: DVector::zeros(space.dim()) }
    }

    pub fn space(&self) -> &GridSpace {
        &self.space
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn norm_squared(&self) -> f64 {
        self.values
            .iter()
            .zip(self.space.weights())
            .map(|(v, w)| w * v * v)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { space: self.space.clone(), values: &self.values * c }
    }

    /// `self += c · other`.
    pub fn axpy(&mut self, c: f64, other: &GridFunction) {
        assert!(self.space == other.space, "axpy across different grids");
        self.values.axpy(c, &other.values, 1.0);
    }
}

impl Add for &GridFunction {
    type Output = GridFunction;
    fn add(self, rhs: &GridFunction) -> GridFunction {
        assert!(self.space == rhs.space, "adding functions on different grids");
        GridFunction { space: self.space.clone(), values: &self.values + &rhs.values }
    }
}

impl Sub for &GridFunction {
    type Output = GridFunction;
    fn sub(self, rhs: &GridFunction) -> GridFunction {
        assert!(self.space == rhs.space, "subtracting functions on different grids");
        GridFunction { space: self.space.clone(), values: &self.values - &rhs.values }
    }
}

impl Neg for &GridFunction {
    type Output = GridFunction;
    fn neg(self) -> GridFunction {
        self.scale(-1.0)
    }
}

impl Mul<&GridFunction> for f64 {
    type Output = GridFunction;
    fn mul(self, rhs: &GridFunction) -> GridFunction {
        rhs.scale(self)
    }
}

/// `⟨f, g⟩ = Σ_i w_i f(t_i) g(t_i)`.
pub fn inner(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    f.space.ensure_same(&g.space, "inner product")?;
    Ok(weighted_dot(f.space.weights(), &f.values, &g.values))
}

pub(crate) fn weighted_dot(w: &[f64], a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    w.iter().zip(a.iter().zip(b.iter())).map(|(w, (x, y))| w * x * y).sum()
}

/// `x ⊗ y = ⟨x, ·⟩ y`, an operator from `x`'s space to `y`'s space.
pub fn tensor(x: &GridFunction, y: &GridFunction) -> LinearOp {
    LinearOp {
        domain: x.space.clone(),
        codomain: y.space.clone(),
        kernel: &y.values * x.values.transpose(),
    }
}

/// Operator, Hilbert-Schmidt and nuclear norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpNorms {
    pub operator: f64,
    pub hilbert_schmidt: f64,
    pub nuclear: f64,
}

impl OpNorms {
    pub fn from_singular_values(sv: &[f64]) -> Self {
        Self {
            operator: sv.iter().copied().fold(0.0, f64::max),
            hilbert_schmidt: sv.iter().map(|s| s * s).sum::<f64>().sqrt(),
            nuclear: sv.iter().sum(),
        }
    }
}

/// Bounded linear operator between two grid spaces, stored as a kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOp {
    domain: GridSpace,
    codomain: GridSpace,
    kernel: DMatrix<f64>,
}

impl LinearOp {
    /// `kernel` has `codomain.dim()` rows and `domain.dim()` columns.
    pub fn new(domain: &GridSpace, codomain: &GridSpace, kernel: DMatrix<f64>) -> Result<Self> {
        if kernel.nrows() != codomain.dim() || kernel.ncols() != domain.dim() {
            return Err(Error::Dimension(format!(
                "kernel is {}x{}, expected {}x{}",
                kernel.nrows(),
                kernel.ncols(),
                codomain.dim(),
                domain.dim()
            )));
        }
        Ok(Self { domain: domain.clone(), codomain: codomain.clone(), kernel })
    }

    /// Integral operator with kernel `k(s, t)`: `(A f)(s) = ∫ k(s,t) f(t) dt`.
    pub fn from_kernel_fn(domain: &GridSpace, codomain: &GridSpace, k: impl Fn(f64, f64) -> f64) -> Self {
        let kernel = DMatrix::from_fn(codomain.dim(), domain.dim(), |i, j| {
            k(codomain.nodes()[i], domain.nodes()[j])
        });
        Self { domain: domain.clone(), codomain: codomain.clone(), kernel }
    }

    pub fn zero(domain: &GridSpace, codomain: &GridSpace) -> Self {
        Self {
            domain: domain.clone(),
            codomain: codomain.clone(),
            kernel: DMatrix::zeros(codomain.dim(), domain.dim()),
        }
    }

    pub fn identity(space: &GridSpace) -> Self {
        let diag = DVector::from_iterator(space.dim(), space.weights().iter().map(|w| 1.0 / w));
        Self { domain: space.clone(), codomain: space.clone(), kernel: DMatrix::from_diagonal(&diag) }
    }

    /// Operator whose weight-symmetrized matrix `W_c^{1/2} K W_d^{1/2}` is `m`.
    pub fn from_weighted_matrix(domain: &GridSpace, codomain: &GridSpace, m: DMatrix<f64>) -> Result<Self> {
        let mut op = Self::new(domain, codomain, m)?;
        let (sc, sd) = (codomain.sqrt_weights(), domain.sqrt_weights());
        for j in 0..op.kernel.ncols() {
            for i in 0..op.kernel.nrows() {
                op.kernel[(i, j)] /= sc[i] * sd[j];
            }
        }
        Ok(op)
    }

    pub fn domain(&self) -> &GridSpace {
        &self.domain
    }

    pub fn codomain(&self) -> &GridSpace {
        &self.codomain
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.domain.ensure_same(&f.space, "operator application")?;
        Ok(GridFunction::from_vector(&self.codomain, self.apply_values(&f.values)))
    }

    pub(crate) fn apply_values(&self, v: &DVector<f64>) -> DVector<f64> {
        let weighted = v.component_mul(&DVector::from_column_slice(self.domain.weights()));
        &self.kernel * weighted
    }

    pub fn adjoint(&self) -> LinearOp {
        Self {
            domain: self.codomain.clone(),
            codomain: self.domain.clone(),
            kernel: self.kernel.transpose(),
        }
    }

    /// `W_c^{1/2} K W_d^{1/2}`; its singular values are those of the operator.
    pub fn weighted_matrix(&self) -> DMatrix<f64> {
        let (sc, sd) = (self.codomain.sqrt_weights(), self.domain.sqrt_weights());
        DMatrix::from_fn(self.kernel.nrows(), self.kernel.ncols(), |i, j| {
            sc[i] * self.kernel[(i, j)] * sd[j]
        })
    }

    pub fn singular_values(&self) -> Result<Vec<f64>> {
        linalg::singular_values(&self.weighted_matrix())
    }

    pub fn norms(&self) -> Result<OpNorms> {
        Ok(OpNorms::from_singular_values(&self.singular_values()?))
    }

    pub fn op_norm(&self) -> Result<f64> {
        Ok(self.singular_values()?.first().copied().unwrap_or(0.0))
    }

    /// Hilbert-Schmidt norm without an SVD.
    pub fn hs_norm(&self) -> f64 {
        self.hs_norm_squared().sqrt()
    }

    pub fn hs_norm_squared(&self) -> f64 {
        let (wc, wd) = (self.codomain.weights(), self.domain.weights());
        let mut acc = 0.0;
        for (column, wj) in self.kernel.column_iter().zip(wd) {
            for (k, wi) in column.iter().zip(wc) {
                acc += wi * wj * k * k;
            }
        }
        acc
    }

    /// `Σ_i w_i K[i,i]` for operators on a single space.
    pub fn trace(&self) -> Result<f64> {
        self.domain.ensure_same(&self.codomain, "trace")?;
        Ok((0..self.domain.dim()).map(|i| self.domain.weights()[i] * self.kernel[(i, i)]).sum())
    }

    pub fn scale(&self, c: f64) -> LinearOp {
        Self { domain: self.domain.clone(), codomain: self.codomain.clone(), kernel: &self.kernel * c }
    }

    pub fn add(&self, other: &LinearOp) -> Result<LinearOp> {
        self.same_shape(other, "operator sum")?;
        Ok(Self { domain: self.domain.clone(), codomain: self.codomain.clone(), kernel: &self.kernel + &other.kernel })
    }

    pub fn sub(&self, other: &LinearOp) -> Result<LinearOp> {
        self.same_shape(other, "operator difference")?;
        Ok(Self { domain: self.domain.clone(), codomain: self.codomain.clone(), kernel: &self.kernel - &other.kernel })
    }

    pub(crate) fn add_assign(&mut self, other: &LinearOp) {
        self.kernel += &other.kernel;
    }

    fn same_shape(&self, other: &LinearOp, what: &str) -> Result<()> {
        self.domain.ensure_same(&other.domain, what)?;
        self.codomain.ensure_same(&other.codomain, what)
    }

    /// `A^k` for an operator on a single space (`A^0` is the identity).
    pub fn power(&self, k: usize) -> Result<LinearOp> {
        self.domain.ensure_same(&self.codomain, "operator power")?;
        let mut out = LinearOp::identity(&self.domain);
        for _ in 0..k {
            out = compose(self, &out)?;
        }
        Ok(out)
    }

    /// Largest entrywise kernel difference; meant for tests and diagnostics.
    pub fn max_abs_diff(&self, other: &LinearOp) -> f64 {
        self.kernel
            .iter()
            .zip(other.kernel.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.domain == self.codomain && self.max_abs_diff(&self.adjoint()) <= tol
    }
}

/// `A ∘ B`, kernel `K_A W K_B`.
pub fn compose(a: &LinearOp, b: &LinearOp) -> Result<LinearOp> {
    a.domain.ensure_same(&b.codomain, "composition")?;
    let mut kb = b.kernel.clone();
    for (i, w) in a.domain.weights().iter().enumerate() {
        kb.row_mut(i).scale_mut(*w);
    }
    Ok(LinearOp { domain: b.domain.clone(), codomain: a.codomain.clone(), kernel: &a.kernel * kb })
}

/// `(‖A‖_L, ‖A‖_S, ‖A‖_N)`.
pub fn op_norms(a: &LinearOp) -> Result<OpNorms> {
    a.norms()
}

/// Orthonormal eigenbasis `√2 sin(jπt)` of the Brownian bridge covariance,
/// `j = 1..=count`, sampled on the grid.
pub fn brownian_bridge_eigenfunctions(space: &GridSpace, count: usize) -> Vec<GridFunction> {
    (1..=count)
        .map(|j| {
            GridFunction::from_fn(space, |t| {
                core::f64::consts::SQRT_2 * (j as f64 * core::f64::consts::PI * t).sin()
            })
        })
        .collect()
}
