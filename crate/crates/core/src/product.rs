//! Cartesian powers `H^m`, block operators between them, and the lag window.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods take over when std is linked
use num_traits::Float;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hilbert::{tensor, GridFunction, GridSpace, LinearOp, OpNorms};
use crate::linalg;

/// Element `x = (x_1, …, x_m)` of `H^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductElement {
    components: Vec<GridFunction>,
}

impl ProductElement {
    pub fn new(components: Vec<GridFunction>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::Dimension("product element needs at least one component".into()));
        };
        if components.iter().any(|c| c.space() != first.space()) {
            return Err(Error::Dimension("product components live on different grids".into()));
        }
        Ok(Self { components })
    }

    pub fn zeros(space: &GridSpace, power: usize) -> Self {
        Self { components: (0..power).map(|_| GridFunction::zeros(space)).collect() }
    }

    /// Splits a stacked vector of length `power · d` into components.
    pub fn from_stacked(space: &GridSpace, power: usize, stacked: &DVector<f64>) -> Result<Self> {
        let d = space.dim();
        if stacked.len() != power * d {
            return Err(Error::Dimension(format!("stacked vector of length {} for power {power}", stacked.len())));
        }
        let components = (0..power)
            .map(|i| GridFunction::from_vector(space, stacked.rows(i * d, d).into_owned()))
            .collect();
        Ok(Self { components })
    }

    pub fn power(&self) -> usize {
        self.components.len()
    }

    pub fn space(&self) -> &GridSpace {
        self.components[0].space()
    }

    pub fn components(&self) -> &[GridFunction] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &GridFunction {
        &self.components[i]
    }

    pub fn stacked(&self) -> DVector<f64> {
        let d = self.space().dim();
        let mut out = DVector::zeros(self.power() * d);
        for (i, c) in self.components.iter().enumerate() {
            out.rows_mut(i * d, d).copy_from(c.values());
        }
        out
    }

    pub fn norm_squared(&self) -> f64 {
        self.components.iter().map(GridFunction::norm_squared).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { components: self.components.iter().map(|x| x.scale(c)).collect() }
    }

    pub fn sub(&self, other: &ProductElement) -> Result<Self> {
        self.check_shape(other)?;
        Ok(Self { components: self.components.iter().zip(&other.components).map(|(a, b)| a - b).collect() })
    }

    pub fn add(&self, other: &ProductElement) -> Result<Self> {
        self.check_shape(other)?;
        Ok(Self { components: self.components.iter().zip(&other.components).map(|(a, b)| a + b).collect() })
    }

    fn check_shape(&self, other: &ProductElement) -> Result<()> {
        if self.power() != other.power() || self.space() != other.space() {
            return Err(Error::Dimension(format!("powers {} and {}", self.power(), other.power())));
        }
        Ok(())
    }
}

/// `⟨x, y⟩ = Σ_i ⟨x_i, y_i⟩`.
pub fn product_inner(x: &ProductElement, y: &ProductElement) -> Result<f64> {
    x.check_shape(y)?;
    x.components
        .iter()
        .zip(&y.components)
        .map(|(a, b)| crate::hilbert::inner(a, b))
        .sum()
}

/// `X_k^[m] = (X_k, X_{k-1}, …, X_{k-m+1})` from a path `X_1, …, X_N`
/// (1-based `k`).
pub fn embed(path: &[GridFunction], k: usize, m: usize) -> Result<ProductElement> {
    if m == 0 {
        return Err(Error::Window("Cartesian power must be at least 1".into()));
    }
    if k < m {
        return Err(Error::Window(format!("embedding X_{k}^[{m}] needs k >= m")));
    }
    if k > path.len() {
        return Err(Error::Window(format!("index {k} beyond a path of length {}", path.len())));
    }
    ProductElement::new((0..m).map(|i| path[k - 1 - i].clone()).collect())
}

/// Block operator `H^m → H⋆^n`; block `(i, j)` maps domain component `j`
/// to codomain component `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOp {
    domain: GridSpace,
    codomain: GridSpace,
    rows: usize,
    cols: usize,
    blocks: Vec<LinearOp>,
}

impl BlockOp {
    /// `blocks` in row-major order, `rows × cols` of them.
    pub fn new(rows: usize, cols: usize, blocks: Vec<LinearOp>) -> Result<Self> {
        if rows == 0 || cols == 0 || blocks.len() != rows * cols {
            return Err(Error::Dimension(format!("{} blocks for a {rows}x{cols} block operator", blocks.len())));
        }
        let (domain, codomain) = (blocks[0].domain().clone(), blocks[0].codomain().clone());
        if blocks.iter().any(|b| b.domain() != &domain || b.codomain() != &codomain) {
            return Err(Error::Dimension("blocks act between different grids".into()));
        }
        Ok(Self { domain, codomain, rows, cols, blocks })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Result<LinearOp>) -> Result<Self> {
        let mut blocks = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                blocks.push(f(i, j)?);
            }
        }
        Self::new(rows, cols, blocks)
    }

    pub fn single(op: LinearOp) -> Self {
        Self { domain: op.domain().clone(), codomain: op.codomain().clone(), rows: 1, cols: 1, blocks: alloc::vec![op] }
    }

    pub fn zeros(domain: &GridSpace, codomain: &GridSpace, rows: usize, cols: usize) -> Self {
        Self {
            domain: domain.clone(),
            codomain: codomain.clone(),
            rows,
            cols,
            blocks: (0..rows * cols).map(|_| LinearOp::zero(domain, codomain)).collect(),
        }
    }

    pub fn identity(space: &GridSpace, power: usize) -> Self {
        let blocks = (0..power * power)
            .map(|idx| {
                if idx / power == idx % power {
                    LinearOp::identity(space)
                } else {
                    LinearOp::zero(space, space)
                }
            })
            .collect();
        Self { domain: space.clone(), codomain: space.clone(), rows: power, cols: power, blocks }
    }

    /// Rebuilds a block operator from its flattened kernel.
    pub fn from_flat(domain: &GridSpace, codomain: &GridSpace, rows: usize, cols: usize, flat: &DMatrix<f64>) -> Result<Self> {
        let (dc, dd) = (codomain.dim(), domain.dim());
        if flat.nrows() != rows * dc || flat.ncols() != cols * dd {
            return Err(Error::Dimension(format!(
                "flat kernel {}x{} does not match {rows}x{cols} blocks",
                flat.nrows(),
                flat.ncols()
            )));
        }
        Self::from_fn(rows, cols, |i, j| {
            LinearOp::new(domain, codomain, flat.view((i * dc, j * dd), (dc, dd)).into_owned())
        })
    }

    /// Inverse of [`BlockOp::weighted_flat`].
    pub fn from_weighted_flat(
        domain: &GridSpace,
        codomain: &GridSpace,
        rows: usize,
        cols: usize,
        weighted: &DMatrix<f64>,
    ) -> Result<Self> {
        let (dc, dd) = (codomain.dim(), domain.dim());
        let (sc, sd) = (codomain.sqrt_weights(), domain.sqrt_weights());
        let mut flat = weighted.clone();
        for c in 0..flat.ncols() {
            for r in 0..flat.nrows() {
                flat[(r, c)] /= sc[r % dc] * sd[c % dd];
            }
        }
        Self::from_flat(domain, codomain, rows, cols, &flat)
    }

    pub fn domain(&self) -> &GridSpace {
        &self.domain
    }

    pub fn codomain(&self) -> &GridSpace {
        &self.codomain
    }

    /// Codomain power `n`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Domain power `m`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn block(&self, i: usize, j: usize) -> &LinearOp {
        &self.blocks[i * self.cols + j]
    }

    pub fn blocks(&self) -> &[LinearOp] {
        &self.blocks
    }

    /// Kernel of the whole operator, `(n·d⋆) × (m·d)`.
    pub fn flatten(&self) -> DMatrix<f64> {
        let (dc, dd) = (self.codomain.dim(), self.domain.dim());
        let mut out = DMatrix::zeros(self.rows * dc, self.cols * dd);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.view_mut((i * dc, j * dd), (dc, dd)).copy_from(self.block(i, j).kernel());
            }
        }
        out
    }

    /// Weight-symmetrized flat matrix; its singular values are the operator's.
    pub fn weighted_flat(&self) -> DMatrix<f64> {
        let (dc, dd) = (self.codomain.dim(), self.domain.dim());
        let (sc, sd) = (self.codomain.sqrt_weights(), self.domain.sqrt_weights());
        let mut out = self.flatten();
        for c in 0..out.ncols() {
            for r in 0..out.nrows() {
                out[(r, c)] *= sc[r % dc] * sd[c % dd];
            }
        }
        out
    }

    pub fn singular_values(&self) -> Result<Vec<f64>> {
        linalg::singular_values(&self.weighted_flat())
    }

    pub fn norms(&self) -> Result<OpNorms> {
        Ok(OpNorms::from_singular_values(&self.singular_values()?))
    }

    pub fn op_norm(&self) -> Result<f64> {
        Ok(self.singular_values()?.first().copied().unwrap_or(0.0))
    }

    pub fn hs_norm_squared(&self) -> f64 {
        self.blocks.iter().map(LinearOp::hs_norm_squared).sum()
    }

    pub fn hs_norm(&self) -> f64 {
        self.hs_norm_squared().sqrt()
    }

    pub fn trace(&self) -> Result<f64> {
        if self.rows != self.cols {
            return Err(Error::Dimension("trace of a non-square block operator".into()));
        }
        (0..self.rows).map(|i| self.block(i, i).trace()).sum()
    }

    /// Block-transpose with per-block adjoints.
    pub fn adjoint(&self) -> BlockOp {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                blocks.push(self.block(i, j).adjoint());
            }
        }
        Self {
            domain: self.codomain.clone(),
            codomain: self.domain.clone(),
            rows: self.cols,
            cols: self.rows,
            blocks,
        }
    }

    pub fn scale(&self, c: f64) -> BlockOp {
        Self { blocks: self.blocks.iter().map(|b| b.scale(c)).collect(), ..self.clone() }
    }

    pub fn add(&self, other: &BlockOp) -> Result<BlockOp> {
        self.check_shape(other)?;
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.add(b)).collect::<Result<_>>()?;
        Ok(Self { blocks, ..self.clone() })
    }

    pub fn sub(&self, other: &BlockOp) -> Result<BlockOp> {
        self.check_shape(other)?;
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.sub(b)).collect::<Result<_>>()?;
        Ok(Self { blocks, ..self.clone() })
    }

    pub(crate) fn check_shape(&self, other: &BlockOp) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols || self.domain != other.domain || self.codomain != other.codomain {
            return Err(Error::Dimension(format!(
                "block shapes {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn apply(&self, x: &ProductElement) -> Result<ProductElement> {
        if x.power() != self.cols {
            return Err(Error::Dimension(format!("applying a {}-column block operator to H^{}", self.cols, x.power())));
        }
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let mut acc = GridFunction::zeros(&self.codomain);
            for j in 0..self.cols {
                acc.axpy(1.0, &self.block(i, j).apply(x.component(j))?);
            }
            out.push(acc);
        }
        ProductElement::new(out)
    }

    /// Symmetric up to `tol` in the Hilbert-Schmidt norm.
    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.rows == self.cols
            && self.domain == self.codomain
            && self.sub(&self.adjoint()).map(|d| d.hs_norm() <= tol).unwrap_or(false)
    }

    pub fn max_abs_diff(&self, other: &BlockOp) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }
}

/// `A ∘ B` for block operators.
pub fn compose_blocks(a: &BlockOp, b: &BlockOp) -> Result<BlockOp> {
    if a.cols != b.rows || a.domain != b.codomain {
        return Err(Error::Dimension(format!(
            "composing {}x{} with {}x{} block operators",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mid = a.domain.weights();
    let d = mid.len();
    let mut kb = b.flatten();
    for r in 0..kb.nrows() {
        kb.row_mut(r).scale_mut(mid[r % d]);
    }
    BlockOp::from_flat(&b.domain, &a.codomain, a.rows, b.cols, &(a.flatten() * kb))
}

/// `x ⊗ y` for `x ∈ H^m`, `y ∈ H⋆^n`: block `(i, j) = x_j ⊗ y_i`.
pub fn product_tensor(x: &ProductElement, y: &ProductElement) -> BlockOp {
    let blocks = (0..y.power())
        .flat_map(|i| (0..x.power()).map(move |j| (i, j)))
        .map(|(i, j)| tensor(x.component(j), y.component(i)))
        .collect();
    BlockOp {
        domain: x.space().clone(),
        codomain: y.space().clone(),
        rows: y.power(),
        cols: x.power(),
        blocks,
    }
}

/// Index bookkeeping for a lag-`h` estimator between `X^[m]` and `Y^[n]`
/// from `N` observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LagWindow {
    pub sample_size: usize,
    pub lag: i64,
    pub m: usize,
    pub n: usize,
    /// `N' = min{N, N-h} - max{m, n-h} + 1`, the number of summands.
    pub n_eff: usize,
    /// `κ = max{m, n-h} + 1_{h ≥ 1}·h - 1`.
    pub kappa: usize,
    /// `κ' = max{1, κ}`.
    pub kappa_prime: usize,
}

impl LagWindow {
    /// First and last summation index (1-based, inclusive).
    pub fn summation_range(&self) -> (usize, usize) {
        let (n_obs, h) = (self.sample_size as i64, self.lag);
        let start = (self.m as i64).max(self.n as i64 - h);
        let end = n_obs.min(n_obs - h);
        (start as usize, end as usize)
    }

    /// `m n (2κ' - 1)`.
    pub fn dependence_factor(&self) -> f64 {
        (self.m * self.n * (2 * self.kappa_prime - 1)) as f64
    }

    /// `N' / (m n (2κ' - 1))`, the factor multiplying the squared error in
    /// the bounds.
    pub fn normalization(&self) -> f64 {
        self.n_eff as f64 / self.dependence_factor()
    }
}

pub fn lag_window(sample_size: usize, lag: i64, m: usize, n: usize) -> Result<LagWindow> {
    if m == 0 || n == 0 {
        return Err(Error::Window(format!("Cartesian powers must be positive (m = {m}, n = {n})")));
    }
    if m > sample_size {
        return Err(Error::Window(format!("m <= N violated (m = {m}, N = {sample_size})")));
    }
    if n > sample_size {
        return Err(Error::Window(format!("n <= N violated (n = {n}, N = {sample_size})")));
    }
    let (big_n, h) = (sample_size as i64, lag);
    if h < n as i64 - big_n {
        return Err(Error::Window(format!("n - N <= h violated (h = {h}, n = {n}, N = {sample_size})")));
    }
    if h > big_n - m as i64 {
        return Err(Error::Window(format!("h <= N - m violated (h = {h}, m = {m}, N = {sample_size})")));
    }
    let start = (m as i64).max(n as i64 - h);
    let end = big_n.min(big_n - h);
    let n_eff = end - start + 1;
    debug_assert!(n_eff >= 1);
    let kappa = start + if h >= 1 { h } else { 0 } - 1;
    Ok(LagWindow {
        sample_size,
        lag,
        m,
        n,
        n_eff: n_eff as usize,
        kappa: kappa as usize,
        kappa_prime: (kappa as usize).max(1),
    })
}
