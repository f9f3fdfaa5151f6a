//! Process families (i.i.d., linear, fAR(p), fARMA(p,q), degenerate), their
//! shared-innovation couplings `X_k^(ℓ)` and Monte Carlo moment estimation.
//!
//! Every non-degenerate model is reduced to its causal series
//! `X_k = Σ_{j<J} Φ_j ε_{k-j}`, truncated once the neglected coefficients sum
//! to less than [`TRUNCATION_TOL`] in operator norm. Paths are generated by
//! the model recursion itself after a burn-in of at least `J` steps; the
//! couplings reuse the stored innovations.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent float methods take over when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hilbert::{compose, weighted_dot, GridFunction, GridSpace, LinearOp};
use crate::kernels;
use crate::linalg;
use crate::product::{compose_blocks, BlockOp};
use crate::stats::{nu_p, MeanSe};

pub const DEFAULT_BURN_IN: usize = 500;
/// Bound on `Σ_{j≥J} ‖Φ_j‖_L` for the truncated causal series.
pub const TRUNCATION_TOL: f64 = 1e-8;
const MAX_TRUNCATION: usize = 20_000;
const STABILITY_POWERS: usize = 10;
const PSD_TOL: f64 = 1e-10;

const TAG_PATH: u64 = 1;
const TAG_CROSS_NOISE: u64 = 2;
const TAG_COPY_X: u64 = 3;
const TAG_COPY_Y: u64 = 4;
const TAG_COPY_ETA: u64 = 5;
const TAG_MOMENTS: u64 = 6;
const TAG_REPLICATION: u64 = 7;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `(seed, tag)`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix(seed ^ splitmix(tag))
}

/// Seed of replication `index` under a master seed. Replications depend
/// only on this value, so serial and parallel runs agree bit for bit.
pub fn replication_seed(master: u64, index: u64) -> u64 {
    derive_seed(derive_seed(master, TAG_REPLICATION), index)
}

/// Independent generator for `(seed, tag, index)`.
pub fn stream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, tag));
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnovationKind {
    GaussianKernel,
}

/// Centered Gaussian law on the grid with covariance operator
/// `scale² · covariance`.
#[derive(Debug, Clone)]
pub struct InnovationLaw {
    kind: InnovationKind,
    covariance: LinearOp,
    scale: f64,
    factor: DMatrix<f64>,
    spectrum: Vec<f64>,
}

impl InnovationLaw {
    pub fn gaussian(covariance: LinearOp, scale: f64) -> Result<Self> {
        if covariance.domain() != covariance.codomain() {
            return Err(Error::Model("innovation covariance must be an endomorphism".into()));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Model(format!("innovation scale must be positive, got {scale}")));
        }
        let size = covariance.kernel().amax().max(1.0);
        if !covariance.is_self_adjoint(1e-10 * size) {
            return Err(Error::Model("innovation covariance is not symmetric".into()));
        }
        let spectrum = linalg::symmetric_eigen(&covariance.weighted_matrix())?.0;
        if let Some(&lowest) = spectrum.last() {
            if lowest < -PSD_TOL * size {
                return Err(Error::Model(format!(
                    "innovation covariance is not positive semi-definite (eigenvalue {lowest:e})"
                )));
            }
        }
        // grid values of the process have covariance matrix equal to the kernel
        let (values, vectors) = linalg::symmetric_eigen(covariance.kernel())?;
        let d = values.len();
        let mut factor = DMatrix::zeros(d, d);
        for (j, (lambda, v)) in values.iter().zip(&vectors).enumerate() {
            factor.set_column(j, &(v * lambda.max(0.0).sqrt()));
        }
        Ok(Self { kind: InnovationKind::GaussianKernel, covariance, scale, factor, spectrum })
    }

    /// Brownian bridge covariance `min(s,t) - st`, unit scale.
    pub fn brownian_bridge(space: &GridSpace) -> Result<Self> {
        Self::gaussian(kernels::brownian_bridge(space), 1.0)
    }

    pub fn kind(&self) -> InnovationKind {
        self.kind
    }

    pub fn space(&self) -> &GridSpace {
        self.covariance.domain()
    }

    /// Unscaled covariance kernel operator.
    pub fn base_covariance(&self) -> &LinearOp {
        &self.covariance
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Model(format!("innovation scale must be positive, got {scale}")));
        }
        Ok(Self { scale, ..self.clone() })
    }

    /// Covariance operator `C_ε` of the scaled law.
    pub fn covariance(&self) -> LinearOp {
        self.covariance.scale(self.scale * self.scale)
    }

    fn raw_moments(&self) -> (f64, f64) {
        let pos = self.spectrum.iter().map(|m| m.max(0.0));
        let (s1, s2) = pos.fold((0.0, 0.0), |(a, b), m| (a + m, b + m * m));
        (s1, s2)
    }

    /// `ν₂(ε) = (tr C_ε)^{1/2}`.
    pub fn nu2(&self) -> f64 {
        self.scale * self.raw_moments().0.sqrt()
    }

    /// `ν₄(ε)`, exact for Gaussian laws: `E‖ε‖⁴ = (tr C)² + 2 tr C²`.
    pub fn nu4(&self) -> f64 {
        let (s1, s2) = self.raw_moments();
        self.scale * (s1 * s1 + 2.0 * s2).powf(0.25)
    }

    /// The same law rescaled so that `ν₄(ε) = 1`.
    pub fn normalized(&self) -> Result<Self> {
        let (s1, s2) = self.raw_moments();
        let m4 = s1 * s1 + 2.0 * s2;
        if !(m4 > 0.0) {
            return Err(Error::Model("cannot normalize a degenerate innovation law".into()));
        }
        self.with_scale(m4.powf(-0.25))
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let d = self.factor.nrows();
        let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        &self.factor * z * self.scale
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GridFunction {
        GridFunction::from_vector(self.space(), self.draw(rng))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Iid,
    Far,
    Linear,
    Farma,
    Degenerate,
}

/// Coefficients `φ_1, φ_2, …` of a linear process.
#[derive(Debug, Clone)]
pub enum LinearCoeffs {
    /// Finitely many coefficients; all later ones vanish.
    Explicit(Vec<LinearOp>),
    /// `φ_i = ratio^i · base`, `0 ≤ ratio < 1`.
    Geometric { base: LinearOp, ratio: f64 },
}

/// `Y_k = Θ(X_k) + η_k` with `η` i.i.d. and independent of `ε`.
#[derive(Debug, Clone)]
pub struct CrossLink {
    pub theta: LinearOp,
    pub noise: InnovationLaw,
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    kind: ModelKind,
    ar: Vec<LinearOp>,
    ma: Vec<LinearOp>,
    linear: Option<LinearCoeffs>,
    innovation: InnovationLaw,
    cross: Option<CrossLink>,
    causal: Vec<LinearOp>,
    contraction: Option<f64>,
    burn_in: usize,
}

impl ModelSpec {
    pub fn iid(innovation: InnovationLaw) -> Self {
        Self::build(ModelKind::Iid, Vec::new(), Vec::new(), None, innovation)
            .expect("i.i.d. models are always admissible")
    }

    /// `X_k = Σ_{i=1}^p ψ_i(X_{k-i}) + ε_k`.
    pub fn far(ar: Vec<LinearOp>, innovation: InnovationLaw) -> Result<Self> {
        if ar.is_empty() {
            return Err(Error::Model("fAR model needs at least one operator".into()));
        }
        Self::build(ModelKind::Far, ar, Vec::new(), None, innovation)
    }

    pub fn far1(psi: LinearOp, innovation: InnovationLaw) -> Result<Self> {
        Self::far(vec![psi], innovation)
    }

    /// `X_k = ε_k + Σ_{i≥1} φ_i(ε_{k-i})`.
    pub fn linear(coeffs: LinearCoeffs, innovation: InnovationLaw) -> Result<Self> {
        Self::build(ModelKind::Linear, Vec::new(), Vec::new(), Some(coeffs), innovation)
    }

    /// `X_k = Σ_{i=1}^p α_i(X_{k-i}) + Σ_{j=1}^q β_j(ε_{k-j}) + ε_k`.
    pub fn farma(ar: Vec<LinearOp>, ma: Vec<LinearOp>, innovation: InnovationLaw) -> Result<Self> {
        Self::build(ModelKind::Farma, ar, ma, None, innovation)
    }

    /// `X_k = X` for all `k`, with `X` distributed as the innovation.
    pub fn degenerate(innovation: InnovationLaw) -> Self {
        Self::build(ModelKind::Degenerate, Vec::new(), Vec::new(), None, innovation)
            .expect("degenerate models are always admissible")
    }

    pub fn with_cross_link(mut self, theta: LinearOp, noise: InnovationLaw) -> Result<Self> {
        let space = self.space().clone();
        if theta.domain() != &space || noise.space() != theta.codomain() {
            return Err(Error::Dimension("cross link does not match the model grid".into()));
        }
        self.cross = Some(CrossLink { theta, noise });
        Ok(self)
    }

    /// Override the burn-in; it may not be shorter than the causal truncation.
    pub fn with_burn_in(mut self, burn_in: usize) -> Result<Self> {
        if burn_in < self.truncation() {
            return Err(Error::Model(format!(
                "burn-in {burn_in} is shorter than the causal truncation {}",
                self.truncation()
            )));
        }
        self.burn_in = burn_in;
        Ok(self)
    }

    fn build(
        kind: ModelKind,
        ar: Vec<LinearOp>,
        ma: Vec<LinearOp>,
        linear: Option<LinearCoeffs>,
        innovation: InnovationLaw,
    ) -> Result<Self> {
        let space = innovation.space().clone();
        let mut ops: Vec<&LinearOp> = ar.iter().chain(&ma).collect();
        match &linear {
            Some(LinearCoeffs::Explicit(list)) => ops.extend(list),
            Some(LinearCoeffs::Geometric { base, ratio }) => {
                if !(0.0..1.0).contains(ratio) {
                    return Err(Error::Stability(format!("geometric ratio {ratio} outside [0,1)")));
                }
                ops.push(base);
            }
            None => {}
        }
        if ops.iter().any(|op| op.domain() != &space || op.codomain() != &space) {
            return Err(Error::Dimension("model operators do not match the innovation grid".into()));
        }
        if !ar.is_empty() {
            check_stability(&ar)?;
        }
        let contraction = match (kind, ar.len()) {
            (ModelKind::Far, 1) => Some(ar[0].op_norm()?),
            _ => None,
        };
        let causal = causal_series(kind, &ar, &ma, linear.as_ref(), &space)?;
        let burn_in = if kind == ModelKind::Degenerate { 0 } else { DEFAULT_BURN_IN.max(causal.len()) };
        Ok(Self { kind, ar, ma, linear, innovation, cross: None, causal, contraction, burn_in })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn space(&self) -> &GridSpace {
        self.innovation.space()
    }

    pub fn ar_ops(&self) -> &[LinearOp] {
        &self.ar
    }

    pub fn ma_ops(&self) -> &[LinearOp] {
        &self.ma
    }

    pub fn linear_coeffs(&self) -> Option<&LinearCoeffs> {
        self.linear.as_ref()
    }

    pub fn innovation(&self) -> &InnovationLaw {
        &self.innovation
    }

    pub fn cross_link(&self) -> Option<&CrossLink> {
        self.cross.as_ref()
    }

    /// `ξ = ‖ψ‖_L` for fAR(1) models.
    pub fn contraction(&self) -> Option<f64> {
        self.contraction
    }

    /// Number `J` of retained causal coefficients `Φ_0, …, Φ_{J-1}`.
    pub fn truncation(&self) -> usize {
        self.causal.len()
    }

    pub fn causal_coefficients(&self) -> &[LinearOp] {
        &self.causal
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    fn require_causal(&self) -> Result<()> {
        if self.kind == ModelKind::Degenerate {
            Err(Error::Unsupported("the degenerate model has no innovation representation"))
        } else {
            Ok(())
        }
    }
}

/// Companion operator of `(α_1, …, α_p)` on `H^p`.
pub fn companion(ar: &[LinearOp]) -> Result<BlockOp> {
    let p = ar.len();
    let space = ar
        .first()
        .map(|a| a.domain().clone())
        .ok_or_else(|| Error::Model("empty autoregression".into()))?;
    BlockOp::from_fn(p, p, |i, j| {
        Ok(if i == 0 {
            ar[j].clone()
        } else if j + 1 == i {
            LinearOp::identity(&space)
        } else {
            LinearOp::zero(&space, &space)
        })
    })
}

fn check_stability(ar: &[LinearOp]) -> Result<()> {
    let comp = companion(ar)?;
    let mut power = comp.clone();
    for _ in 0..STABILITY_POWERS {
        if power.op_norm()? < 1.0 {
            return Ok(());
        }
        power = compose_blocks(&power, &comp)?;
    }
    Err(Error::Stability(format!(
        "no power j <= {STABILITY_POWERS} of the companion operator has norm below 1"
    )))
}

fn causal_series(
    kind: ModelKind,
    ar: &[LinearOp],
    ma: &[LinearOp],
    linear: Option<&LinearCoeffs>,
    space: &GridSpace,
) -> Result<Vec<LinearOp>> {
    let id = LinearOp::identity(space);
    match (kind, linear) {
        (ModelKind::Degenerate, _) => Ok(Vec::new()),
        (ModelKind::Iid, _) => Ok(vec![id]),
        (_, Some(LinearCoeffs::Explicit(list))) => {
            let mut out = vec![id];
            out.extend(list.iter().cloned());
            while out.len() > 1 && out.last().is_some_and(|op| op.kernel().amax() == 0.0) {
                out.pop();
            }
            Ok(out)
        }
        (_, Some(LinearCoeffs::Geometric { base, ratio })) => {
            let b = base.op_norm()?;
            let mut out = vec![id];
            let mut term = base.scale(*ratio);
            let mut norm = b * ratio;
            while norm / (1.0 - ratio) >= TRUNCATION_TOL {
                if out.len() >= MAX_TRUNCATION {
                    return Err(Error::Stability("linear coefficients decay too slowly".into()));
                }
                out.push(term.clone());
                term = term.scale(*ratio);
                norm *= ratio;
            }
            Ok(out)
        }
        _ => {
            let (p, q) = (ar.len(), ma.len());
            let mut phis = vec![id];
            let mut norms = vec![1.0];
            for j in 1.. {
                if j > MAX_TRUNCATION {
                    return Err(Error::Stability(format!(
                        "causal coefficients did not decay within {MAX_TRUNCATION} terms"
                    )));
                }
                let mut phi = if j <= q { ma[j - 1].clone() } else { LinearOp::zero(space, space) };
                for i in 1..=p.min(j) {
                    phi.add_assign(&compose(&ar[i - 1], &phis[j - i])?);
                }
                let nj = phi.op_norm()?;
                if j > q && tail_negligible(&norms, nj, p) {
                    break;
                }
                phis.push(phi);
                norms.push(nj);
            }
            Ok(phis)
        }
    }
}

/// Whether `Σ_{i≥j} ‖Φ_i‖` is below tolerance given the norms so far and
/// `n_j = ‖Φ_j‖`. Exact zeros over a full AR memory end the series; otherwise
/// the tail is extrapolated with the largest of the last three ratios.
fn tail_negligible(norms: &[f64], nj: f64, p: usize) -> bool {
    let memory = p.saturating_sub(1).min(norms.len());
    if nj == 0.0 && norms[norms.len() - memory..].iter().all(|&x| x == 0.0) {
        return true;
    }
    if norms.len() < 3 {
        return false;
    }
    let mut seq: Vec<f64> = norms[norms.len() - 3..].to_vec();
    seq.push(nj);
    let mut ratio = 0.0f64;
    for w in seq.windows(2) {
        if w[0] == 0.0 {
            if w[1] != 0.0 {
                return false;
            }
        } else {
            ratio = ratio.max(w[1] / w[0]);
        }
    }
    ratio < 1.0 && nj / (1.0 - ratio) < TRUNCATION_TOL
}

/// Which innovation a term of a coupled value was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnovationSource {
    Original,
    /// The independent copy sequence `ε^(ℓ)`.
    Copy(usize),
}

/// A coupled value with the provenance of each causal term: entry `j`
/// records the innovation feeding `Φ_j`, at time `k - j`.
#[derive(Debug, Clone)]
pub struct Coupled {
    pub value: GridFunction,
    pub sources: Vec<(i64, InnovationSource)>,
}

/// Simulated path `X_1, …, X_N` (and `Y` for cross-linked models) together
/// with the innovations needed to build couplings.
#[derive(Debug, Clone)]
pub struct PathBundle {
    pub xs: Vec<GridFunction>,
    pub ys: Option<Vec<GridFunction>>,
    pub seed: u64,
    pub burn_in: usize,
    pub truncation: usize,
    /// Couplings recorded with [`PathBundle::record_coupling`], keyed `(k, ℓ)`.
    pub couplings: BTreeMap<(usize, usize), GridFunction>,
    innovations: Vec<DVector<f64>>,
    cross_noise: Vec<DVector<f64>>,
}

impl PathBundle {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// `ε_t` for `1 - burn_in ≤ t ≤ N`.
    pub fn innovation(&self, t: i64) -> Option<GridFunction> {
        let idx = t + self.burn_in as i64 - 1;
        let v = self.innovations.get(usize::try_from(idx).ok()?)?;
        Some(GridFunction::from_vector(self.xs[0].space(), v.clone()))
    }

    fn innovation_values(&self, t: i64) -> &DVector<f64> {
        &self.innovations[(t + self.burn_in as i64 - 1) as usize]
    }

    pub fn record_coupling(&mut self, model: &ModelSpec, k: usize, l: usize) -> Result<&GridFunction> {
        let value = couple(model, self, k, l)?;
        Ok(self.couplings.entry((k, l)).or_insert(value))
    }
}

pub fn simulate(model: &ModelSpec, n: usize, seed: u64) -> Result<PathBundle> {
    if n == 0 {
        return Err(Error::Config("sample size must be at least 1".into()));
    }
    let space = model.space();
    let law = &model.innovation;
    let mut rng = stream(seed, TAG_PATH, 0);
    let (innovations, values) = if model.kind == ModelKind::Degenerate {
        let x = law.draw(&mut rng);
        (vec![x.clone()], vec![x; n])
    } else {
        let total = model.burn_in + n;
        let eps: Vec<DVector<f64>> = (0..total).map(|_| law.draw(&mut rng)).collect();
        let mut xs: Vec<DVector<f64>> = Vec::with_capacity(total);
        for t in 0..total {
            let x = match model.kind {
                ModelKind::Iid => eps[t].clone(),
                ModelKind::Linear => {
                    let mut x = eps[t].clone();
                    for (j, phi) in model.causal.iter().enumerate().skip(1).take_while(|(j, _)| *j <= t) {
                        x += phi.apply_values(&eps[t - j]);
                    }
                    x
                }
                _ => {
                    let mut x = eps[t].clone();
                    for (j, beta) in model.ma.iter().enumerate().take_while(|(j, _)| *j < t) {
                        x += beta.apply_values(&eps[t - j - 1]);
                    }
                    for (i, alpha) in model.ar.iter().enumerate().take_while(|(i, _)| *i < t) {
                        x += alpha.apply_values(&xs[t - i - 1]);
                    }
                    x
                }
            };
            xs.push(x);
        }
        xs.drain(..model.burn_in);
        (eps, xs)
    };
    let (ys, cross_noise) = match &model.cross {
        Some(link) => {
            let mut noise_rng = stream(seed, TAG_CROSS_NOISE, 0);
            let etas: Vec<DVector<f64>> = (0..n).map(|_| link.noise.draw(&mut noise_rng)).collect();
            let ys = values
                .iter()
                .zip(&etas)
                .map(|(x, eta)| GridFunction::from_vector(space, link.theta.apply_values(x) + eta))
                .collect();
            (Some(ys), etas)
        }
        None => (None, Vec::new()),
    };
    Ok(PathBundle {
        xs: values.into_iter().map(|v| GridFunction::from_vector(space, v)).collect(),
        ys,
        seed,
        burn_in: model.burn_in,
        truncation: model.truncation(),
        couplings: BTreeMap::new(),
        innovations,
        cross_noise,
    })
}

fn copy_innovation(law: &InnovationLaw, seed: u64, tag: u64, l: usize, t: i64) -> DVector<f64> {
    let mut rng = stream(derive_seed(seed, tag), l as u64, t as u64);
    law.draw(&mut rng)
}

fn check_bundle(model: &ModelSpec, bundle: &PathBundle, k: usize) -> Result<()> {
    model.require_causal()?;
    if bundle.truncation != model.truncation() || bundle.burn_in != model.burn_in {
        return Err(Error::Model("path bundle was not simulated from this model".into()));
    }
    if k == 0 || k > bundle.len() {
        return Err(Error::Window(format!("coupling index k = {k} outside 1..={}", bundle.len())));
    }
    Ok(())
}

/// `Σ_{j=ℓ}^{J-1} Φ_j(ε^(ℓ)_{k-j} - ε_{k-j})` with the copies from stream `tag`.
fn coupling_correction(model: &ModelSpec, bundle: &PathBundle, tag: u64, k: usize, l: usize) -> DVector<f64> {
    let mut corr = DVector::zeros(model.space().dim());
    for (j, phi) in model.causal.iter().enumerate().skip(l) {
        let t = k as i64 - j as i64;
        let fresh = copy_innovation(&model.innovation, bundle.seed, tag, l, t);
        corr += phi.apply_values(&(fresh - bundle.innovation_values(t)));
    }
    corr
}

/// `X_k^(ℓ)` with provenance of each causal term.
pub fn couple_traced(model: &ModelSpec, bundle: &PathBundle, k: usize, l: usize) -> Result<Coupled> {
    check_bundle(model, bundle, k)?;
    let corr = coupling_correction(model, bundle, TAG_COPY_X, k, l);
    let value = GridFunction::from_vector(model.space(), bundle.xs[k - 1].values() + corr);
    let sources = (0..model.truncation())
        .map(|j| {
            let src = if j < l { InnovationSource::Original } else { InnovationSource::Copy(l) };
            (k as i64 - j as i64, src)
        })
        .collect();
    Ok(Coupled { value, sources })
}

/// `X_k^(ℓ)`: the path value at `k` rebuilt from the innovations
/// `ε_k, …, ε_{k-ℓ+1}` and independent copies further back.
pub fn couple(model: &ModelSpec, bundle: &PathBundle, k: usize, l: usize) -> Result<GridFunction> {
    Ok(couple_traced(model, bundle, k, l)?.value)
}

/// `Y_k^(ℓ) = Θ(X̃_k^(ℓ)) + η̃_k` where `X̃` uses copy streams independent of
/// those of [`couple`] and `η̃_k = η_k` unless `ℓ = 0`.
pub fn couple_cross(model: &ModelSpec, bundle: &PathBundle, k: usize, l: usize) -> Result<GridFunction> {
    check_bundle(model, bundle, k)?;
    let link = model.cross.as_ref().ok_or(Error::Unsupported("model has no cross link"))?;
    let corr = coupling_correction(model, bundle, TAG_COPY_Y, k, l);
    let x = bundle.xs[k - 1].values() + corr;
    let eta = if l == 0 {
        copy_innovation(&link.noise, bundle.seed, TAG_COPY_ETA, 0, k as i64)
    } else {
        bundle.cross_noise[k - 1].clone()
    };
    Ok(GridFunction::from_vector(model.space(), link.theta.apply_values(&x) + eta))
}

/// How `Σ_{k≥κ'} c_k` is completed beyond the estimated horizon `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailRule {
    /// No extrapolation: the sum stops at `K`, and a start beyond `K` is an error.
    None,
    /// `c_k = c_K r^{k-K}` for `k > K`.
    Geometric { ratio: f64 },
}

impl TailRule {
    /// Geometric ratio `r = (c_K / c_{K-2})^{1/2}` fitted to the last three points.
    pub fn fit_geometric(seq: &[f64]) -> Result<Self> {
        let k = seq.len();
        if k < 3 {
            return Err(Error::Config(format!("geometric tail needs a horizon of at least 3, got {k}")));
        }
        let (last, first) = (seq[k - 1], seq[k - 3]);
        let ratio = if first > 0.0 { (last / first).max(0.0).sqrt() } else { 0.0 };
        Ok(TailRule::Geometric { ratio })
    }

    /// `Σ_{k≥from} c_k` where `seq[k-1] = c_k`.
    pub fn tail_sum(&self, seq: &[f64], from: usize) -> Result<f64> {
        let horizon = seq.len();
        let from = from.max(1);
        let head: f64 = seq.iter().skip(from - 1).sum();
        match *self {
            TailRule::None => {
                if from > horizon {
                    Err(Error::InsufficientMoments { needed: from, horizon })
                } else {
                    Ok(head)
                }
            }
            TailRule::Geometric { ratio } => {
                if !(ratio < 1.0) {
                    return Err(Error::Domain(format!(
                        "fitted tail ratio {ratio} >= 1: coupling sequence does not look summable"
                    )));
                }
                let last = seq.last().copied().unwrap_or(0.0);
                let steps = if from > horizon { (from - horizon) as i32 } else { 1 };
                Ok(head + last * ratio.powi(steps) / (1.0 - ratio))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentProvenance {
    Estimated,
    UserCapped,
}

/// Moment functionals of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMoments {
    pub nu2: MeanSe,
    pub nu4: MeanSe,
    /// Entry `k-1` estimates `ν₄(X_k - X_k^(k))`.
    pub coupling: Vec<MeanSe>,
    pub tail: TailRule,
}

impl SeriesMoments {
    pub fn coupling_values(&self) -> Vec<f64> {
        self.coupling.iter().map(|c| c.mean).collect()
    }

    /// `Σ_{k≥from} ν₄(X_k - X_k^(k))`, completed by the tail rule.
    pub fn coupling_sum(&self, from: usize) -> Result<f64> {
        self.tail.tail_sum(&self.coupling_values(), from)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub x: SeriesMoments,
    /// Present for cross-linked models.
    pub y: Option<SeriesMoments>,
    pub nu4_eps: MeanSe,
    pub replications: usize,
    pub provenance: MomentProvenance,
}

impl MomentSet {
    /// Moments of `Y`, or of `X` when the model has no cross link.
    pub fn y_or_x(&self) -> &SeriesMoments {
        self.y.as_ref().unwrap_or(&self.x)
    }

    pub fn horizon(&self) -> usize {
        self.x.coupling.len()
    }

    /// Replace estimated `ν₄` values by user-supplied caps.
    pub fn with_caps(mut self, nu4_x: Option<f64>, nu4_y: Option<f64>) -> Self {
        if let Some(cap) = nu4_x {
            self.x.nu4 = MeanSe { mean: cap, se: 0.0 };
            self.provenance = MomentProvenance::UserCapped;
        }
        if let (Some(cap), Some(y)) = (nu4_y, self.y.as_mut()) {
            y.nu4 = MeanSe { mean: cap, se: 0.0 };
            self.provenance = MomentProvenance::UserCapped;
        }
        self
    }

    pub fn with_tail_rule(mut self, rule: TailRule) -> Self {
        self.x.tail = rule;
        if let Some(y) = self.y.as_mut() {
            y.tail = rule;
        }
        self
    }
}

/// Norms from one Monte Carlo replication of [`estimate_moments`].
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSample {
    pub eps_norm: f64,
    pub x_norm: f64,
    /// `‖X_k - X_k^(k)‖` for `k = 1..=K`.
    pub x_gaps: Vec<f64>,
    pub y_norm: Option<f64>,
    pub y_gaps: Vec<f64>,
}

/// One replication: a fresh stationary draw of `X_k` from the causal series,
/// and for every `k ≤ K` the gap to `X_k^(k)`.
pub fn moment_sample(model: &ModelSpec, seed: u64, index: u64, horizon: usize) -> Result<MomentSample> {
    model.require_causal()?;
    let space = model.space();
    let w = space.weights();
    let norm = |v: &DVector<f64>| weighted_dot(w, v, v).sqrt();
    let mut rng = stream(seed, TAG_MOMENTS, index);
    let law = &model.innovation;
    let j_max = model.truncation();
    let e: Vec<DVector<f64>> = (0..j_max).map(|_| law.draw(&mut rng)).collect();
    let fx: Vec<DVector<f64>> = (0..j_max).map(|_| law.draw(&mut rng)).collect();

    let gaps = |copies: &[DVector<f64>]| -> Vec<DVector<f64>> {
        // suffix sums D_k = Σ_{j≥k} Φ_j(e_j - f_j), k = 1..=K
        let mut out = vec![DVector::zeros(space.dim()); horizon];
        let mut acc = DVector::zeros(space.dim());
        for j in (1..j_max).rev() {
            acc += model.causal[j].apply_values(&(&e[j] - &copies[j]));
            if j <= horizon {
                out[j - 1] = acc.clone();
            }
        }
        out
    };
    let mut x = DVector::zeros(space.dim());
    for (phi, ej) in model.causal.iter().zip(&e) {
        x += phi.apply_values(ej);
    }
    let x_gaps = gaps(&fx).iter().map(norm).collect();
    let (y_norm, y_gaps) = match &model.cross {
        Some(link) => {
            let fy: Vec<DVector<f64>> = (0..j_max).map(|_| law.draw(&mut rng)).collect();
            let eta = link.noise.draw(&mut rng);
            let y = link.theta.apply_values(&x) + eta;
            let gaps = gaps(&fy).iter().map(|g| norm(&link.theta.apply_values(g))).collect();
            (Some(norm(&y)), gaps)
        }
        None => (None, Vec::new()),
    };
    Ok(MomentSample { eps_norm: norm(&e[0]), x_norm: norm(&x), x_gaps, y_norm, y_gaps })
}

/// Aggregate replications; the tail rule is a geometric fit on the last
/// three coupling estimates.
pub fn summarize_moments(samples: &[MomentSample]) -> Result<MomentSet> {
    if samples.len() < 2 {
        return Err(Error::Config(format!("need at least 2 replications, got {}", samples.len())));
    }
    let horizon = samples[0].x_gaps.len();
    let column = |f: &dyn Fn(&MomentSample) -> f64| -> Vec<f64> { samples.iter().map(f).collect() };
    let series = |norm: &dyn Fn(&MomentSample) -> f64, gap: &dyn Fn(&MomentSample, usize) -> f64| -> Result<SeriesMoments> {
        let norms = column(norm);
        let coupling: Vec<MeanSe> = (0..horizon).map(|k| nu_p(&column(&|s| gap(s, k)), 4.0)).collect();
        let values: Vec<f64> = coupling.iter().map(|c| c.mean).collect();
        Ok(SeriesMoments {
            nu2: nu_p(&norms, 2.0),
            nu4: nu_p(&norms, 4.0),
            tail: TailRule::fit_geometric(&values)?,
            coupling,
        })
    };
    let x = series(&|s| s.x_norm, &|s, k| s.x_gaps[k])?;
    let y = if samples[0].y_norm.is_some() {
        Some(series(&|s| s.y_norm.unwrap_or(0.0), &|s, k| s.y_gaps[k])?)
    } else {
        None
    };
    Ok(MomentSet {
        x,
        y,
        nu4_eps: nu_p(&column(&|s| s.eps_norm), 4.0),
        replications: samples.len(),
        provenance: MomentProvenance::Estimated,
    })
}

/// `ν̂₂`, `ν̂₄` and the coupling sequences `k ↦ ν̂₄(X_k - X_k^(k))`,
/// `k = 1..=horizon`, from `replications` independent draws.
pub fn estimate_moments(model: &ModelSpec, replications: usize, horizon: usize, seed: u64) -> Result<MomentSet> {
    if replications < 2 {
        return Err(Error::Config(format!("need at least 2 replications, got {replications}")));
    }
    if horizon < 3 {
        return Err(Error::Config(format!("coupling horizon must be at least 3, got {horizon}")));
    }
    let samples = (0..replications as u64)
        .map(|r| moment_sample(model, seed, r, horizon))
        .collect::<Result<Vec<_>>>()?;
    summarize_moments(&samples)
}
