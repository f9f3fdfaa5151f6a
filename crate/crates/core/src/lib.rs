//! Lagged (cross-)covariance operators of Cartesian product Hilbert space
//! valued processes, on a discretized `L²[0,1]`.
//!
//! The crate is `no_std` (with `alloc`). It covers:
//!
//! * [`hilbert`]: grid spaces, functions, kernel operators and their norms,
//! * [`product`]: Cartesian powers `H^m`, block operators and the lag window
//!   `(N', κ, κ')` shared by every estimator and bound,
//! * [`process`]: functional AR / linear / ARMA simulation with the
//!   shared-innovation couplings `X_k^(ℓ)` and moment estimation,
//! * [`estimators`]: the empirical lagged covariance estimators and analytic
//!   oracles for fAR(1)-type models,
//! * [`bounds`]: the explicit error bounds `ξ`, `τ`, `τ̃` and their
//!   propagation through sums and products,
//! * [`spectral`]: eigenelements and perturbation inequalities,
//! * [`yule_walker`]: Tychonoff-regularized Yule-Walker estimation.
//!
//! IO, configuration files, parallel experiment orchestration and the CLI
//! live in the `lagcov-lab` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod hilbert;
pub mod kernels;
mod linalg;
pub mod process;
pub mod product;
pub mod spectral;
pub mod stats;
pub mod yule_walker;

pub use error::{Error, Result};
pub use hilbert::{inner, tensor, GridFunction, GridSpace, LinearOp, OpNorms};
pub use product::{embed, lag_window, product_tensor, BlockOp, LagWindow, ProductElement};
