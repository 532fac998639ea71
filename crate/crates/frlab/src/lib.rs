//! frlab: a numerical laboratory for minimum-norm interpolating regression
//! under latent factor models.
//!
//! The crate computes exact population risks for factor regression, fits the
//! predictors compared throughout (minimum-norm least squares, principal
//! component regression in empirical and population-eigenvector form, ridge,
//! lasso, and a latent-space oracle), evaluates the finite-sample risk bounds
//! attached to each regime, and drives deterministic Monte Carlo sweeps that
//! reproduce the double-descent and estimator-comparison figures.
//!
//! Start with the runnable examples (`cargo run --example double_descent`,
//! etc.) or the `frlab` binary (`frlab preset figure1 --out out/`).

pub mod error;
pub mod linalg;
pub mod model;
pub mod sampling;
pub mod estimators;
pub mod bounds;
pub mod experiments;

pub use error::{Error, Result};
