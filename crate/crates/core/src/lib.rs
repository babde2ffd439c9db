//! Stein-type superefficient drift estimation for Brownian motion with
//! constant volatility.
//!
//! The observed process is `X_t = u_t + X^u_t` on `[0, T]`, where `X^u` is a
//! Brownian motion with variance `sigma^2` and `u` is a deterministic drift
//! with `u_0 = 0`. The crate provides:
//!
//! - [`basis`]: the closed-form sine eigenbasis, its eigenvalues and the
//!   spectral projection used by the James–Stein estimator.
//! - [`process`]: seeded path simulation through the truncated Paley–Wiener
//!   series, coefficient extraction and the Girsanov log-density.
//! - [`functionals`]: cylindrical functionals `f(z_1, ..., z_n)` of the
//!   standardized path coordinates, with gradients, Laplacians and
//!   superharmonicity checks.
//! - [`estimators`]: minimax, Stein, James–Stein, Bayes and parametric MLE
//!   drift estimators.
//! - [`risk`]: the Monte Carlo risk engine, gain curves and the closed-form
//!   references they are compared against.

pub mod basis;
pub mod csv;
pub mod error;
pub mod estimators;
pub mod functionals;
pub mod grid;
pub mod process;
pub mod risk;
pub mod rng;
pub mod stats;

pub use basis::{BasisSpec, SpectralCoeffs};
pub use error::{Error, Result};
pub use estimators::{DriftEstimate, EstimatorKind, EstimatorSpec};
pub use functionals::{CylindricalFunctional, SteinFamily};
pub use grid::TimeGrid;
pub use process::{DriftSpec, NoiseDraw, Path};
pub use risk::{GainReport, McConfig, RiskReport};
pub use rng::StreamKey;
