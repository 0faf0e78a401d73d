//! Stein variational gradient descent (SVGD) and its random-batch variant.
//!
//! The interacting particle system
//!
//! ```text
//! dX_i/dt = (1/N) Σ_j [ ∇_y K(X_i, X_j) + K(X_i, X_j) ∇log π(X_j) ]
//! ```
//!
//! costs Θ(N²) per evaluation. The random batch method replaces the full sum
//! by sums over small random batches of size `p` that are re-drawn every step,
//! bringing the cost down to Θ(pN) while keeping the drift unbiased.
//!
//! Modules:
//!
//! * [`kernels`]: Gaussian interaction kernel and bandwidth rules.
//! * [`targets`]: score functions for the mixture, quadratic and Bayesian
//!   logistic regression targets, plus dataset loading.
//! * [`batching`]: random partitions and sampled batches.
//! * [`dynamics`]: drift fields, steppers and batch-noise diagnostics.
//! * [`schedules`]: fixed and AdaGrad step sequences.
//! * [`metrics`]: moment estimators, MSE, 1D Wasserstein-2, KDE, accuracy.
//! * [`harness`]: configuration, experiment runners and reports.

pub mod batching;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod metrics;
pub mod rng;
pub mod schedules;
pub mod targets;

pub use ensemble::{DriftField, ParticleEnsemble};
pub use error::{Error, Result};
pub use kernels::Kernel;
pub use targets::Target;
