//! Numerical laboratory for dropout-regularized linear and random-feature
//! regression: estimators, closed-form expected risks with optimal dropout
//! rates, eigenvalue diagnostics against Marchenko-Pastur predictions, and a
//! seeded Monte Carlo harness that sweeps sample size, model size, feature
//! count, or spectrum and overlays theory on empirics.

pub mod datagen;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod kernel_rf;
pub mod linalg;
pub mod report;
pub mod risk_theory;
pub mod seed;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
