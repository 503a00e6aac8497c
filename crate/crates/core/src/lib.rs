//! Coupling constructions for SDEs `dX_t = b(X_t) dt + dZ_t` driven by
//! additive pure-jump Lévy noise: reflection, refined basic and combined
//! reflection-and-basic couplings, exact operator checks on discrete
//! measures, pathwise simulation and Monte Carlo estimators of coupling
//! times and semigroup regularity.

pub mod cli;
pub mod drift;
pub mod estimators;
pub mod error;
pub mod geometry;
pub mod measures;
pub mod operators;
pub mod quadrature;
pub mod report;
pub mod simulate;

pub use error::{Error, Result};
