//! Simulation and verification toolkit for pre- and post-selected quantum
//! systems.
//!
//! - [`hilbert`]: states, projectors, spectral measurements, spin-1/2 helpers.
//! - [`tsvf`]: two-state vectors and the ABL rule.
//! - [`ensembles`]: post-selected mixtures and total-probability compositions.
//! - [`counterfactual`]: weight-equality and consistency checks that decide
//!   whether an ABL value may be read counterfactually.
//! - [`montecarlo`]: seeded sampling of pre/post-selected runs and paired
//!   actual/counterfactual worlds.
//! - [`scenarios`] and [`report`]: named end-to-end constructions and their
//!   serialization.

pub mod counterfactual;
pub mod ensembles;
pub mod error;
pub mod hilbert;
pub mod montecarlo;
pub mod report;
pub mod scenarios;
pub mod tsvf;

pub use error::{Error, Result};

/// Toolkit version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
