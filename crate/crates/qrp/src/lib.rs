//! Monte Carlo simulation and analysis of qubit quantum renewal processes.
//!
//! The dynamics alternates exact dephasing evolution with CPTP jumps whose
//! times follow a (possibly modified) renewal process. The crate estimates
//! the trace distance between two evolved states by averaging Bloch-vector
//! differences over trajectories with shared jump randomness, detects
//! trace-distance revivals, computes the BLP non-Markovianity measure with an
//! optimization over antipodal pure initial pairs, and cross-checks the
//! pure-jump regime against closed-form parity oracles.

pub mod analytic;
pub mod bloch;
pub mod cli;
pub mod config;
pub mod dephasing;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod nonmarkov;
pub mod trajectory;
pub mod wtd;

pub use error::{Error, Result};

/// Tool version embedded in every output artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
