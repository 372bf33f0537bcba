//! Classical propagation and quantum-noise correlation analysis of
//! polarized optical pulses in Kerr fibers.

pub mod analysis;
pub mod config;
pub mod error;
pub mod fluct;
pub mod lattice;
pub mod nlse;
pub mod output;
pub mod pipeline;
pub mod quantum_meas;
pub mod scenarios;

pub use error::{Error, Result};
