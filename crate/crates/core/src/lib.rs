//! Simulation, model reduction and parameter sensitivity for stochastic
//! reaction networks whose reactions fire on separated time-scales.

pub mod bench;
pub mod error;
pub mod kinetics;
pub mod network;
pub mod oracle;
pub mod reduction;
pub mod report;
pub mod sensitivity;
pub mod ssa;
pub mod stats;

pub use error::{Error, Result};
