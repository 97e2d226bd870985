//! Configuration, Monte Carlo sweeps and file output behind the `wsg` tool.

pub mod cli;
pub mod cnn;
pub mod config;
pub mod error;
pub mod montecarlo;
pub mod output;

pub use config::{ExperimentConfig, Overrides};
pub use error::{HarnessError, Result};
pub use montecarlo::{run_montecarlo, MonteCarloResult, Sections, Variant};
