//! Command-line harness around `kalman_core`: simulate trajectories, filter
//! them, solve batch problems and run the verification suite.

pub mod batch;
pub mod checks;
pub mod cli;
pub mod config;
pub mod error;
pub mod filter;
pub mod io;
pub mod simulate;
pub mod verify;

pub use config::{FilterVariant, Overrides, ScenarioConfig};
pub use error::{HarnessError, Result};
