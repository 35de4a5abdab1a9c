//! Experiment harness: environments, comparator levels, the run loop, CSV and plot
//! data output, and sweep configuration.

pub mod comparator;
pub mod config;
pub mod env;
pub mod error;
pub mod plot;
pub mod run;

pub use error::{HarnessError, Result};
