//! Online convex-concave optimization under non-stationarity.
//!
//! The crate is organised around the three modules of the modular algorithm:
//!
//! - [`ader`]: the adaptive module, a pair of meta-expert learners that track
//!   arbitrary comparator sequences.
//! - [`integration`]: the prediction-error expert and the two-expert meta layer,
//!   whose decisions are coupled and solved jointly through [`vi`].
//! - [`aggregator`]: clipped Hedge over several predictor sequences.
//!
//! [`runtime`] wires them into the per-round decide/observe loop with the
//! doubling trick. [`optoppm`] is the single-predictor optimistic proximal
//! point baseline. [`geometry`] and [`payoff`] hold the shared primitives.

pub mod ader;
pub mod aggregator;
pub mod error;
pub mod geometry;
pub mod integration;
pub mod optoppm;
pub mod payoff;
pub mod prox;
pub mod runtime;
pub mod vi;

pub use error::{OccoError, Result};
