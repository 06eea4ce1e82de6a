//! Multivariate Hawkes processes observed through interval counts.
//!
//! The crate simulates paths, aggregates them into counts, estimates the
//! count likelihood with a guided particle filter, samples parameters with
//! pseudo-marginal Metropolis-Hastings and fits the complete-data maximum
//! likelihood estimate when event times are known.

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod exact;
pub mod io;
pub mod model;
pub mod par;
pub mod pmmh;
pub mod rng;
pub mod serde_ext;
pub mod simulate;
pub mod smc;
pub mod special;

pub use data::{aggregate, AggregationGrid, EventSequence, IntervalCounts};
pub use error::{Error, Result};
pub use model::{Model, ModelSpec, ParameterVector};
