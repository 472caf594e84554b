//! Resampling schemes and confidence intervals for the generalization error
//! of supervised learners, together with simulated data-generating processes
//! and a Monte-Carlo coverage harness.

pub mod data;
pub mod error;
pub mod inducers;
pub mod losses;
pub mod methods;
pub mod evaluation;
pub mod harness;
pub mod inference;
pub mod resampling;
pub mod rng;

pub use error::{Error, Result};
