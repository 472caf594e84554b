//! Ground truth, coverage metrics and numerical primitives.

mod coverage;
mod numeric;
mod truth;

pub use coverage::*;
pub use numeric::*;
pub use truth::*;
