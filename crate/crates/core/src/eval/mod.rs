//! Error metrics, mean-error surfaces and experiment runs.

mod experiment;
mod metrics;
mod surface;

pub use experiment::*;
pub use metrics::*;
pub use surface::*;
