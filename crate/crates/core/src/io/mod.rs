//! File formats and atomic output.

mod atomic;
mod cgrid;
pub mod format;
mod pgm;
pub mod table;

pub use atomic::*;
pub use cgrid::*;
pub use pgm::*;
