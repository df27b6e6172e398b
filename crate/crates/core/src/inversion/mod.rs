//! Wavefield to wavenumber to modulus.

mod di;
mod fuse;
mod median;
mod wavenumber;

pub use di::*;
pub use fuse::*;
pub use median::*;
pub use wavenumber::*;
