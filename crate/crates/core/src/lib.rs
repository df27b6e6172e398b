pub mod config;
pub mod error;
pub mod eval;
pub mod grid;
pub mod inversion;
pub mod io;
pub mod net;
pub mod rng;
pub mod synth;
pub mod unwrap;

pub use error::{Error, FormatError, Result};
pub use grid::{ComplexGrid, Grid, GridGeom, RealGrid, C64};
