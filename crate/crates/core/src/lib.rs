//! Attractive log gas on the flat torus.

pub mod error;
pub mod field;
mod fft;
pub mod grid;
pub mod particles;
pub mod potential;
pub mod snapshot;
pub mod solver;
pub mod special;
pub mod stability;

pub use error::{Error, Result};
pub use grid::Grid;
pub use potential::{dimension_constants, DimensionConstants, PotentialTables};
