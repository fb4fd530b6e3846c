//! Forward model, postselection, analytic oracle and image metrics for
//! sub-Rayleigh imaging with a scanned focused transmitter and N-photon
//! postselection on a photon-counting pixel array.

pub mod analytic;
pub mod detector;
pub mod error;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod optics;
pub mod postselect;
pub mod quadrature;
pub mod scenario;
pub mod scene;
pub mod stream;
pub mod units;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use grid::Grid;
