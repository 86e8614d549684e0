//! Spectral and spatial dyadic Green's functions for horizontally layered
//! Maxwell and elastic media, written in a nine-matrix basis whose
//! coefficients depend on the horizontal wavenumber only through `k_rho`.

pub mod basis;
pub mod cli;
pub mod elastic;
mod error;
pub mod hankel;
mod linalg;
pub mod maxwell;
pub mod oracle;
pub mod stack;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Plane-wave propagation direction inside a layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// `e^{+i k_z z}` dependence.
    Up,
    /// `e^{-i k_z z}` dependence.
    Down,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Up, Direction::Down];

    /// Sign `τ` in the exponent `e^{τ i k_z z}`.
    pub fn tau(self) -> f64 {
        match self {
            Direction::Up => 1.0,
            Direction::Down => -1.0,
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            Direction::Up => 0,
            Direction::Down => 1,
        }
    }
}
