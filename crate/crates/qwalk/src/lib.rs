//! Continuous-time quantum walk simulation on transverse-Ising Hamiltonians.

pub mod dynamics;
pub mod error;
pub mod gamma;
pub mod hilbert;
pub mod problems;
pub mod rng;
pub mod drivers;
pub mod spectral;

pub use error::{Error, Result};
