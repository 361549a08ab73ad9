//! Adiabaticity diagnostics for driven Fermi-Hubbard chains.
//!
//! The crate builds the half-filled chain Hamiltonian under a linear
//! potential ramp, propagates ground or thermal initial states, and
//! compares the evolved state with the instantaneous adiabatic reference
//! through the temperature-extended adiabatic criterion, the Bures and
//! trace distances, and the site-density distance.

pub mod adiabaticity;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod scenario;
pub mod spectral;

pub use error::{Error, Result};
