//! Simulation and estimation toolkit for few-photon spin-squeezed
//! interferometry.
//!
//! The library covers the full analysis chain of a photon-subtracted
//! twin-Fock experiment:
//!
//! - [`fock`]: fixed-photon-number state vectors and Stokes operators;
//! - [`states`]: uncorrelated, twin-Fock, down-conversion, and Yurke
//!   probe states, plus diagonal-basis photon subtraction;
//! - [`interferometer`]: the phase rotation U(φ) = exp(−i S₃ φ/2) and
//!   outcome distributions p_m(φ);
//! - [`distinguishability`]: partial mode overlap between source arms and
//!   phase-insensitive noise admixtures;
//! - [`metrology`]: Fisher information, Cramér–Rao phase limits, and the
//!   ξ_S / ξ_R squeezing parameters;
//! - [`detector`]: multiplexed click-counting efficiencies Σ_m, count
//!   rescaling, and Poisson sampling;
//! - [`estimation`]: least-squares fringe fitting, bootstrap Fisher
//!   bands, and maximum-likelihood phase estimation;
//! - [`io`]: CSV/JSON formats with atomic writes;
//! - [`cli`]: the `squint` binary surface.

pub mod cli;
pub mod detector;
pub mod distinguishability;
pub mod error;
pub mod estimation;
pub mod fock;
pub mod interferometer;
pub mod io;
pub mod metrology;
pub mod states;

mod simplex;

pub use error::{Error, Result};
