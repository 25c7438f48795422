//! Simulation and analysis of a polarized neutron interferometer measuring
//! spin-path correlations of single neutrons.
//!
//! The crate is organised bottom-up:
//!
//! - [`qcore`]: density matrices over spin ⊗ path, projectors, Kraus channels.
//! - [`apparatus`]: beamline elements and noise processes as channels, plus
//!   scalar calibration models (Larmor rotation, rocking curves, thermal drift).
//! - [`counting`]: mean rates and Poisson detector counts.
//! - [`analysis`]: fringe fits, expectation values, CHSH `S` with errors.
//! - [`procedures`]: complete scripted measurements built from the above.

pub mod analysis;
pub mod apparatus;
pub mod counting;
mod error;
pub mod procedures;
pub mod qcore;

pub use error::{Error, Result};
