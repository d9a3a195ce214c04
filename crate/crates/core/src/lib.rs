//! Metriplectic simulator for polarized radiative transfer.

pub mod brackets;
pub mod cli;
pub mod coherence;
pub mod dynamics;
pub mod frames;
pub mod medium;
pub mod phase_grid;
pub mod scattering;
pub mod verify;
