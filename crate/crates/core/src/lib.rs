//! Single-qubit reconstruction of the quantum state of harmonic oscillator
//! networks.
//!
//! A qubit coupled to one node of the network through a tunable profile
//! `g(s)` ends up carrying the network's Weyl characteristic function in its
//! coherence. This crate diagonalizes the network, synthesizes the coupling
//! profile for any target phase-space point, simulates the qubit readout
//! (ideal, with Markovian decoherence, or with white noise on `g`), and
//! post-processes the reconstructed samples.

pub mod analysis;
pub mod chain;
pub mod config;
pub mod decoherence;
pub mod dynamics;
pub mod error;
pub mod math;
pub mod network;
pub mod noise;
pub mod ode;
pub mod pipeline;
pub mod protocol;
pub mod quad;
pub mod validate;

pub use error::{Error, Result};
pub use math::C64;
