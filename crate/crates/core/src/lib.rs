//! Circuit-QED degenerate parametric down-conversion with a cyclic
//! three-level qubit coupled to the fundamental and second-harmonic modes of
//! a resonator.
//!
//! The crate covers the whole pipeline: operator algebra on the truncated
//! `qubit ⊗ a ⊗ b` space ([`fock`]), the physical model and its Hamiltonians
//! ([`model`]), numeric adiabatic elimination of the qubit ([`elimination`]),
//! closed-system dynamics of the full and effective models ([`dynamics`]) and
//! the driven-dissipative steady state of the fundamental mode ([`steady`]).
//! The [`cli`] module backs the `pdcsim` binary.

pub mod cli;
pub mod dynamics;
pub mod elimination;
pub mod error;
pub mod fock;
pub mod model;
pub mod steady;

pub use error::{Error, Result};
