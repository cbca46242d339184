//! Interference-aware wireless channel assignment via recursive QAOA.
//!
//! The crate is organized around one flow: a [`wireless`] channel-assignment
//! instance is encoded as a penalty QUBO, converted to an Ising instance
//! ([`ising`]), optionally shrunk by a classical [`presolve`] stage, solved by
//! recursive QAOA ([`rqaoa`]) on a dense state-vector simulator
//! ([`simulator`]) with a derivative-free parameter search ([`qaoa`]), and
//! finally decoded, repaired and extended classically. Classical reference
//! solvers live in [`baselines`]; [`pipeline`] wires the stages together and
//! computes benchmark metrics.

pub mod baselines;
pub mod error;
pub mod ising;
pub mod pipeline;
pub mod presolve;
pub mod qaoa;
pub mod rqaoa;
pub mod simulator;
pub mod wireless;

pub use error::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
