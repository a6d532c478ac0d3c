//! Exact two-party simulation of entanglement-assisted instantaneous
//! measurements of nonlocal observables.
//!
//! Alice and Bob each own system qubits and halves of pre-shared ebits. Every
//! protocol is simulated by exhaustive branch enumeration over a dense
//! statevector, with every gate and every classical read checked against the
//! owning party. Parties never see each other's measurement records while the
//! protocol runs; records are only combined afterwards, by [`protocols::infer_outcome`].
//!
//! Layout:
//! - [`qcore`]: statevector engine (gates, branch-enumerating measurement, partial trace).
//! - [`stator`]: party-disciplined remote operations built on shared ebits.
//! - [`protocols`]: the end-to-end measurement protocols and record-based inference.
//! - [`verify`]: independent oracles (Born projector, no-signaling, sweeps, map tables).
//! - [`cli`]: the `nlmeas` command-line front end.

pub mod cli;
pub mod error;
pub mod protocols;
pub mod qcore;
pub mod stator;
pub mod verify;

pub use error::{Error, Result};
