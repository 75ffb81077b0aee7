//! Quantum Rabi model driven by a complex, PT-symmetric parametric coupling.
//!
//! The crate couples a direct simulator of the full model (truncated
//! qubit ⊗ cavity space, adaptive Runge–Kutta with norm bookkeeping) with
//! the closed-form instanton analytics it is compared against, plus a
//! seeded ensemble harness and the file formats used by the `rabi` CLI.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod config;
pub mod drive;
pub mod ensemble;
pub mod error;
pub mod hamiltonian;
pub mod hilbert;
pub mod integrator;
pub mod output;

pub use error::{Error, Result};
