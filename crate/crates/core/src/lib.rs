//! Simulation and design optimization of rotated GKP grid states for phase sensing.
//!
//! The crate covers the truncated Fock-space substrate, lattice geometry,
//! finite-energy codewords, loss and dephasing channels, Fisher information,
//! the closed-form logical-error model, a finite-difference Adam optimizer,
//! Wigner-function evaluation, and the configuration and export formats used
//! by the `oam-gkp` command-line tool.

pub mod error;
pub mod fock;
pub mod lattice;
pub mod state;
pub mod channels;
pub mod metrology;
pub mod circuit;
pub mod analytic;
pub mod optimizer;
pub mod wigner;
pub mod io;

pub use error::{Error, Result};
