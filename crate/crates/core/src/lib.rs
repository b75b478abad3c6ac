//! Quantum control pulse correction toolkit for a two-qubit spin system.
//!
//! The crate covers the full pipeline: dense complex linear algebra and
//! superoperator construction ([`linalg`], [`quantum`]), piecewise-constant
//! evolution and the superoperator fidelity ([`dynamics`]), exact pulse
//! gradients and bounded optimization ([`grape`]), corpus generation
//! ([`dataset`]), a bidirectional LSTM trained through the simulator
//! ([`lstm`]), and perturbation-sensitivity statistics ([`analysis`]).
//! [`commands`] wires everything into reproducible experiment runs behind
//! the `pulsecorr` binary.

pub mod adam;
pub mod analysis;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod grape;
pub mod linalg;
pub mod lstm;
pub mod presets;
pub mod quantum;
pub mod rng;

pub use error::{Error, Result};
