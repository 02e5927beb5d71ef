//! Offline-Simon key recovery against FX-style constructions, with the
//! classical baselines and security bounds they are measured against.

pub mod bounds;
pub mod ciphers;
pub mod classical;
pub mod error;
pub mod gf2;
pub mod harness;
pub mod offline;
pub mod qsim;

pub use error::{Error, Result};
