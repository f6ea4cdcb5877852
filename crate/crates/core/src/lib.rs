//! Heralded Fock-state generation from spectrally multimode parametric
//! down-conversion truncated at second order in photon number.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod design;
pub mod error;
pub mod filtering;
pub mod herald;
pub mod linalg;
pub mod oracle;
pub mod pdc;
pub mod schmidt;
pub mod units;

pub use error::{Error, Result};
