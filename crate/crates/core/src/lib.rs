//! Construction and verification of one-dimensional Schrödinger operators
//! with δ′-interactions whose essential spectrum is a prescribed closed set.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cell_spectrum;
pub mod chain;
pub mod cli;
pub mod extension_lab;
pub mod fd_oracle;
pub mod linalg;
pub mod mivt;
pub mod operator_assembly;
pub mod rooms_passages;
pub mod target_set;
pub mod truncated_spectrum;

pub use chain::{Chain, Strength};
