//! Finite-volume cluster expansions and large deviations for classical continuum gases.

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cluster_coeffs;
pub mod config;
pub mod deviations;
pub mod duality;
pub mod error;
pub mod graph_enum;
pub mod integrate;
pub mod numerics;
pub mod oracle;
pub mod potentials;
pub mod region;
pub mod thermo;

pub use error::{Error, Result};
