//! Multigroup thermal radiative transfer: a discrete-ordinates full-order
//! model, P1 / P1/3 / flux-limited diffusion models, and a variable
//! Eddington factor model closed with data computed from a single
//! transport sweep on diffusion temperatures.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod config;
pub mod coupling;
pub mod diffusion;
pub mod error;
pub mod fields;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod moments;
pub mod physics;
pub mod transport;
pub mod vef;

pub use error::{Error, Result};
