//! Simulation and analysis toolkit for a heralded single-photon OAM quantum
//! memory: pair generation, storage channel, time-tag correlation analysis,
//! image metrics, polarization process tomography and OAM interference.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod interference;
pub mod memory;
pub mod pgm;
pub mod polarization;
pub mod rng;
pub mod source;
pub mod spatial;
pub mod timetag;
pub mod tomography;

pub use error::{Error, ErrorClass, Result};
