//! Uplink OFDM channel-estimation workbench.
//!
//! Synthesizes fading channels on a comb-2 DMRS grid, corrupts them with
//! receiver impairments, estimates them with LS, MMSE-PDP or a residual
//! CNN, and scores the estimates with NMSE and an uncoded QPSK link.

pub mod cfr;
pub mod channel;
pub mod config;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod generate;
pub mod grid;
pub mod impairments;
pub mod nn;
pub mod seed;

pub use cfr::{CfrTensor, Shape};
pub use error::{Error, Result};
pub use grid::{build_grid, CarrierGrid, GridConfig};
pub use num_complex::Complex64;
