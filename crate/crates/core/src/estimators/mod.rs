//! Receive-side channel estimation.

pub mod interp;
pub mod ls;
pub mod mmse;
pub mod offsets;
pub mod pipeline;
pub mod preprocess;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::cfr::{CfrTensor, Shape};
use crate::error::{Error, Result};
use crate::grid::CarrierGrid;

pub use interp::interpolate_freq;
pub use ls::{ls_extract, LsEstimate};
pub use mmse::{estimate_noise_var, mmse_pdp_estimate, MmseConfig};
pub use offsets::{estimate_cfo, estimate_cfo_slot, estimate_offsets, estimate_to, CfoEstimate, OffsetEstimate, ToEstimate};
pub use pipeline::{run_pipeline, PilotObservation, PipelineOptions, PipelineOutput};
pub use preprocess::{compensate_to, denormalize, normalize, repair_dc, Direction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Ls,
    Mmse,
    Ai,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Ls, Method::Mmse, Method::Ai];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ls => "LS",
            Method::Mmse => "MMSE",
            Method::Ai => "AI",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ls" => Ok(Method::Ls),
            "mmse" => Ok(Method::Mmse),
            "ai" => Ok(Method::Ai),
            other => Err(Error::InvalidArgument(format!(
                "unknown method {other:?} (expected LS, MMSE or AI)"
            ))),
        }
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.as_str().to_string()
    }
}

/// Parses a comma-separated method list such as `"LS,MMSE"`.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let methods = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<_>>>()?;
    if methods.is_empty() {
        return Err(Error::InvalidArgument("empty method list".into()));
    }
    Ok(methods)
}

/// Channel estimate on every subcarrier of every DMRS symbol, laid out
/// symbol-major, then subcarrier, then antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct FullGridEstimate {
    pub values: Vec<Complex64>,
    pub n_sym: usize,
    pub n_sc: usize,
    pub n_ant: usize,
    /// Subcarriers covered by an occupied pilot run.
    pub occupied: Vec<bool>,
    pub method: Method,
}

impl FullGridEstimate {
    pub fn zeros(n_sym: usize, n_sc: usize, n_ant: usize, method: Method) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); n_sym * n_sc * n_ant],
            n_sym,
            n_sc,
            n_ant,
            occupied: vec![false; n_sc],
            method,
        }
    }

    #[inline]
    fn offset(&self, i: usize, sc: usize, j: usize) -> usize {
        (i * self.n_sc + sc) * self.n_ant + j
    }

    #[inline]
    pub fn at(&self, i: usize, sc: usize, j: usize) -> Complex64 {
        self.values[self.offset(i, sc, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, sc: usize, j: usize, v: Complex64) {
        let o = self.offset(i, sc, j);
        self.values[o] = v;
    }

    /// Values at the pilot subcarriers.
    pub fn pilot_values(&self, grid: &CarrierGrid) -> Result<CfrTensor> {
        if self.n_sc != grid.n_subcarriers() {
            return Err(Error::Shape(format!(
                "estimate has {} subcarriers, grid has {}",
                self.n_sc,
                grid.n_subcarriers()
            )));
        }
        let shape = Shape::new(self.n_sym, grid.n_pilots(), self.n_ant);
        Ok(CfrTensor::from_fn(shape, |i, k, j| self.at(i, grid.pilot_subcarrier(k), j)))
    }

    pub fn is_finite_where_occupied(&self) -> bool {
        (0..self.n_sym).all(|i| {
            (0..self.n_sc)
                .filter(|&sc| self.occupied[sc])
                .all(|sc| (0..self.n_ant).all(|j| self.at(i, sc, j).is_finite()))
        })
    }
}
