//! Pilot-domain conditioning around the denoising stage: timing-offset
//! compensation, DC pilot repair and power normalization.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::cfr::CfrTensor;
use crate::error::{Error, Result};
use crate::grid::CarrierGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Removes a timing offset `to_s`.
    Forward,
    /// Re-applies it.
    Inverse,
}

/// Forward multiplies pilot `k` by `exp(+j2π f_k τ)`; inverse undoes it.
pub fn compensate_to(ls: &CfrTensor, to_s: f64, direction: Direction, grid: &CarrierGrid) -> CfrTensor {
    let sign = match direction {
        Direction::Forward => 1.0,
        Direction::Inverse => -1.0,
    };
    let ramp: Vec<Complex64> = (0..ls.n_p())
        .map(|k| Complex64::from_polar(1.0, sign * 2.0 * PI * grid.pilot_frequency_hz(k) * to_s))
        .collect();
    let mut out = ls.clone();
    for i in 0..ls.n_sym() {
        for (k, r) in ramp.iter().enumerate() {
            for j in 0..ls.n_ant() {
                out[(i, k, j)] *= r;
            }
        }
    }
    out
}

/// Replaces each listed pilot with the mean of its occupied neighbours
/// `k-1` and `k+1`; a pilot with one occupied neighbour copies it.
/// Unoccupied DC pilots and pilots with no occupied neighbour are left
/// alone.
pub fn repair_dc(ls: &CfrTensor, dc_indices: &[usize], mask: &[bool]) -> Result<CfrTensor> {
    let n_p = ls.n_p();
    if mask.len() != n_p {
        return Err(Error::Shape(format!("mask has {} pilots, tensor has {n_p}", mask.len())));
    }
    if let Some(&k) = dc_indices.iter().find(|&&k| k >= n_p) {
        return Err(Error::OutOfRange(format!("DC index {k} outside [0, {n_p})")));
    }
    let mut out = ls.clone();
    for &k in dc_indices {
        if !mask[k] {
            continue;
        }
        let left = (k > 0 && mask[k - 1] && !dc_indices.contains(&(k - 1))).then(|| k - 1);
        let right = (k + 1 < n_p && mask[k + 1] && !dc_indices.contains(&(k + 1))).then(|| k + 1);
        for i in 0..ls.n_sym() {
            for j in 0..ls.n_ant() {
                let v = match (left, right) {
                    (Some(a), Some(b)) => (ls[(i, a, j)] + ls[(i, b, j)]) * 0.5,
                    (Some(a), None) => ls[(i, a, j)],
                    (None, Some(b)) => ls[(i, b, j)],
                    (None, None) => continue,
                };
                out[(i, k, j)] = v;
            }
        }
    }
    Ok(out)
}

const RMS_FLOOR: f64 = 1e-150;

/// Scales occupied entries to unit RMS. Returns the tensor and the RMS it
/// was divided by; unoccupied entries are set to zero.
pub fn normalize(tensor: &CfrTensor, mask: &[bool]) -> Result<(CfrTensor, f64)> {
    if mask.len() != tensor.n_p() {
        return Err(Error::Shape(format!(
            "mask has {} pilots, tensor has {}",
            mask.len(),
            tensor.n_p()
        )));
    }
    let rms = tensor.masked_mean_power(mask).sqrt();
    if !(rms > RMS_FLOOR) || !rms.is_finite() {
        return Err(Error::Estimation(format!("cannot normalize a tensor with RMS {rms}")));
    }
    let mut out = CfrTensor::zeros(tensor.shape());
    for i in 0..tensor.n_sym() {
        for k in (0..tensor.n_p()).filter(|&k| mask[k]) {
            for j in 0..tensor.n_ant() {
                out[(i, k, j)] = tensor[(i, k, j)] / rms;
            }
        }
    }
    Ok((out, rms))
}

pub fn denormalize(tensor: &CfrTensor, scale: f64) -> CfrTensor {
    tensor.map(|v| v * scale)
}
