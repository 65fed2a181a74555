use crate::cfr::CfrTensor;
use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};
use crate::estimators::FullGridEstimate;
use crate::grid::CarrierGrid;
use crate::impairments::{apply_cfo, apply_timing_offset};

pub const NMSE_FLOOR_DB: f64 = -150.0;

pub fn linear_to_db(v: f64) -> f64 {
    if v <= 0.0 {
        return NMSE_FLOOR_DB;
    }
    (10.0 * v.log10()).max(NMSE_FLOOR_DB)
}

/// Channel the pilots actually went through: the label with the record's
/// timing and frequency offsets applied. Stage 4 restores the timing
/// offset and CFO is never removed, so estimates are scored against this.
pub fn effective_truth(record: &DatasetRecord, grid: &CarrierGrid) -> CfrTensor {
    let shifted = apply_timing_offset(&record.truth, record.draw.to_s, grid);
    apply_cfo(&shifted, record.draw.cfo_hz, grid)
}

/// `Σ|est - truth|² / Σ|truth|²` over occupied pilots.
pub fn nmse_linear(est: &CfrTensor, truth: &CfrTensor, mask: &[bool]) -> Result<f64> {
    est.ensure_shape(truth.shape())?;
    if mask.len() != truth.n_p() {
        return Err(Error::Shape(format!("mask has {} pilots, tensor has {}", mask.len(), truth.n_p())));
    }
    let mut err = 0.0;
    let mut sig = 0.0;
    for i in 0..truth.n_sym() {
        for k in (0..truth.n_p()).filter(|&k| mask[k]) {
            for j in 0..truth.n_ant() {
                err += (est[(i, k, j)] - truth[(i, k, j)]).norm_sqr();
                sig += truth[(i, k, j)].norm_sqr();
            }
        }
    }
    if !(sig > 0.0) {
        return Err(Error::InvalidArgument("truth has zero energy on occupied pilots".into()));
    }
    Ok(err / sig)
}

/// NMSE in dB of a full-grid estimate, scored at the occupied pilot
/// subcarriers where the truth is defined.
pub fn nmse_db(est: &FullGridEstimate, truth: &CfrTensor, grid: &CarrierGrid) -> Result<f64> {
    let pilots = est.pilot_values(grid)?;
    let mask: Vec<bool> = (0..grid.n_pilots()).map(|k| est.occupied[grid.pilot_subcarrier(k)]).collect();
    Ok(linear_to_db(nmse_linear(&pilots, truth, &mask)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfr::Shape;
    use num_complex::Complex64;

    #[test]
    fn reference_points() {
        let s = Shape::new(2, 8, 2);
        let t = CfrTensor::from_fn(s, |i, k, j| Complex64::new(1.0 + k as f64, (i + j) as f64));
        let mask = vec![true; 8];
        assert_eq!(linear_to_db(nmse_linear(&t, &t, &mask).unwrap()), NMSE_FLOOR_DB);
        let zero = CfrTensor::zeros(s);
        assert!(linear_to_db(nmse_linear(&zero, &t, &mask).unwrap()).abs() < 1e-12);
        assert!(nmse_linear(&t, &zero, &mask).is_err());
    }
}
