//! Four-stage receive chain.
//!
//! 1. LS extraction, DC repair, timing-offset estimate, LS power.
//! 2. Timing-offset removal and normalization.
//! 3. Denoising: identity (LS), MMSE-PDP, or the CNN.
//! 4. Timing-offset re-application, de-normalization, interpolation.

use num_complex::Complex64;

use crate::cfr::CfrTensor;
use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};
use crate::estimators::mmse::{estimate_noise_var, mmse_pdp_estimate, MmseConfig};
use crate::estimators::offsets::estimate_to;
use crate::estimators::preprocess::{compensate_to, denormalize, normalize, repair_dc, Direction};
use crate::estimators::{interpolate_freq, ls_extract, FullGridEstimate, Method};
use crate::grid::{gen_pilot_sequence, CarrierGrid};
use crate::nn::{check_model_geometry, pack_input, unpack_output, DenoiserModel};

/// Received pilots of one slot together with what the receiver knows.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservation {
    pub rx: CfrTensor,
    pub pilots: Vec<Complex64>,
    pub mask: Vec<bool>,
    pub dc_indices: Vec<usize>,
    /// Nominal SNR; `None` when the receiver has to estimate the noise.
    pub snr_db: Option<f64>,
}

impl PilotObservation {
    /// Re-modulates a record's LS observation with a pilot sequence so the
    /// pipeline starts from received samples.
    pub fn from_record(record: &DatasetRecord, grid: &CarrierGrid, pilot_seed: u64) -> Result<Self> {
        let obs = record.observation()?;
        if record.mask.len() != grid.n_pilots() || obs.n_p() != grid.n_pilots() {
            return Err(Error::Shape(format!(
                "record has {} pilots, grid has {}",
                obs.n_p(),
                grid.n_pilots()
            )));
        }
        let pilots = gen_pilot_sequence(pilot_seed, grid.n_pilots())?;
        let mut rx = obs.clone();
        let shape = rx.shape();
        for i in 0..shape.n_sym {
            for (k, p) in pilots.iter().enumerate() {
                for j in 0..shape.n_ant {
                    rx[(i, k, j)] *= p;
                }
            }
        }
        let snr = record.snr_db();
        Ok(Self {
            rx,
            pilots,
            mask: record.mask.clone(),
            dc_indices: record.draw.dc_indices.clone(),
            snr_db: snr.is_finite().then_some(snr),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub mmse: MmseConfig,
    /// Use the observation's nominal SNR for the MMSE noise level instead
    /// of estimating it from the delay-domain floor.
    pub use_nominal_snr: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            mmse: MmseConfig::default(),
            use_nominal_snr: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub estimate: FullGridEstimate,
    /// Stage-4 estimate at the pilots, before interpolation.
    pub pilots: CfrTensor,
    pub to_s: f64,
    pub ls_power: f64,
    pub scale: f64,
}

pub fn run_pipeline(
    obs: &PilotObservation,
    grid: &CarrierGrid,
    method: Method,
    model: Option<&DenoiserModel>,
    opts: &PipelineOptions,
) -> Result<PipelineOutput> {
    if method == Method::Ai && model.is_none() {
        return Err(Error::InvalidArgument("method AI needs a model".into()));
    }
    obs.rx.ensure_shape(crate::cfr::Shape::of_grid(grid))?;
    let mask = &obs.mask;

    // stage 1
    let ls = ls_extract(&obs.rx, &obs.pilots, mask)?;
    let repaired = repair_dc(&ls.values, &obs.dc_indices, mask)?;
    let to = estimate_to(&repaired, mask, grid)?;

    // stage 2
    let aligned = compensate_to(&repaired, to.to_s, Direction::Forward, grid);
    let (normalized, scale) = normalize(&aligned, mask)?;

    // stage 3
    let denoised = match method {
        Method::Ls => normalized,
        Method::Mmse => {
            let noise_var = match obs.snr_db.filter(|_| opts.use_nominal_snr) {
                // LS power is signal plus noise
                Some(snr_db) => ls.power / (1.0 + 10f64.powf(snr_db / 10.0)) / (scale * scale),
                None => estimate_noise_var(&normalized, mask)?,
            };
            mmse_pdp_estimate(&normalized, mask, noise_var, &opts.mmse)?
        }
        Method::Ai => {
            let model = model.expect("checked above");
            check_model_geometry(model, grid.n_sym(), grid.n_ant())?;
            let out = model.infer(&pack_input(&normalized)?)?;
            let mut t = unpack_output(&out)?;
            t.apply_mask(mask);
            t
        }
    };

    // stage 4
    let restored = compensate_to(&denormalize(&denoised, scale), to.to_s, Direction::Inverse, grid);
    let estimate = interpolate_freq(&restored, mask, grid, method)?;
    Ok(PipelineOutput {
        estimate,
        pilots: restored,
        to_s: to.to_s,
        ls_power: ls.power,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfr::Shape;
    use crate::grid::{build_grid, GridConfig};
    use crate::impairments::{apply_timing_offset, ImpairmentDraw};

    fn grid() -> CarrierGrid {
        build_grid(&GridConfig {
            n_prb: 12,
            ..GridConfig::default()
        })
        .unwrap()
    }

    fn record(g: &CarrierGrid, truth: CfrTensor, obs: CfrTensor) -> DatasetRecord {
        DatasetRecord {
            ls_obs: Some(obs),
            truth,
            mask: vec![true; g.n_pilots()],
            draw: ImpairmentDraw::identity(g.n_ant(), 0),
        }
    }

    #[test]
    fn ls_reproduces_noiseless_flat_truth() {
        let g = grid();
        let c = Complex64::new(0.3, -0.7);
        let truth = CfrTensor::from_fn(Shape::of_grid(&g), |_, _, _| c);
        let rec = record(&g, truth.clone(), truth);
        let obs = PilotObservation::from_record(&rec, &g, 11).unwrap();
        let out = run_pipeline(&obs, &g, Method::Ls, None, &PipelineOptions::default()).unwrap();
        for sc in 0..g.n_subcarriers() {
            assert!((out.estimate.at(1, sc, 1) - c).norm() < 1e-12);
        }
    }

    #[test]
    fn timing_offset_is_restored_after_denoising() {
        let g = grid();
        let truth = apply_timing_offset(
            &CfrTensor::from_fn(Shape::of_grid(&g), |_, _, _| Complex64::new(1.0, 0.0)),
            0.4e-6,
            &g,
        );
        let rec = record(&g, truth.clone(), truth.clone());
        let obs = PilotObservation::from_record(&rec, &g, 2).unwrap();
        let out = run_pipeline(&obs, &g, Method::Ls, None, &PipelineOptions::default()).unwrap();
        assert!((out.to_s - 0.4e-6).abs() < 1e-12);
        assert!(out.pilots.max_abs_diff(&truth) < 1e-9);
    }

    #[test]
    fn ai_without_model_is_rejected() {
        let g = grid();
        let t = CfrTensor::from_fn(Shape::of_grid(&g), |_, _, _| Complex64::new(1.0, 0.0));
        let obs = PilotObservation::from_record(&record(&g, t.clone(), t), &g, 2).unwrap();
        assert!(run_pipeline(&obs, &g, Method::Ai, None, &PipelineOptions::default()).is_err());
    }
}
