//! Record synthesis: fading channel → label chain → impairment chain.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cfr::{CfrTensor, Shape};
use crate::channel::{cfr_at, gen_channel, TdlProfile};
use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};
use crate::grid::{CarrierGrid, SYMBOLS_PER_SLOT};
use crate::impairments::{apply_chain, apply_label_chain, sample_impairments, ImpairmentConfig};
use crate::seed::{self, stream};

/// Optional partial allocation: with probability `probability` a record
/// occupies one contiguous block of whole PRBs instead of the full band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationSpec {
    pub probability: f64,
    pub min_prb: usize,
    pub max_prb: usize,
}

/// Shortest allocation the MMSE window can still cover.
pub const MIN_ALLOCATION_PRB: usize = 6;

impl AllocationSpec {
    pub fn validate(&self, grid: &CarrierGrid) -> Result<()> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::Config(format!("allocation probability {} outside [0, 1]", self.probability)));
        }
        if self.min_prb < MIN_ALLOCATION_PRB || self.min_prb > self.max_prb || self.max_prb > grid.n_prb() {
            return Err(Error::Config(format!(
                "allocation PRB range [{}, {}] must lie within [{MIN_ALLOCATION_PRB}, {}]",
                self.min_prb,
                self.max_prb,
                grid.n_prb()
            )));
        }
        Ok(())
    }

    pub fn draw_mask(&self, grid: &CarrierGrid, seed: u64) -> Vec<bool> {
        let mut rng = seed::rng(seed);
        let ppp = grid.pilots_per_prb();
        let mut mask = vec![true; grid.n_pilots()];
        if rng.random::<f64>() >= self.probability {
            return mask;
        }
        let len = rng.random_range(self.min_prb..=self.max_prb);
        let start = rng.random_range(0..=grid.n_prb() - len);
        for (k, m) in mask.iter_mut().enumerate() {
            let prb = k / ppp;
            *m = prb >= start && prb < start + len;
        }
        mask
    }
}

/// Everything needed to synthesize records, resolved and validated.
#[derive(Debug, Clone)]
pub struct GeneratorContext {
    pub grid: CarrierGrid,
    pub profile: TdlProfile,
    pub impairments: ImpairmentConfig,
    pub allocation: Option<AllocationSpec>,
}

impl GeneratorContext {
    pub fn new(
        grid: CarrierGrid,
        profile: TdlProfile,
        impairments: ImpairmentConfig,
        allocation: Option<AllocationSpec>,
    ) -> Result<Self> {
        impairments.validate(&grid)?;
        if let Some(a) = &allocation {
            a.validate(&grid)?;
        }
        Ok(Self {
            grid,
            profile,
            impairments,
            allocation,
        })
    }

    /// Copy whose records all carry noise at exactly `snr_db`.
    pub fn at_snr(&self, snr_db: f64) -> Self {
        let mut ctx = self.clone();
        ctx.impairments.snr_grid_db = vec![snr_db];
        ctx.impairments.toggles.awgn = true;
        ctx
    }

    /// Ideal pilot CFR of one slot.
    pub fn ideal_cfr(&self, record_seed: u64) -> Result<CfrTensor> {
        let realization = gen_channel(
            &self.profile,
            &self.grid,
            SYMBOLS_PER_SLOT,
            seed::derive(record_seed, stream::CHANNEL, 0),
        )?;
        cfr_at(&realization, &self.grid, self.grid.dmrs_symbols())
    }

    pub fn record(&self, record_seed: u64) -> Result<DatasetRecord> {
        let ideal = self.ideal_cfr(record_seed)?;
        self.impair(&ideal, record_seed)
    }

    /// Runs the label and impairment chains on an ideal channel. Both
    /// tensors are rounded to the on-disk precision so a record reads
    /// back exactly as generated.
    pub fn impair(&self, ideal: &CfrTensor, record_seed: u64) -> Result<DatasetRecord> {
        ideal.ensure_shape(Shape::of_grid(&self.grid))?;
        let draw = sample_impairments(&self.impairments, seed::derive(record_seed, stream::IMPAIRMENT, 0))?;
        let truth = apply_label_chain(ideal, &draw, &self.impairments)?.quantize_f32();
        let (mut obs, draw) = apply_chain(ideal, &draw, &self.impairments, &self.grid)?;
        let mask = match &self.allocation {
            Some(a) => a.draw_mask(&self.grid, seed::derive(record_seed, stream::MASK, 0)),
            None => vec![true; self.grid.n_pilots()],
        };
        obs.apply_mask(&mask);
        Ok(DatasetRecord {
            ls_obs: Some(obs.quantize_f32()),
            truth,
            mask,
            draw,
        })
    }

    /// `n` records from `root_seed`; record `r` depends only on
    /// `(root_seed, r)`.
    pub fn generate(&self, n: usize, root_seed: u64) -> Result<Vec<DatasetRecord>> {
        (0..n)
            .into_par_iter()
            .map(|r| self.record(seed::derive(root_seed, stream::RECORD, r as u64)))
            .collect()
    }

    /// Impairment pass over imported truth-only records.
    pub fn impair_records(&self, records: &[DatasetRecord], root_seed: u64) -> Result<Vec<DatasetRecord>> {
        records
            .par_iter()
            .enumerate()
            .map(|(r, rec)| self.impair(&rec.truth, seed::derive(root_seed, stream::RECORD, r as u64)))
            .collect()
    }
}
