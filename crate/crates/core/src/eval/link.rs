//! Uncoded QPSK link used as a stand-in for block error rate.
//!
//! Data symbols ride on the occupied non-pilot subcarriers of the DMRS
//! symbols. The receiver combines antennas with the estimate (maximum
//! ratio) and takes a hard quadrant decision.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::estimators::FullGridEstimate;
use crate::grid::CarrierGrid;
use crate::seed;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SerStats {
    pub symbols: u64,
    pub errors: u64,
    /// Symbols whose estimate had zero energy on every antenna; also
    /// counted as errors.
    pub erasures: u64,
}

impl SerStats {
    pub fn ser(&self) -> f64 {
        if self.symbols == 0 {
            0.0
        } else {
            self.errors as f64 / self.symbols as f64
        }
    }

    pub fn merge(&mut self, other: SerStats) {
        self.symbols += other.symbols;
        self.errors += other.errors;
        self.erasures += other.erasures;
    }
}

fn qpsk(bits: u8) -> Complex64 {
    let re = if bits & 1 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    let im = if bits & 2 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    Complex64::new(re, im)
}

fn slice(z: Complex64) -> u8 {
    u8::from(z.re < 0.0) | (u8::from(z.im < 0.0) << 1)
}

/// Sends random unit-energy QPSK through `truth` with AWGN at `snr_db`
/// (relative to the mean channel power over the data resource elements,
/// per antenna) and detects with `est`. `snr_db = +∞` is noiseless.
pub fn ser_link(
    est: &FullGridEstimate,
    truth: &FullGridEstimate,
    grid: &CarrierGrid,
    snr_db: f64,
    seed: u64,
) -> Result<SerStats> {
    if (est.n_sym, est.n_sc, est.n_ant) != (truth.n_sym, truth.n_sc, truth.n_ant) {
        return Err(Error::Shape("estimate and truth grids differ".into()));
    }
    if est.n_sc != grid.n_subcarriers() {
        return Err(Error::Shape(format!(
            "estimate has {} subcarriers, grid has {}",
            est.n_sc,
            grid.n_subcarriers()
        )));
    }
    if snr_db.is_nan() {
        return Err(Error::InvalidArgument("SNR is NaN".into()));
    }
    let comb = grid.comb();
    let data_sc: Vec<usize> = (0..est.n_sc)
        .filter(|&sc| sc % comb != 0 && est.occupied[sc] && truth.occupied[sc])
        .collect();
    if data_sc.is_empty() {
        return Err(Error::InvalidArgument("no occupied data subcarriers".into()));
    }

    let mut power = 0.0;
    for i in 0..est.n_sym {
        for &sc in &data_sc {
            for j in 0..est.n_ant {
                power += truth.at(i, sc, j).norm_sqr();
            }
        }
    }
    power /= (est.n_sym * data_sc.len() * est.n_ant) as f64;
    let sigma = if snr_db == f64::INFINITY {
        0.0
    } else {
        (power / 10f64.powf(snr_db / 10.0) / 2.0).sqrt()
    };

    let mut rng = seed::rng(seed);
    let mut stats = SerStats::default();
    for i in 0..est.n_sym {
        for &sc in &data_sc {
            let bits: u8 = rng.random_range(0..4);
            let s = qpsk(bits);
            let mut num = Complex64::new(0.0, 0.0);
            let mut den = 0.0;
            for j in 0..est.n_ant {
                let noise = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * sigma;
                let y = truth.at(i, sc, j) * s + noise;
                let h = est.at(i, sc, j);
                num += h.conj() * y;
                den += h.norm_sqr();
            }
            stats.symbols += 1;
            if !(den > 0.0) {
                stats.erasures += 1;
                stats.errors += 1;
            } else if slice(num / den) != bits {
                stats.errors += 1;
            }
        }
    }
    Ok(stats)
}
