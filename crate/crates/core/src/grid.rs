//! OFDM/DMRS resource geometry and pilot sequences.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::seed;

pub const SUBCARRIERS_PER_PRB: usize = 12;
pub const SYMBOLS_PER_SLOT: usize = 14;

/// Carrier parameters as written in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_n_prb")]
    pub n_prb: usize,
    #[serde(default = "default_scs")]
    pub scs_hz: f64,
    #[serde(default = "default_comb")]
    pub comb: usize,
    #[serde(default = "default_dmrs")]
    pub dmrs_symbols: Vec<usize>,
    #[serde(default = "default_n_ant")]
    pub n_ant: usize,
}

fn default_n_prb() -> usize {
    273
}
fn default_scs() -> f64 {
    30e3
}
fn default_comb() -> usize {
    2
}
fn default_dmrs() -> Vec<usize> {
    vec![2, 7, 11]
}
fn default_n_ant() -> usize {
    2
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_prb: default_n_prb(),
            scs_hz: default_scs(),
            comb: default_comb(),
            dmrs_symbols: default_dmrs(),
            n_ant: default_n_ant(),
        }
    }
}

/// Validated carrier geometry: which subcarriers carry pilots, on which
/// OFDM symbols of the slot, and how many receive antennas observe them.
///
/// Pilot `k` sits on subcarrier `comb * k`, counted from the lowest
/// allocated subcarrier. Its frequency offset `f_k = comb * k * scs_hz`
/// is what the timing-offset phase ramp and the tapped-delay-line CFR
/// are evaluated at.
#[derive(Debug, Clone, PartialEq)]
pub struct CarrierGrid {
    n_prb: usize,
    scs_hz: f64,
    comb: usize,
    dmrs_symbols: Vec<usize>,
    n_ant: usize,
    symbol_duration_s: f64,
}

impl CarrierGrid {
    pub fn new(config: &GridConfig) -> Result<Self> {
        if config.n_prb == 0 {
            return Err(Error::InvalidGrid("PRB count must be at least 1".into()));
        }
        if config.comb != 1 && config.comb != 2 {
            return Err(Error::InvalidGrid(format!(
                "comb factor must be 1 or 2, got {}",
                config.comb
            )));
        }
        if !(config.scs_hz.is_finite() && config.scs_hz > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "subcarrier spacing must be positive, got {}",
                config.scs_hz
            )));
        }
        if config.n_ant == 0 {
            return Err(Error::InvalidGrid("antenna count must be at least 1".into()));
        }
        if config.dmrs_symbols.is_empty() {
            return Err(Error::InvalidGrid("at least one DMRS symbol is required".into()));
        }
        for w in config.dmrs_symbols.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidGrid(format!(
                    "duplicate DMRS symbol index {}",
                    w[0]
                )));
            }
            if w[0] > w[1] {
                return Err(Error::InvalidGrid(
                    "DMRS symbol indices must be strictly increasing".into(),
                ));
            }
        }
        if let Some(&last) = config.dmrs_symbols.last() {
            if last >= SYMBOLS_PER_SLOT {
                return Err(Error::InvalidGrid(format!(
                    "DMRS symbol index {last} outside slot [0, {}]",
                    SYMBOLS_PER_SLOT - 1
                )));
            }
        }
        // slot = 1 ms at 15 kHz, halved per numerology step
        let slot_s = 1e-3 * 15e3 / config.scs_hz;
        Ok(Self {
            n_prb: config.n_prb,
            scs_hz: config.scs_hz,
            comb: config.comb,
            dmrs_symbols: config.dmrs_symbols.clone(),
            n_ant: config.n_ant,
            symbol_duration_s: slot_s / SYMBOLS_PER_SLOT as f64,
        })
    }

    pub fn config(&self) -> GridConfig {
        GridConfig {
            n_prb: self.n_prb,
            scs_hz: self.scs_hz,
            comb: self.comb,
            dmrs_symbols: self.dmrs_symbols.clone(),
            n_ant: self.n_ant,
        }
    }

    pub fn n_prb(&self) -> usize {
        self.n_prb
    }

    pub fn scs_hz(&self) -> f64 {
        self.scs_hz
    }

    pub fn comb(&self) -> usize {
        self.comb
    }

    pub fn dmrs_symbols(&self) -> &[usize] {
        &self.dmrs_symbols
    }

    /// Number of DMRS symbols per slot (`N_sym`).
    pub fn n_sym(&self) -> usize {
        self.dmrs_symbols.len()
    }

    /// Pilots per DMRS symbol (`N_p`).
    pub fn n_pilots(&self) -> usize {
        self.n_prb * (SUBCARRIERS_PER_PRB / self.comb)
    }

    pub fn pilots_per_prb(&self) -> usize {
        SUBCARRIERS_PER_PRB / self.comb
    }

    pub fn n_ant(&self) -> usize {
        self.n_ant
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_prb * SUBCARRIERS_PER_PRB
    }

    pub fn symbol_duration_s(&self) -> f64 {
        self.symbol_duration_s
    }

    pub fn pilot_spacing_hz(&self) -> f64 {
        self.comb as f64 * self.scs_hz
    }

    /// Subcarrier index carrying pilot `k`.
    pub fn pilot_subcarrier(&self, k: usize) -> usize {
        k * self.comb
    }

    pub fn pilot_subcarriers(&self) -> Vec<usize> {
        (0..self.n_pilots()).map(|k| self.pilot_subcarrier(k)).collect()
    }

    /// Frequency offset of pilot `k` from the lowest allocated subcarrier.
    pub fn pilot_frequency_hz(&self, k: usize) -> f64 {
        self.pilot_subcarrier(k) as f64 * self.scs_hz
    }

    pub fn subcarrier_frequency_hz(&self, sc: usize) -> f64 {
        sc as f64 * self.scs_hz
    }

    /// Time of slot symbol `l` relative to the slot start.
    pub fn slot_symbol_time_s(&self, l: usize) -> f64 {
        l as f64 * self.symbol_duration_s
    }

    /// Time of the `i`-th DMRS symbol of the slot.
    pub fn dmrs_time_s(&self, i: usize) -> f64 {
        self.slot_symbol_time_s(self.dmrs_symbols[i])
    }
}

pub fn build_grid(config: &GridConfig) -> Result<CarrierGrid> {
    CarrierGrid::new(config)
}

/// Unit-modulus QPSK pilot sequence, deterministic in `seed`.
///
/// Stands in for the scrambled DMRS sequence; any unit-modulus sequence
/// works for LS extraction.
pub fn gen_pilot_sequence(seed: u64, n_p: usize) -> Result<Vec<Complex64>> {
    if n_p == 0 {
        return Err(Error::InvalidArgument("pilot sequence length must be at least 1".into()));
    }
    let mut rng = seed::rng(seed);
    Ok((0..n_p)
        .map(|_| {
            let re = if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
            let im = if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
            Complex64::new(re, im)
        })
        .collect())
}
