//! Tapped-delay-line fading channels with sum-of-sinusoids Doppler.
//!
//! Each tap of a [`TdlProfile`] is an independent complex-Gaussian process
//! per receive antenna. Temporal correlation follows Clarke's model via a
//! sum of [`SINUSOIDS_PER_TAP`] randomly phased Doppler components, so a
//! zero-Doppler tap is exactly constant over the slot.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use crate::cfr::{CfrTensor, Shape};
use crate::error::{Error, Result};
use crate::grid::CarrierGrid;
use crate::seed;

pub const SINUSOIDS_PER_TAP: usize = 32;

/// Power-delay profile with Doppler and per-tap Rician factor.
#[derive(Debug, Clone, PartialEq)]
pub struct TdlProfile {
    tap_delays_s: Vec<f64>,
    tap_powers_lin: Vec<f64>,
    rician_k: Vec<f64>,
    doppler_hz: f64,
}

impl TdlProfile {
    /// Builds a profile, normalizing tap powers to unit sum.
    pub fn new(
        tap_delays_s: Vec<f64>,
        tap_powers_lin: Vec<f64>,
        rician_k: Vec<f64>,
        doppler_hz: f64,
    ) -> Result<Self> {
        if tap_delays_s.is_empty() {
            return Err(Error::InvalidProfile("empty tap list".into()));
        }
        if tap_powers_lin.len() != tap_delays_s.len() || rician_k.len() != tap_delays_s.len() {
            return Err(Error::InvalidProfile(format!(
                "{} delays, {} powers, {} K-factors",
                tap_delays_s.len(),
                tap_powers_lin.len(),
                rician_k.len()
            )));
        }
        if tap_delays_s.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidProfile("tap delays must be finite and non-negative".into()));
        }
        if tap_delays_s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidProfile("tap delays must be strictly increasing".into()));
        }
        if tap_powers_lin.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidProfile("tap powers must be finite and non-negative".into()));
        }
        if rician_k.iter().any(|k| !k.is_finite() || *k < 0.0) {
            return Err(Error::InvalidProfile("Rician K-factors must be finite and non-negative".into()));
        }
        if !doppler_hz.is_finite() || doppler_hz < 0.0 {
            return Err(Error::InvalidProfile(format!("invalid Doppler frequency {doppler_hz}")));
        }
        let total: f64 = tap_powers_lin.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidProfile("total tap power is zero".into()));
        }
        Ok(Self {
            tap_delays_s,
            tap_powers_lin: tap_powers_lin.iter().map(|p| p / total).collect(),
            rician_k,
            doppler_hz,
        })
    }

    /// Rayleigh taps with powers decaying as `exp(-2τ/τ_max)`.
    fn exponential(delays_ns: &[f64]) -> Self {
        let max = delays_ns.last().copied().unwrap_or(0.0).max(1e-9);
        let powers = delays_ns.iter().map(|d| (-2.0 * d / max).exp()).collect();
        let delays = delays_ns.iter().map(|d| d * 1e-9).collect();
        Self::new(delays, powers, vec![0.0; delays_ns.len()], 0.0)
            .expect("preset profiles are valid")
    }

    /// Built-in presets `short`, `medium` and `long`.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "short" => Ok(Self::exponential(&[0.0, 50.0, 100.0])),
            "medium" => Ok(Self::exponential(&[0.0, 100.0, 300.0])),
            "long" => Ok(Self::exponential(&[0.0, 300.0, 1000.0])),
            other => Err(Error::InvalidProfile(format!(
                "unknown preset {other:?} (expected short, medium or long)"
            ))),
        }
    }

    pub fn from_file_spec(spec: &ProfileFile) -> Result<Self> {
        if spec.delays_ns.len() != spec.powers_db.len() {
            return Err(Error::InvalidProfile(format!(
                "{} delays but {} powers",
                spec.delays_ns.len(),
                spec.powers_db.len()
            )));
        }
        let n = spec.delays_ns.len();
        let rician_k = match &spec.rician_k {
            RicianSpec::PerTap(v) => v.clone(),
            RicianSpec::FirstTap(k) => (0..n).map(|t| if t == 0 { *k } else { 0.0 }).collect(),
        };
        Self::new(
            spec.delays_ns.iter().map(|d| d * 1e-9).collect(),
            spec.powers_db.iter().map(|p| 10f64.powf(p / 10.0)).collect(),
            rician_k,
            spec.doppler_hz,
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: ProfileFile = serde_json::from_str(&text)?;
        Self::from_file_spec(&spec)
    }

    pub fn with_doppler(mut self, doppler_hz: f64) -> Result<Self> {
        if !doppler_hz.is_finite() || doppler_hz < 0.0 {
            return Err(Error::InvalidProfile(format!("invalid Doppler frequency {doppler_hz}")));
        }
        self.doppler_hz = doppler_hz;
        Ok(self)
    }

    pub fn n_taps(&self) -> usize {
        self.tap_delays_s.len()
    }

    pub fn tap_delays_s(&self) -> &[f64] {
        &self.tap_delays_s
    }

    pub fn tap_powers_lin(&self) -> &[f64] {
        &self.tap_powers_lin
    }

    pub fn rician_k(&self) -> &[f64] {
        &self.rician_k
    }

    pub fn doppler_hz(&self) -> f64 {
        self.doppler_hz
    }

    pub fn rms_delay_spread_s(&self) -> f64 {
        let mean: f64 = self
            .tap_delays_s
            .iter()
            .zip(&self.tap_powers_lin)
            .map(|(d, p)| d * p)
            .sum();
        let second: f64 = self
            .tap_delays_s
            .iter()
            .zip(&self.tap_powers_lin)
            .map(|(d, p)| d * d * p)
            .sum();
        (second - mean * mean).max(0.0).sqrt()
    }
}

/// Rician K as a single value for the first (line-of-sight) tap, or one
/// value per tap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RicianSpec {
    FirstTap(f64),
    PerTap(Vec<f64>),
}

impl Default for RicianSpec {
    fn default() -> Self {
        RicianSpec::FirstTap(0.0)
    }
}

/// JSON profile file: `{delays_ns, powers_db, doppler_hz, rician_k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileFile {
    pub delays_ns: Vec<f64>,
    pub powers_db: Vec<f64>,
    #[serde(default)]
    pub doppler_hz: f64,
    #[serde(default)]
    pub rician_k: RicianSpec,
}

/// Where a run takes its profile from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Preset(String),
    File { path: PathBuf },
    Inline(ProfileFile),
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::Preset("medium".into())
    }
}

impl ProfileSpec {
    pub fn resolve(&self, base_dir: &Path) -> Result<TdlProfile> {
        match self {
            ProfileSpec::Preset(name) => TdlProfile::preset(name),
            ProfileSpec::File { path } => TdlProfile::load(&base_dir.join(path)),
            ProfileSpec::Inline(spec) => TdlProfile::from_file_spec(spec),
        }
    }
}

/// Time-varying tap gains for one slot, indexed (tap, antenna, symbol).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    tap_coeffs: Vec<Complex64>,
    tap_delays_s: Vec<f64>,
    n_taps: usize,
    n_ant: usize,
    n_symbols: usize,
    seed: u64,
}

impl ChannelRealization {
    /// Builds a realization from explicit coefficients, laid out
    /// `(tap * n_ant + antenna) * n_symbols + symbol`.
    pub fn from_coeffs(
        tap_delays_s: Vec<f64>,
        n_ant: usize,
        n_symbols: usize,
        tap_coeffs: Vec<Complex64>,
    ) -> Result<Self> {
        let n_taps = tap_delays_s.len();
        if tap_coeffs.len() != n_taps * n_ant * n_symbols {
            return Err(Error::Shape(format!(
                "{} coefficients for {n_taps} taps x {n_ant} antennas x {n_symbols} symbols",
                tap_coeffs.len()
            )));
        }
        Ok(Self {
            tap_coeffs,
            tap_delays_s,
            n_taps,
            n_ant,
            n_symbols,
            seed: 0,
        })
    }

    pub fn n_taps(&self) -> usize {
        self.n_taps
    }

    pub fn n_ant(&self) -> usize {
        self.n_ant
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tap_delays_s(&self) -> &[f64] {
        &self.tap_delays_s
    }

    pub fn coeff(&self, tap: usize, ant: usize, symbol: usize) -> Complex64 {
        self.tap_coeffs[(tap * self.n_ant + ant) * self.n_symbols + symbol]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.tap_coeffs
    }
}

/// Draws one slot of tap gains for `n_symbols` OFDM symbols.
pub fn gen_channel(
    profile: &TdlProfile,
    grid: &CarrierGrid,
    n_symbols: usize,
    seed: u64,
) -> Result<ChannelRealization> {
    if n_symbols == 0 {
        return Err(Error::InvalidArgument("at least one symbol is required".into()));
    }
    let n_taps = profile.n_taps();
    let n_ant = grid.n_ant();
    let mut rng = seed::rng(seed);
    let wd = 2.0 * PI * profile.doppler_hz();
    let times: Vec<f64> = (0..n_symbols).map(|l| grid.slot_symbol_time_s(l)).collect();
    let mut coeffs = Vec::with_capacity(n_taps * n_ant * n_symbols);
    let mut freqs = [0.0f64; SINUSOIDS_PER_TAP];
    let mut phases = [0.0f64; SINUSOIDS_PER_TAP];
    for t in 0..n_taps {
        let p = profile.tap_powers_lin()[t];
        let k = profile.rician_k()[t];
        let scatter_amp = (p / (k + 1.0) / SINUSOIDS_PER_TAP as f64).sqrt();
        let los_amp = (p * k / (k + 1.0)).sqrt();
        for _ in 0..n_ant {
            // arrival angles spread evenly with a random rotation
            let theta: f64 = rng.random_range(-PI..PI);
            for m in 0..SINUSOIDS_PER_TAP {
                let alpha = (2.0 * PI * m as f64 - PI + theta) / SINUSOIDS_PER_TAP as f64;
                freqs[m] = wd * alpha.cos();
                phases[m] = rng.random_range(-PI..PI);
            }
            let los_angle: f64 = rng.random_range(-PI..PI);
            let los_phase: f64 = rng.random_range(-PI..PI);
            for &time in &times {
                let mut acc = Complex64::new(0.0, 0.0);
                for m in 0..SINUSOIDS_PER_TAP {
                    acc += Complex64::from_polar(1.0, freqs[m] * time + phases[m]);
                }
                let mut c = acc * scatter_amp;
                if los_amp > 0.0 {
                    c += Complex64::from_polar(los_amp, wd * los_angle.cos() * time + los_phase);
                }
                coeffs.push(c);
            }
        }
    }
    Ok(ChannelRealization {
        tap_coeffs: coeffs,
        tap_delays_s: profile.tap_delays_s().to_vec(),
        n_taps,
        n_ant,
        n_symbols,
        seed,
    })
}

/// Evaluates the CFR at the grid's pilot frequencies for the given slot
/// symbols: `H(i,k,j) = Σ_t c_t(i,j) · exp(-j2π f_k τ_t)`.
pub fn cfr_at(
    realization: &ChannelRealization,
    grid: &CarrierGrid,
    symbol_indices: &[usize],
) -> Result<CfrTensor> {
    if realization.n_ant != grid.n_ant() {
        return Err(Error::Shape(format!(
            "realization has {} antennas, grid has {}",
            realization.n_ant,
            grid.n_ant()
        )));
    }
    if let Some(&bad) = symbol_indices.iter().find(|&&s| s >= realization.n_symbols) {
        return Err(Error::OutOfRange(format!(
            "symbol {bad} outside realization of {} symbols",
            realization.n_symbols
        )));
    }
    let n_p = grid.n_pilots();
    let n_taps = realization.n_taps;
    // phasor[t * n_p + k]
    let mut phasors = Vec::with_capacity(n_taps * n_p);
    for &tau in &realization.tap_delays_s {
        for k in 0..n_p {
            phasors.push(Complex64::from_polar(1.0, -2.0 * PI * grid.pilot_frequency_hz(k) * tau));
        }
    }
    let shape = Shape::new(symbol_indices.len(), n_p, realization.n_ant);
    Ok(CfrTensor::from_fn(shape, |i, k, j| {
        let sym = symbol_indices[i];
        (0..n_taps)
            .map(|t| realization.coeff(t, j, sym) * phasors[t * n_p + k])
            .sum()
    }))
}
