//! Receiver RF impairments applied to channel frequency responses.
//!
//! The chain models what a real radio unit does to an otherwise ideal
//! channel before the estimator sees it: a non-flat receive filter,
//! per-antenna gain imbalance, residual timing and carrier frequency
//! offsets, LO leakage at the DC pilot and mixer-product pilots, and
//! additive noise. [`apply_chain`] runs the enabled stages in this order:
//!
//! filter → antenna scaling → TO → CFO → DC leakage → AWGN
//!
//! Multiplicative stages commute; noise is last so that `snr_db` is the
//! SNR at the receiver input.
//!
//! Offsets and per-record values come from an [`ImpairmentDraw`], produced
//! by [`sample_impairments`] from parametric or empirical distributions.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use crate::cfr::CfrTensor;
use crate::error::{Error, Result};
use crate::grid::CarrierGrid;
use crate::seed;

/// Per-stage enable flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Toggles {
    pub to: bool,
    pub cfo: bool,
    pub filter: bool,
    pub dc: bool,
    pub ant_scale: bool,
    pub awgn: bool,
}

impl Toggles {
    pub fn all_on() -> Self {
        Self {
            to: true,
            cfo: true,
            filter: true,
            dc: true,
            ant_scale: true,
            awgn: true,
        }
    }

    pub fn all_off() -> Self {
        Self {
            to: false,
            cfo: false,
            filter: false,
            dc: false,
            ant_scale: false,
            awgn: false,
        }
    }

    /// Only additive noise.
    pub fn awgn_only() -> Self {
        Self {
            awgn: true,
            ..Self::all_off()
        }
    }

    pub fn summary(&self) -> String {
        let flags = [
            ("to", self.to),
            ("cfo", self.cfo),
            ("filter", self.filter),
            ("dc", self.dc),
            ("ant_scale", self.ant_scale),
            ("awgn", self.awgn),
        ];
        flags
            .iter()
            .filter(|(_, on)| *on)
            .map(|(n, _)| *n)
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl Default for Toggles {
    fn default() -> Self {
        Self::all_on()
    }
}

/// Sorted scalar samples resampled uniformly with replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDist {
    samples: Vec<f64>,
}

impl EmpiricalDist {
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidImpairment("empty empirical distribution".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidImpairment("non-finite empirical sample".into()));
        }
        samples.sort_by(|a, b| a.total_cmp(b));
        Ok(Self { samples })
    }

    /// One scalar per line; a non-numeric first line is treated as a header.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut samples = Vec::new();
        for (row, line) in text.lines().enumerate() {
            let cell = line.split(',').next().unwrap_or("").trim();
            if cell.is_empty() {
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) => samples.push(v),
                Err(_) if row == 0 => continue,
                Err(e) => {
                    return Err(Error::Parse {
                        row: row + 1,
                        column: 1,
                        message: format!("{cell:?}: {e}"),
                    })
                }
            }
        }
        Self::from_samples(samples)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        (self.samples.iter().map(|s| (s - m).powi(2)).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.samples[rng.random_range(0..self.samples.len())]
    }
}

/// A scalar distribution as written in configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    Fixed { value: f64 },
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, std: f64 },
    Empirical { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScalarDist {
    Fixed(f64),
    Uniform(f64, f64),
    Normal(f64, f64),
    Empirical(EmpiricalDist),
}

impl ScalarDist {
    pub fn resolve(spec: &DistSpec, base_dir: &Path) -> Result<Self> {
        Ok(match spec {
            DistSpec::Fixed { value } => ScalarDist::Fixed(*value),
            DistSpec::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low <= high) {
                    return Err(Error::InvalidImpairment(format!("bad uniform range [{low}, {high}]")));
                }
                ScalarDist::Uniform(*low, *high)
            }
            DistSpec::Normal { mean, std } => {
                if !(mean.is_finite() && std.is_finite() && *std >= 0.0) {
                    return Err(Error::InvalidImpairment(format!("bad normal ({mean}, {std})")));
                }
                ScalarDist::Normal(*mean, *std)
            }
            DistSpec::Empirical { path } => ScalarDist::Empirical(EmpiricalDist::load_csv(&base_dir.join(path))?),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ScalarDist::Fixed(v) => *v,
            ScalarDist::Uniform(lo, hi) => {
                if lo == hi {
                    *lo
                } else {
                    rng.random_range(*lo..*hi)
                }
            }
            ScalarDist::Normal(m, s) => Normal::new(*m, *s).map(|d| d.sample(rng)).unwrap_or(*m),
            ScalarDist::Empirical(e) => e.sample(rng),
        }
    }
}

/// Receive filter response across the pilot band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RxFilterSpec {
    Flat,
    /// Two-term cosine magnitude ripple whose peak is `peak_db`.
    Ripple { peak_db: f64 },
    /// CSV of `re,im` per pilot.
    File { path: PathBuf },
}

impl Default for RxFilterSpec {
    fn default() -> Self {
        RxFilterSpec::Ripple { peak_db: 0.5 }
    }
}

/// Magnitude ripple in dB at normalized band position `x ∈ [0, 1)`.
fn ripple_db(x: f64, peak_db: f64) -> f64 {
    peak_db * (0.6 * (2.0 * PI * 3.0 * x).cos() + 0.4 * (2.0 * PI * 7.0 * x + 1.0).cos())
}

/// Default receive filter: a real-valued passband ripple bounded by
/// `±peak_db`.
pub fn ripple_profile(n_p: usize, peak_db: f64) -> Vec<Complex64> {
    (0..n_p)
        .map(|k| {
            let db = ripple_db(k as f64 / n_p as f64, peak_db);
            Complex64::new(10f64.powf(db / 20.0), 0.0)
        })
        .collect()
}

fn load_filter_csv(path: &Path, n_p: usize) -> Result<Vec<Complex64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut vals = [0.0; 2];
        for (c, v) in vals.iter_mut().enumerate() {
            let cell = rec.get(c).unwrap_or("");
            *v = cell.parse().map_err(|_| Error::Parse {
                row: row + 1,
                column: c + 1,
                message: format!("not a number: {cell:?}"),
            })?;
        }
        out.push(Complex64::new(vals[0], vals[1]));
    }
    if out.len() != n_p {
        return Err(Error::Shape(format!("filter file has {} pilots, grid has {n_p}", out.len())));
    }
    Ok(out)
}

/// Impairment settings as written in configuration files. Every field has
/// a placeholder default; measured TO/CFO statistics belong in empirical
/// distribution files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpairmentSettings {
    #[serde(default = "default_to_dist")]
    pub to_dist: DistSpec,
    #[serde(default = "default_cfo_dist")]
    pub cfo_dist: DistSpec,
    #[serde(default)]
    pub rx_filter: RxFilterSpec,
    /// Defaults to the centre pilot.
    #[serde(default)]
    pub dc_indices: Option<Vec<usize>>,
    #[serde(default = "default_dc_leak_amp")]
    pub dc_leak_amp: f64,
    /// Defaults to 0 dB on even antennas, -1.5 dB on odd ones.
    #[serde(default)]
    pub ant_gains_db: Option<Vec<f64>>,
    #[serde(default = "default_snr_grid")]
    pub snr_grid_db: Vec<f64>,
    #[serde(default)]
    pub toggles: Toggles,
}

fn default_to_dist() -> DistSpec {
    DistSpec::Uniform {
        low: -0.2e-6,
        high: 0.2e-6,
    }
}
fn default_cfo_dist() -> DistSpec {
    DistSpec::Uniform { low: -20.0, high: 20.0 }
}
fn default_dc_leak_amp() -> f64 {
    2.0
}
pub fn default_snr_grid() -> Vec<f64> {
    vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0]
}

impl Default for ImpairmentSettings {
    fn default() -> Self {
        Self {
            to_dist: default_to_dist(),
            cfo_dist: default_cfo_dist(),
            rx_filter: RxFilterSpec::default(),
            dc_indices: None,
            dc_leak_amp: default_dc_leak_amp(),
            ant_gains_db: None,
            snr_grid_db: default_snr_grid(),
            toggles: Toggles::all_on(),
        }
    }
}

impl ImpairmentSettings {
    pub fn resolve(&self, grid: &CarrierGrid, base_dir: &Path) -> Result<ImpairmentConfig> {
        let n_p = grid.n_pilots();
        let rx_filter = match &self.rx_filter {
            RxFilterSpec::Flat => vec![Complex64::new(1.0, 0.0); n_p],
            RxFilterSpec::Ripple { peak_db } => ripple_profile(n_p, *peak_db),
            RxFilterSpec::File { path } => load_filter_csv(&base_dir.join(path), n_p)?,
        };
        let ant_gains_db = self
            .ant_gains_db
            .clone()
            .unwrap_or_else(|| (0..grid.n_ant()).map(|j| if j % 2 == 1 { -1.5 } else { 0.0 }).collect());
        let config = ImpairmentConfig {
            to_dist: ScalarDist::resolve(&self.to_dist, base_dir)?,
            cfo_dist: ScalarDist::resolve(&self.cfo_dist, base_dir)?,
            rx_filter,
            dc_indices: self.dc_indices.clone().unwrap_or_else(|| vec![n_p / 2]),
            dc_leak_amp: self.dc_leak_amp,
            ant_gains_db,
            snr_grid_db: self.snr_grid_db.clone(),
            toggles: self.toggles,
        };
        config.validate(grid)?;
        Ok(config)
    }
}

/// Resolved impairment configuration for one carrier grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpairmentConfig {
    pub to_dist: ScalarDist,
    pub cfo_dist: ScalarDist,
    pub rx_filter: Vec<Complex64>,
    pub dc_indices: Vec<usize>,
    pub dc_leak_amp: f64,
    pub ant_gains_db: Vec<f64>,
    pub snr_grid_db: Vec<f64>,
    pub toggles: Toggles,
}

impl ImpairmentConfig {
    /// Identity configuration: every stage disabled.
    pub fn disabled(grid: &CarrierGrid) -> Self {
        Self {
            to_dist: ScalarDist::Fixed(0.0),
            cfo_dist: ScalarDist::Fixed(0.0),
            rx_filter: vec![Complex64::new(1.0, 0.0); grid.n_pilots()],
            dc_indices: Vec::new(),
            dc_leak_amp: 0.0,
            ant_gains_db: vec![0.0; grid.n_ant()],
            snr_grid_db: Vec::new(),
            toggles: Toggles::all_off(),
        }
    }

    pub fn validate(&self, grid: &CarrierGrid) -> Result<()> {
        if self.ant_gains_db.len() != grid.n_ant() {
            return Err(Error::InvalidImpairment(format!(
                "{} antenna gains for {} antennas",
                self.ant_gains_db.len(),
                grid.n_ant()
            )));
        }
        if self.ant_gains_db.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidImpairment("antenna gains must be finite".into()));
        }
        if self.rx_filter.len() != grid.n_pilots() {
            return Err(Error::InvalidImpairment(format!(
                "filter profile has {} pilots, grid has {}",
                self.rx_filter.len(),
                grid.n_pilots()
            )));
        }
        if let Some(&k) = self.dc_indices.iter().find(|&&k| k >= grid.n_pilots()) {
            return Err(Error::InvalidImpairment(format!("DC index {k} outside [0, {})", grid.n_pilots())));
        }
        if !self.dc_leak_amp.is_finite() || self.dc_leak_amp < 0.0 {
            return Err(Error::InvalidImpairment(format!("bad DC leak amplitude {}", self.dc_leak_amp)));
        }
        if self.toggles.awgn && self.snr_grid_db.is_empty() {
            return Err(Error::InvalidImpairment("AWGN enabled with an empty SNR grid".into()));
        }
        if self.snr_grid_db.iter().any(|s| s.is_nan()) {
            return Err(Error::InvalidImpairment("NaN in SNR grid".into()));
        }
        Ok(())
    }
}

mod snr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// One sampled realization of every impairment, kept with the record as
/// its label. `snr_db = ∞` (stored as JSON `null`) means no noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpairmentDraw {
    pub to_s: f64,
    pub cfo_hz: f64,
    pub ant_gains_lin: Vec<f64>,
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    pub dc_indices: Vec<usize>,
    pub dc_leak: Vec<Complex64>,
    pub seed: u64,
}

impl ImpairmentDraw {
    pub fn identity(n_ant: usize, seed: u64) -> Self {
        Self {
            to_s: 0.0,
            cfo_hz: 0.0,
            ant_gains_lin: vec![1.0; n_ant],
            snr_db: f64::INFINITY,
            dc_indices: Vec::new(),
            dc_leak: Vec::new(),
            seed,
        }
    }

    /// Noise variance relative to a signal of power `signal_power`.
    pub fn noise_var(&self, signal_power: f64) -> f64 {
        if self.snr_db.is_finite() {
            signal_power / 10f64.powf(self.snr_db / 10.0)
        } else {
            0.0
        }
    }
}

pub fn sample_impairments(config: &ImpairmentConfig, rng_seed: u64) -> Result<ImpairmentDraw> {
    let mut rng = seed::rng(rng_seed);
    // draw every field unconditionally so toggles do not shift the stream
    let to_s = config.to_dist.sample(&mut rng);
    let cfo_hz = config.cfo_dist.sample(&mut rng);
    let leak_phases: Vec<f64> = config.dc_indices.iter().map(|_| rng.random_range(-PI..PI)).collect();
    let snr_db = if config.snr_grid_db.is_empty() {
        f64::INFINITY
    } else {
        config.snr_grid_db[rng.random_range(0..config.snr_grid_db.len())]
    };
    let t = config.toggles;
    if t.awgn && config.snr_grid_db.is_empty() {
        return Err(Error::InvalidImpairment("AWGN enabled with an empty SNR grid".into()));
    }
    let draw = ImpairmentDraw {
        to_s: if t.to { to_s } else { 0.0 },
        cfo_hz: if t.cfo { cfo_hz } else { 0.0 },
        ant_gains_lin: config
            .ant_gains_db
            .iter()
            .map(|g| if t.ant_scale { 10f64.powf(g / 20.0) } else { 1.0 })
            .collect(),
        snr_db: if t.awgn { snr_db } else { f64::INFINITY },
        dc_indices: if t.dc { config.dc_indices.clone() } else { Vec::new() },
        dc_leak: if t.dc {
            leak_phases.iter().map(|&p| Complex64::from_polar(config.dc_leak_amp, p)).collect()
        } else {
            Vec::new()
        },
        seed: rng_seed,
    };
    if !(draw.to_s.is_finite() && draw.cfo_hz.is_finite()) {
        return Err(Error::InvalidImpairment("non-finite offset drawn".into()));
    }
    Ok(draw)
}

/// Multiplies pilot `k` by `exp(-j2π f_k τ)`.
pub fn apply_timing_offset(cfr: &CfrTensor, to_s: f64, grid: &CarrierGrid) -> CfrTensor {
    let ramp: Vec<Complex64> = (0..cfr.n_p())
        .map(|k| Complex64::from_polar(1.0, -2.0 * PI * grid.pilot_frequency_hz(k) * to_s))
        .collect();
    let mut out = cfr.clone();
    let shape = cfr.shape();
    for i in 0..shape.n_sym {
        for (k, r) in ramp.iter().enumerate() {
            for j in 0..shape.n_ant {
                out[(i, k, j)] *= r;
            }
        }
    }
    out
}

/// Rotates DMRS symbol `i` by `exp(j2π·cfo·t_i)`.
pub fn apply_cfo(cfr: &CfrTensor, cfo_hz: f64, grid: &CarrierGrid) -> CfrTensor {
    let mut out = cfr.clone();
    let shape = cfr.shape();
    for i in 0..shape.n_sym {
        let rot = Complex64::from_polar(1.0, 2.0 * PI * cfo_hz * grid.dmrs_time_s(i));
        for k in 0..shape.n_p {
            for j in 0..shape.n_ant {
                out[(i, k, j)] *= rot;
            }
        }
    }
    out
}

pub fn apply_rx_filter(cfr: &CfrTensor, filter_profile: &[Complex64]) -> Result<CfrTensor> {
    if filter_profile.len() != cfr.n_p() {
        return Err(Error::Shape(format!(
            "filter profile has {} pilots, tensor has {}",
            filter_profile.len(),
            cfr.n_p()
        )));
    }
    let mut out = cfr.clone();
    let shape = cfr.shape();
    for i in 0..shape.n_sym {
        for (k, g) in filter_profile.iter().enumerate() {
            for j in 0..shape.n_ant {
                out[(i, k, j)] *= g;
            }
        }
    }
    Ok(out)
}

/// Adds `leak[n]` at pilot `dc_indices[n]` on every symbol and antenna.
pub fn apply_dc_leakage(cfr: &CfrTensor, dc_indices: &[usize], leak: &[Complex64]) -> Result<CfrTensor> {
    if dc_indices.len() != leak.len() {
        return Err(Error::Shape(format!(
            "{} DC indices but {} leak values",
            dc_indices.len(),
            leak.len()
        )));
    }
    if let Some(&k) = dc_indices.iter().find(|&&k| k >= cfr.n_p()) {
        return Err(Error::OutOfRange(format!("DC index {k} outside [0, {})", cfr.n_p())));
    }
    let mut out = cfr.clone();
    for i in 0..cfr.n_sym() {
        for (&k, &l) in dc_indices.iter().zip(leak) {
            for j in 0..cfr.n_ant() {
                out[(i, k, j)] += l;
            }
        }
    }
    Ok(out)
}

pub fn apply_antenna_scaling(cfr: &CfrTensor, ant_gains_db: &[f64]) -> Result<CfrTensor> {
    let lin: Vec<f64> = ant_gains_db.iter().map(|g| 10f64.powf(g / 20.0)).collect();
    scale_antennas(cfr, &lin)
}

fn scale_antennas(cfr: &CfrTensor, gains_lin: &[f64]) -> Result<CfrTensor> {
    if gains_lin.len() != cfr.n_ant() {
        return Err(Error::Shape(format!(
            "{} antenna gains for {} antennas",
            gains_lin.len(),
            cfr.n_ant()
        )));
    }
    let mut out = cfr.clone();
    for (n, v) in out.values_mut().iter_mut().enumerate() {
        *v *= gains_lin[n % gains_lin.len()];
    }
    Ok(out)
}

/// Circular complex Gaussian noise at `snr_db` relative to the tensor's
/// mean power. `snr_db = +∞` adds nothing.
pub fn add_awgn(cfr: &CfrTensor, snr_db: f64, seed: u64) -> CfrTensor {
    if snr_db == f64::INFINITY {
        return cfr.clone();
    }
    let var = cfr.mean_power() / 10f64.powf(snr_db / 10.0);
    let sigma = (var / 2.0).sqrt();
    let mut rng = seed::rng(seed);
    cfr.map(|v| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        v + Complex64::new(re, im) * sigma
    })
}

/// Ground-truth label: the deterministic hardware response (filter and
/// antenna scaling) applied to the ideal channel.
pub fn apply_label_chain(cfr: &CfrTensor, draw: &ImpairmentDraw, config: &ImpairmentConfig) -> Result<CfrTensor> {
    let mut out = cfr.clone();
    if config.toggles.filter {
        out = apply_rx_filter(&out, &config.rx_filter)?;
    }
    if config.toggles.ant_scale {
        out = scale_antennas(&out, &draw.ant_gains_lin)?;
    }
    Ok(out)
}

/// Runs every enabled stage on `cfr` in the fixed order and returns the
/// impaired tensor together with the draw that produced it.
pub fn apply_chain(
    cfr: &CfrTensor,
    draw: &ImpairmentDraw,
    config: &ImpairmentConfig,
    grid: &CarrierGrid,
) -> Result<(CfrTensor, ImpairmentDraw)> {
    cfr.ensure_shape(crate::cfr::Shape::of_grid(grid))?;
    let t = config.toggles;
    let mut out = apply_label_chain(cfr, draw, config)?;
    if t.to {
        out = apply_timing_offset(&out, draw.to_s, grid);
    }
    if t.cfo {
        out = apply_cfo(&out, draw.cfo_hz, grid);
    }
    if t.dc {
        out = apply_dc_leakage(&out, &draw.dc_indices, &draw.dc_leak)?;
    }
    if t.awgn {
        out = add_awgn(&out, draw.snr_db, seed::derive(draw.seed, seed::stream::NOISE, 0));
    }
    Ok((out, draw.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfr::Shape;
    use crate::grid::{build_grid, GridConfig};

    fn grid() -> CarrierGrid {
        build_grid(&GridConfig {
            n_prb: 8,
            ..GridConfig::default()
        })
        .unwrap()
    }

    fn random_cfr(shape: Shape, s: u64) -> CfrTensor {
        let mut rng = seed::rng(s);
        CfrTensor::from_fn(shape, |_, _, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    fn config(g: &CarrierGrid, toggles: Toggles) -> ImpairmentConfig {
        let settings = ImpairmentSettings {
            toggles,
            ..ImpairmentSettings::default()
        };
        settings.resolve(g, Path::new(".")).unwrap()
    }

    #[test]
    fn all_off_draw_is_identity() {
        let g = grid();
        let d = sample_impairments(&config(&g, Toggles::all_off()), 5).unwrap();
        assert_eq!(d.to_s, 0.0);
        assert_eq!(d.cfo_hz, 0.0);
        assert_eq!(d.ant_gains_lin, vec![1.0, 1.0]);
        assert_eq!(d.snr_db, f64::INFINITY);
        assert!(d.dc_indices.is_empty());
    }

    #[test]
    fn empirical_support_is_respected() {
        let g = grid();
        let mut cfg = config(&g, Toggles::all_on());
        cfg.to_dist = ScalarDist::Empirical(EmpiricalDist::from_samples(vec![5.0, -3.0]).unwrap());
        for s in 0..200 {
            let d = sample_impairments(&cfg, s).unwrap();
            assert!(d.to_s == -3.0 || d.to_s == 5.0);
        }
        assert!(EmpiricalDist::from_samples(vec![]).is_err());
    }

    #[test]
    fn empirical_csv_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("to.csv");
        std::fs::write(&p, "to_s\n1e-7\n-2e-7\n\n3e-7\n").unwrap();
        let e = EmpiricalDist::load_csv(&p).unwrap();
        assert_eq!(e.samples(), &[-2e-7, 1e-7, 3e-7]);
        std::fs::write(&p, "1\nx\n").unwrap();
        assert!(matches!(EmpiricalDist::load_csv(&p), Err(Error::Parse { row: 2, .. })));
        std::fs::write(&p, "header\n").unwrap();
        assert!(EmpiricalDist::load_csv(&p).is_err());
    }

    #[test]
    fn timing_offset_phase_step() {
        let g = grid();
        let ones = CfrTensor::from_fn(Shape::of_grid(&g), |_, _, _| Complex64::new(1.0, 0.0));
        let out = apply_timing_offset(&ones, 1e-6, &g);
        let step = (out[(0, 1, 0)] * out[(0, 0, 0)].conj()).arg();
        assert!((step - (-0.376_991_118_430_775_2)).abs() < 1e-12);
        assert_eq!(apply_timing_offset(&ones, 0.0, &g), ones);
    }

    #[test]
    fn cfo_rotation_between_dmrs_symbols() {
        let g = grid();
        let ones = CfrTensor::from_fn(Shape::of_grid(&g), |_, _, _| Complex64::new(1.0, 0.0));
        let out = apply_cfo(&ones, 200.0, &g);
        let rot = (out[(1, 0, 0)] * out[(0, 0, 0)].conj()).arg();
        assert!((rot - 0.224_399_475_256_414).abs() < 1e-9);
        assert_eq!(apply_cfo(&ones, 0.0, &g), ones);
    }

    #[test]
    fn ripple_is_bounded() {
        let g = build_grid(&GridConfig::default()).unwrap();
        let f = ripple_profile(g.n_pilots(), 0.5);
        let db: Vec<f64> = f.iter().map(|v| 20.0 * v.norm().log10()).collect();
        assert!(db.iter().all(|d| d.abs() <= 0.5 + 1e-12));
        // the ripple actually spans most of its envelope
        assert!(db.iter().cloned().fold(f64::MIN, f64::max) > 0.3);
        assert!(db.iter().cloned().fold(f64::MAX, f64::min) < -0.3);
    }

    #[test]
    fn filter_length_checked() {
        let g = grid();
        let x = random_cfr(Shape::of_grid(&g), 1);
        assert!(apply_rx_filter(&x, &[Complex64::new(1.0, 0.0); 3]).is_err());
        let ones = vec![Complex64::new(1.0, 0.0); g.n_pilots()];
        assert_eq!(apply_rx_filter(&x, &ones).unwrap(), x);
    }

    #[test]
    fn dc_leak_is_additive_at_index_only() {
        let s = Shape::new(1, 16, 1);
        let z = CfrTensor::zeros(s);
        let out = apply_dc_leakage(&z, &[10], &[Complex64::new(5.0, 0.0)]).unwrap();
        for k in 0..16 {
            let expect = if k == 10 { 5.0 } else { 0.0 };
            assert_eq!(out[(0, k, 0)], Complex64::new(expect, 0.0));
        }
        assert_eq!(apply_dc_leakage(&z, &[], &[]).unwrap(), z);
        assert!(apply_dc_leakage(&z, &[16], &[Complex64::new(1.0, 0.0)]).is_err());
    }

    #[test]
    fn strong_leak_towers_over_channel() {
        let g = grid();
        let x = CfrTensor::from_fn(Shape::of_grid(&g), |_, _, _| Complex64::new(1.0, 0.0));
        let out = apply_dc_leakage(&x, &[17], &[Complex64::new(10.0, 0.0)]).unwrap();
        for i in 0..x.n_sym() {
            for j in 0..x.n_ant() {
                // 20·log10(11) ≈ 20.8 dB above the unit channel
                assert_eq!(out[(i, 17, j)], Complex64::new(11.0, 0.0));
                assert_eq!(out[(i, 16, j)], x[(i, 16, j)]);
            }
        }
    }

    #[test]
    fn antenna_scaling_ratio() {
        let g = grid();
        let x = CfrTensor::from_fn(Shape::of_grid(&g), |_, _, _| Complex64::new(1.0, -1.0));
        let out = apply_antenna_scaling(&x, &[0.0, -1.5]).unwrap();
        let ratio = out[(0, 0, 0)].norm_sqr() / out[(0, 0, 1)].norm_sqr();
        assert!((ratio - 10f64.powf(0.15)).abs() < 1e-12);
        for i in 0..g.n_sym() {
            for k in 0..g.n_pilots() {
                assert_eq!(out[(i, k, 1)], out[(0, 0, 1)]);
            }
        }
        assert_eq!(apply_antenna_scaling(&x, &[0.0, 0.0]).unwrap(), x);
        assert!(apply_antenna_scaling(&x, &[0.0]).is_err());
    }

    #[test]
    fn awgn_power_and_determinism() {
        let s = Shape::new(10, 5000, 2);
        let x = CfrTensor::from_fn(s, |_, _, _| Complex64::new(1.0, 0.0));
        let noisy = add_awgn(&x, 0.0, 11);
        let noise_power: f64 =
            noisy.values().iter().zip(x.values()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / s.len() as f64;
        assert!((noise_power - 1.0).abs() < 0.05);
        assert_eq!(noisy, add_awgn(&x, 0.0, 11));
        assert_eq!(add_awgn(&x, f64::INFINITY, 11), x);
    }

    #[test]
    fn chain_all_off_is_bit_exact_identity() {
        let g = grid();
        let x = random_cfr(Shape::of_grid(&g), 3);
        let cfg = config(&g, Toggles::all_off());
        let d = sample_impairments(&cfg, 4).unwrap();
        let (out, back) = apply_chain(&x, &d, &cfg, &g).unwrap();
        assert_eq!(out, x);
        assert_eq!(back, d);
    }

    #[test]
    fn chain_awgn_at_infinite_snr_is_identity() {
        let g = grid();
        let x = random_cfr(Shape::of_grid(&g), 3);
        let cfg = config(&g, Toggles::awgn_only());
        let mut d = sample_impairments(&cfg, 4).unwrap();
        d.snr_db = f64::INFINITY;
        assert_eq!(apply_chain(&x, &d, &cfg, &g).unwrap().0, x);
    }

    #[test]
    fn chain_to_cfo_preserves_magnitude() {
        let g = grid();
        let x = random_cfr(Shape::of_grid(&g), 3);
        let toggles = Toggles {
            to: true,
            cfo: true,
            ..Toggles::all_off()
        };
        let cfg = config(&g, toggles);
        let d = sample_impairments(&cfg, 8).unwrap();
        assert!(d.to_s != 0.0 && d.cfo_hz != 0.0);
        let (out, _) = apply_chain(&x, &d, &cfg, &g).unwrap();
        for (a, b) in out.values().iter().zip(x.values()) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn draw_json_round_trip_with_infinite_snr() {
        let d = ImpairmentDraw {
            snr_db: f64::INFINITY,
            dc_leak: vec![Complex64::new(0.1, -2.5)],
            dc_indices: vec![3],
            ..ImpairmentDraw::identity(2, 99)
        };
        let s = serde_json::to_string(&d).unwrap();
        let back: ImpairmentDraw = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn toggles_require_every_flag() {
        assert!(serde_json::from_str::<Toggles>(r#"{"to":true}"#).is_err());
        assert!(serde_json::from_str::<Toggles>(
            r#"{"to":true,"cfo":true,"filter":true,"dc":true,"ant_scale":true,"awgn":true,"pa":true}"#
        )
        .is_err());
    }

    #[test]
    fn config_validation() {
        let g = grid();
        let s = ImpairmentSettings {
            ant_gains_db: Some(vec![0.0]),
            ..ImpairmentSettings::default()
        };
        assert!(s.resolve(&g, Path::new(".")).is_err());
        let s = ImpairmentSettings {
            dc_indices: Some(vec![g.n_pilots()]),
            ..ImpairmentSettings::default()
        };
        assert!(s.resolve(&g, Path::new(".")).is_err());
    }
}
