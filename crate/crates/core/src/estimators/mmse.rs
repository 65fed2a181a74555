//! Windowed Wiener filtering with a PDP-derived frequency correlation.
//!
//! For each (symbol, antenna) slice and each contiguous run of occupied
//! pilots:
//!
//! 1. Transform the LS estimates of the run to the delay domain.
//! 2. Keep taps whose power exceeds `threshold_factor` × the median tap
//!    power; subtract the per-tap noise power from survivors.
//! 3. Rebuild the frequency autocorrelation `r(d) = Σ_n P_n e^{-j2πnd/L}`.
//! 4. Filter windows of `window` pilots (hop `hop`) with
//!    `W = R (R + σ² I)⁻¹`; each pilot takes the output of the window
//!    whose centre is closest to it.
//!
//! `R` is Toeplitz, so one matrix solve per slice and run covers every
//! window.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::{LN_2, PI};

use crate::cfr::{occupied_runs, CfrTensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmseConfig {
    pub window: usize,
    pub hop: usize,
    pub threshold_factor: f64,
}

impl Default for MmseConfig {
    fn default() -> Self {
        Self {
            window: 32,
            hop: 16,
            threshold_factor: 3.0,
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn delay_profile(planner: &mut FftPlanner<f64>, run: &[Complex64]) -> Vec<f64> {
    let l = run.len();
    let mut buf = run.to_vec();
    planner.plan_fft_inverse(l).process(&mut buf);
    let norm = 1.0 / l as f64;
    buf.iter().map(|v| (v * norm).norm_sqr()).collect()
}

/// Noise variance per pilot estimated from the delay-domain noise floor:
/// noise-only taps are exponential, so their median is `ln 2` times the
/// per-tap noise power `σ²/L`.
pub fn estimate_noise_var(ls: &CfrTensor, mask: &[bool]) -> Result<f64> {
    let runs = occupied_runs(mask);
    if runs.is_empty() {
        return Err(Error::Estimation("no occupied pilots".into()));
    }
    let mut planner = FftPlanner::new();
    let mut acc = 0.0;
    let mut n = 0usize;
    for i in 0..ls.n_sym() {
        for j in 0..ls.n_ant() {
            let row = ls.pilot_row(i, j);
            for run in &runs {
                let mut taps = delay_profile(&mut planner, &row[run.clone()]);
                acc += median(&mut taps) / LN_2 * run.len() as f64;
                n += 1;
            }
        }
    }
    Ok(acc / n as f64)
}

/// Wiener matrix `R (R + σ²I)⁻¹` for one run's PDP.
fn wiener_matrix(pdp: &[(usize, f64)], l: usize, window: usize, noise_var: f64) -> Result<DMatrix<Complex64>> {
    let lags: Vec<Complex64> = (0..window)
        .map(|d| {
            pdp.iter()
                .map(|&(n, p)| Complex64::from_polar(p, -2.0 * PI * (n * d) as f64 / l as f64))
                .sum()
        })
        .collect();
    let r = DMatrix::from_fn(window, window, |a, b| {
        if a >= b {
            lags[a - b]
        } else {
            lags[b - a].conj()
        }
    });
    let loaded = &r + DMatrix::<Complex64>::identity(window, window) * Complex64::new(noise_var, 0.0);
    // R and R + σ²I commute, so (R + σ²I)⁻¹ R is the same matrix
    let w = match loaded.clone().cholesky() {
        Some(ch) => ch.solve(&r),
        None => loaded
            .lu()
            .solve(&r)
            .ok_or_else(|| Error::Estimation("singular correlation matrix".into()))?,
    };
    Ok(w)
}

fn window_starts(l: usize, window: usize, hop: usize) -> Vec<usize> {
    let mut starts: Vec<usize> = (0..=(l - window)).step_by(hop.max(1)).collect();
    if *starts.last().unwrap() != l - window {
        starts.push(l - window);
    }
    starts
}

/// MMSE-PDP estimate at the pilots. `noise_var` is per pilot, in the
/// units of `ls`; zero noise returns the LS input unchanged.
pub fn mmse_pdp_estimate(ls: &CfrTensor, mask: &[bool], noise_var: f64, config: &MmseConfig) -> Result<CfrTensor> {
    if mask.len() != ls.n_p() {
        return Err(Error::Shape(format!("mask has {} pilots, tensor has {}", mask.len(), ls.n_p())));
    }
    if !(noise_var >= 0.0) || !noise_var.is_finite() {
        return Err(Error::InvalidArgument(format!("noise variance must be non-negative, got {noise_var}")));
    }
    if config.window == 0 || config.hop == 0 {
        return Err(Error::InvalidArgument("window and hop must be positive".into()));
    }
    let runs = occupied_runs(mask);
    if let Some(run) = runs.iter().find(|r| r.len() < config.window) {
        return Err(Error::Estimation(format!(
            "window of {} pilots exceeds occupied run of {} pilots starting at {}",
            config.window,
            run.len(),
            run.start
        )));
    }
    let mut out = CfrTensor::zeros(ls.shape());
    if noise_var == 0.0 {
        for i in 0..ls.n_sym() {
            for run in &runs {
                for k in run.clone() {
                    for j in 0..ls.n_ant() {
                        out[(i, k, j)] = ls[(i, k, j)];
                    }
                }
            }
        }
        return Ok(out);
    }

    let w = config.window;
    let mut planner = FftPlanner::new();
    for i in 0..ls.n_sym() {
        for j in 0..ls.n_ant() {
            let row = ls.pilot_row(i, j);
            let mut est = vec![Complex64::new(0.0, 0.0); ls.n_p()];
            for run in &runs {
                let l = run.len();
                let x = &row[run.clone()];
                let taps = delay_profile(&mut planner, x);
                let threshold = config.threshold_factor * median(&mut taps.clone());
                let tap_noise = noise_var / l as f64;
                let pdp: Vec<(usize, f64)> = taps
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > threshold)
                    .map(|(n, &p)| (n, (p - tap_noise).max(0.0)))
                    .filter(|(_, p)| *p > 0.0)
                    .collect();
                if pdp.is_empty() {
                    // nothing above the noise floor: the Wiener estimate is zero
                    continue;
                }
                let wm = wiener_matrix(&pdp, l, w, noise_var)?;
                let centre = (w as f64 - 1.0) / 2.0;
                let mut best = vec![f64::INFINITY; l];
                for s in window_starts(l, w, config.hop) {
                    let y = nalgebra::DVector::from_column_slice(&x[s..s + w]);
                    let filtered = &wm * y;
                    for a in 0..w {
                        let d = (a as f64 - centre).abs();
                        if d < best[s + a] {
                            best[s + a] = d;
                            est[run.start + s + a] = filtered[a];
                        }
                    }
                }
            }
            out.set_pilot_row(i, j, &est);
        }
    }
    Ok(out)
}
