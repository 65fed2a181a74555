//! Timing- and frequency-offset estimation from pilot CFRs.
//!
//! A residual timing offset τ shows up as a linear phase ramp across
//! pilots, so the average of `H(k)·H(k+1)*` over adjacent occupied pilots
//! has phase `2π·Δf·τ`. A residual CFO rotates whole DMRS symbols, so
//! `H^{i1}(k)·H^{i2}(k)*` has phase `-2π·cfo·(t_{i2} - t_{i1})`.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::cfr::CfrTensor;
use crate::error::{Error, Result};
use crate::grid::CarrierGrid;

/// Combined offset estimate for one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetEstimate {
    pub to_metric: Complex64,
    pub to_s: f64,
    pub cfo_metric: Complex64,
    pub cfo_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToEstimate {
    pub metric: Complex64,
    pub to_s: f64,
    /// Adjacent occupied pilot pairs per antenna that entered the sum.
    pub pairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfoEstimate {
    pub metric: Complex64,
    pub cfo_hz: f64,
}

fn check_mask(ls: &CfrTensor, mask: &[bool]) -> Result<()> {
    if mask.len() != ls.n_p() {
        return Err(Error::Shape(format!("mask has {} pilots, tensor has {}", mask.len(), ls.n_p())));
    }
    Ok(())
}

fn to_metric_symbol(ls: &CfrTensor, mask: &[bool], i: usize) -> (Complex64, usize) {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut pairs = 0;
    for k in 0..ls.n_p().saturating_sub(1) {
        if !(mask[k] && mask[k + 1]) {
            continue;
        }
        pairs += 1;
        for j in 0..ls.n_ant() {
            acc += ls[(i, k, j)] * ls[(i, k + 1, j)].conj();
        }
    }
    (acc, pairs)
}

/// Adjacent-pilot phase metric of DMRS symbol `i`, normalized by the
/// number of pairs actually summed.
pub fn estimate_to_symbol(ls: &CfrTensor, mask: &[bool], i: usize, grid: &CarrierGrid) -> Result<ToEstimate> {
    check_mask(ls, mask)?;
    if i >= ls.n_sym() {
        return Err(Error::OutOfRange(format!("symbol {i} of {}", ls.n_sym())));
    }
    let (acc, pairs) = to_metric_symbol(ls, mask, i);
    if pairs == 0 {
        return Err(Error::Estimation("timing offset needs two adjacent occupied pilots".into()));
    }
    let metric = acc / (ls.n_ant() * pairs) as f64;
    Ok(ToEstimate {
        metric,
        to_s: metric.arg() / (2.0 * PI * grid.pilot_spacing_hz()),
        pairs,
    })
}

/// Timing offset of the slot: per-symbol metrics averaged over all DMRS
/// symbols before taking the angle.
pub fn estimate_to(ls: &CfrTensor, mask: &[bool], grid: &CarrierGrid) -> Result<ToEstimate> {
    check_mask(ls, mask)?;
    let mut total = Complex64::new(0.0, 0.0);
    let mut pairs = 0;
    for i in 0..ls.n_sym() {
        let (acc, p) = to_metric_symbol(ls, mask, i);
        if p == 0 {
            return Err(Error::Estimation("timing offset needs two adjacent occupied pilots".into()));
        }
        total += acc / (ls.n_ant() * p) as f64;
        pairs = p;
    }
    let metric = total / ls.n_sym() as f64;
    Ok(ToEstimate {
        metric,
        to_s: metric.arg() / (2.0 * PI * grid.pilot_spacing_hz()),
        pairs,
    })
}

/// Inter-symbol rotation metric between DMRS symbols `i1` and `i2`.
///
/// Unambiguous for `|cfo| < 1 / (2·|t_{i2} - t_{i1}|)`.
pub fn estimate_cfo(ls: &CfrTensor, mask: &[bool], i1: usize, i2: usize, grid: &CarrierGrid) -> Result<CfoEstimate> {
    check_mask(ls, mask)?;
    if i1 == i2 {
        return Err(Error::InvalidArgument("CFO estimation needs two distinct DMRS symbols".into()));
    }
    if i1.max(i2) >= ls.n_sym() || i1.max(i2) >= grid.n_sym() {
        return Err(Error::OutOfRange(format!("symbols ({i1}, {i2}) of {}", ls.n_sym())));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let mut n = 0usize;
    for k in (0..ls.n_p()).filter(|&k| mask[k]) {
        for j in 0..ls.n_ant() {
            acc += ls[(i1, k, j)] * ls[(i2, k, j)].conj();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Estimation("no occupied pilots".into()));
    }
    let metric = acc / n as f64;
    let dt = grid.dmrs_time_s(i2) - grid.dmrs_time_s(i1);
    Ok(CfoEstimate {
        metric,
        cfo_hz: -metric.arg() / (2.0 * PI * dt),
    })
}

/// Slot CFO: mean of the estimates over consecutive DMRS symbol pairs.
pub fn estimate_cfo_slot(ls: &CfrTensor, mask: &[bool], grid: &CarrierGrid) -> Result<CfoEstimate> {
    if ls.n_sym() < 2 {
        return Err(Error::Estimation("CFO estimation needs at least two DMRS symbols".into()));
    }
    let mut metric = Complex64::new(0.0, 0.0);
    let mut hz = 0.0;
    let n = ls.n_sym() - 1;
    for i in 0..n {
        let e = estimate_cfo(ls, mask, i, i + 1, grid)?;
        metric += e.metric;
        hz += e.cfo_hz;
    }
    Ok(CfoEstimate {
        metric: metric / n as f64,
        cfo_hz: hz / n as f64,
    })
}

pub fn estimate_offsets(ls: &CfrTensor, mask: &[bool], grid: &CarrierGrid) -> Result<OffsetEstimate> {
    let to = estimate_to(ls, mask, grid)?;
    let cfo = estimate_cfo_slot(ls, mask, grid)?;
    Ok(OffsetEstimate {
        to_metric: to.metric,
        to_s: to.to_s,
        cfo_metric: cfo.metric,
        cfo_hz: cfo.cfo_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfr::Shape;
    use crate::grid::{build_grid, GridConfig};
    use crate::impairments::{apply_cfo, apply_timing_offset};

    fn grid() -> CarrierGrid {
        build_grid(&GridConfig {
            n_prb: 20,
            ..GridConfig::default()
        })
        .unwrap()
    }

    fn ones(g: &CarrierGrid) -> CfrTensor {
        CfrTensor::from_fn(Shape::of_grid(g), |_, _, _| Complex64::new(1.0, 0.0))
    }

    #[test]
    fn flat_channel_has_zero_offsets() {
        let g = grid();
        let mask = vec![true; g.n_pilots()];
        let e = estimate_offsets(&ones(&g), &mask, &g).unwrap();
        assert_eq!(e.to_s, 0.0);
        assert_eq!(e.cfo_hz, 0.0);
    }

    #[test]
    fn ramp_recovers_timing_offset() {
        let g = grid();
        let mask = vec![true; g.n_pilots()];
        let h = apply_timing_offset(&ones(&g), 1e-6, &g);
        let e = estimate_to(&h, &mask, &g).unwrap();
        assert!((e.to_s - 1e-6).abs() < 1e-9 * 1e-3);
        let per = estimate_to_symbol(&h, &mask, 2, &g).unwrap();
        assert!((per.to_s - 1e-6).abs() < 1e-12);
        assert_eq!(per.pairs, g.n_pilots() - 1);
    }

    #[test]
    fn metric_phase_ignores_global_scale() {
        let g = grid();
        let mask = vec![true; g.n_pilots()];
        let h = apply_timing_offset(&ones(&g), 0.3e-6, &g);
        let a = estimate_to(&h, &mask, &g).unwrap();
        let b = estimate_to(&h.scaled(Complex64::new(-2.0, 0.7)), &mask, &g).unwrap();
        assert!((a.metric.arg() - b.metric.arg()).abs() < 1e-12);
    }

    #[test]
    fn rotation_recovers_cfo() {
        let g = grid();
        let mask = vec![true; g.n_pilots()];
        let h = apply_cfo(&ones(&g), 200.0, &g);
        let e = estimate_cfo(&h, &mask, 0, 1, &g).unwrap();
        assert!((e.cfo_hz - 200.0).abs() < 1e-6);
        let s = estimate_cfo_slot(&h, &mask, &g).unwrap();
        assert!((s.cfo_hz - 200.0).abs() < 1e-6);
        assert!(estimate_cfo(&h, &mask, 1, 1, &g).is_err());
    }

    #[test]
    fn cfo_beyond_unambiguous_range_aliases() {
        let g = grid();
        let mask = vec![true; g.n_pilots()];
        let dt = g.dmrs_time_s(1) - g.dmrs_time_s(0);
        let limit = 1.0 / (2.0 * dt);
        assert!((limit - 2800.0).abs() < 1e-9);
        let h = apply_cfo(&ones(&g), 3000.0, &g);
        let e = estimate_cfo(&h, &mask, 0, 1, &g).unwrap();
        assert!((e.cfo_hz - (3000.0 - 1.0 / dt)).abs() < 1e-6);
    }

    #[test]
    fn needs_adjacent_pairs() {
        let g = grid();
        let mut mask = vec![false; g.n_pilots()];
        mask[0] = true;
        mask[2] = true;
        assert!(estimate_to(&ones(&g), &mask, &g).is_err());
        mask[3] = true;
        assert!(estimate_to(&ones(&g), &mask, &g).is_ok());
    }
}
