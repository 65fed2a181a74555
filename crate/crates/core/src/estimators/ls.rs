use num_complex::Complex64;

use crate::cfr::CfrTensor;
use crate::error::{Error, Result};

/// Per-pilot least-squares channel estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct LsEstimate {
    pub values: CfrTensor,
    /// Mean `|H|²` over occupied entries.
    pub power: f64,
}

/// Divides the received pilots by the known pilot sequence.
///
/// Unoccupied pilots are never read and come out as zero.
pub fn ls_extract(rx_pilots: &CfrTensor, pilot_seq: &[Complex64], mask: &[bool]) -> Result<LsEstimate> {
    let shape = rx_pilots.shape();
    if pilot_seq.len() != shape.n_p {
        return Err(Error::Shape(format!(
            "pilot sequence has {} elements, tensor has {} pilots",
            pilot_seq.len(),
            shape.n_p
        )));
    }
    if mask.len() != shape.n_p {
        return Err(Error::Shape(format!("mask has {} pilots, tensor has {}", mask.len(), shape.n_p)));
    }
    if let Some(k) = pilot_seq.iter().position(|p| p.norm_sqr() == 0.0) {
        return Err(Error::InvalidArgument(format!("pilot {k} is zero")));
    }
    let mut values = CfrTensor::zeros(shape);
    let mut acc = 0.0;
    let mut n = 0usize;
    for i in 0..shape.n_sym {
        for (k, p) in pilot_seq.iter().enumerate() {
            if !mask[k] {
                continue;
            }
            // unit-modulus pilots reduce to a conjugate multiply
            let inv = p.conj() / p.norm_sqr();
            for j in 0..shape.n_ant {
                let v = rx_pilots[(i, k, j)] * inv;
                acc += v.norm_sqr();
                n += 1;
                values[(i, k, j)] = v;
            }
        }
    }
    let power = if n == 0 { 0.0 } else { acc / n as f64 };
    Ok(LsEstimate { values, power })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfr::Shape;
    use crate::grid::gen_pilot_sequence;

    #[test]
    fn recovers_channel_exactly() {
        let s = Shape::new(2, 12, 2);
        let p = gen_pilot_sequence(4, 12).unwrap();
        let h = CfrTensor::from_fn(s, |i, k, j| Complex64::new(i as f64 + 0.5, k as f64 - j as f64));
        let rx = CfrTensor::from_fn(s, |i, k, j| p[k] * h[(i, k, j)]);
        let ls = ls_extract(&rx, &p, &[true; 12]).unwrap();
        assert!(ls.values.max_abs_diff(&h) < 1e-14);
        assert!((ls.power - h.mean_power()).abs() < 1e-12);
    }

    #[test]
    fn unit_pilots_pass_through() {
        let s = Shape::new(1, 6, 1);
        let rx = CfrTensor::from_fn(s, |_, k, _| Complex64::new(k as f64, 1.0));
        let ones = vec![Complex64::new(1.0, 0.0); 6];
        assert_eq!(ls_extract(&rx, &ones, &[true; 6]).unwrap().values, rx);
    }

    #[test]
    fn errors() {
        let s = Shape::new(1, 6, 1);
        let rx = CfrTensor::zeros(s);
        assert!(ls_extract(&rx, &[Complex64::new(1.0, 0.0); 5], &[true; 6]).is_err());
        let mut p = vec![Complex64::new(1.0, 0.0); 6];
        p[3] = Complex64::new(0.0, 0.0);
        assert!(ls_extract(&rx, &p, &[true; 6]).is_err());
    }

    #[test]
    fn masked_entries_are_not_read() {
        let s = Shape::new(1, 4, 1);
        let mut rx = CfrTensor::from_fn(s, |_, _, _| Complex64::new(1.0, 0.0));
        rx[(0, 2, 0)] = Complex64::new(f64::NAN, f64::NAN);
        let ls = ls_extract(&rx, &[Complex64::new(1.0, 0.0); 4], &[true, true, false, true]).unwrap();
        assert_eq!(ls.values[(0, 2, 0)], Complex64::new(0.0, 0.0));
        assert_eq!(ls.power, 1.0);
    }
}
