//! Channel frequency response tensors.

use num_complex::Complex64;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::grid::CarrierGrid;

/// Tensor dimensions `(N_sym, N_p, N_ant)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub n_sym: usize,
    pub n_p: usize,
    pub n_ant: usize,
}

impl Shape {
    pub fn new(n_sym: usize, n_p: usize, n_ant: usize) -> Self {
        Self { n_sym, n_p, n_ant }
    }

    pub fn of_grid(grid: &CarrierGrid) -> Self {
        Self::new(grid.n_sym(), grid.n_pilots(), grid.n_ant())
    }

    pub fn len(&self) -> usize {
        self.n_sym * self.n_p * self.n_ant
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn offset(&self, i: usize, k: usize, j: usize) -> usize {
        (i * self.n_p + k) * self.n_ant + j
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.n_sym, self.n_p, self.n_ant)
    }
}

/// Complex channel samples indexed by (symbol `i`, pilot `k`, antenna `j`),
/// stored symbol-major, then pilot, then antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct CfrTensor {
    shape: Shape,
    values: Vec<Complex64>,
}

impl CfrTensor {
    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            values: vec![Complex64::new(0.0, 0.0); shape.len()],
        }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(shape.len());
        for i in 0..shape.n_sym {
            for k in 0..shape.n_p {
                for j in 0..shape.n_ant {
                    values.push(f(i, k, j));
                }
            }
        }
        Self { shape, values }
    }

    pub fn from_vec(shape: Shape, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::Shape(format!(
                "{} values do not fill shape {shape}",
                values.len()
            )));
        }
        Ok(Self { shape, values })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn n_sym(&self) -> usize {
        self.shape.n_sym
    }

    pub fn n_p(&self) -> usize {
        self.shape.n_p
    }

    pub fn n_ant(&self) -> usize {
        self.shape.n_ant
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn ensure_shape(&self, expected: Shape) -> Result<()> {
        if self.shape != expected {
            return Err(Error::Shape(format!(
                "tensor shape {} does not match expected {expected}",
                self.shape
            )));
        }
        Ok(())
    }

    /// Pilot axis of one (symbol, antenna) slice.
    pub fn pilot_row(&self, i: usize, j: usize) -> Vec<Complex64> {
        (0..self.shape.n_p).map(|k| self[(i, k, j)]).collect()
    }

    pub fn set_pilot_row(&mut self, i: usize, j: usize, row: &[Complex64]) {
        debug_assert_eq!(row.len(), self.shape.n_p);
        for (k, v) in row.iter().enumerate() {
            self[(i, k, j)] = *v;
        }
    }

    pub fn map(&self, mut f: impl FnMut(Complex64) -> Complex64) -> Self {
        Self {
            shape: self.shape,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        self.map(|v| v * a)
    }

    /// Mean `|H|²` over every entry.
    pub fn mean_power(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.values.len() as f64
    }

    /// Mean `|H|²` over entries whose pilot is occupied in `mask`.
    pub fn masked_mean_power(&self, mask: &[bool]) -> f64 {
        let mut acc = 0.0;
        let mut n = 0usize;
        for i in 0..self.shape.n_sym {
            for (k, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
                for j in 0..self.shape.n_ant {
                    acc += self[(i, k, j)].norm_sqr();
                    n += 1;
                }
            }
        }
        if n == 0 {
            0.0
        } else {
            acc / n as f64
        }
    }

    /// Round every component through `f32`, the on-disk precision.
    pub fn quantize_f32(&self) -> Self {
        self.map(|v| Complex64::new(v.re as f32 as f64, v.im as f32 as f64))
    }

    /// Zero every entry whose pilot is unoccupied.
    pub fn apply_mask(&mut self, mask: &[bool]) {
        for i in 0..self.shape.n_sym {
            for (k, _) in mask.iter().enumerate().filter(|(_, &m)| !m) {
                for j in 0..self.shape.n_ant {
                    self[(i, k, j)] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    pub fn max_abs_diff(&self, other: &CfrTensor) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize, usize)> for CfrTensor {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, k, j): (usize, usize, usize)) -> &Complex64 {
        &self.values[self.shape.offset(i, k, j)]
    }
}

impl IndexMut<(usize, usize, usize)> for CfrTensor {
    #[inline]
    fn index_mut(&mut self, (i, k, j): (usize, usize, usize)) -> &mut Complex64 {
        let o = self.shape.offset(i, k, j);
        &mut self.values[o]
    }
}

/// Maximal runs of consecutive occupied pilots, as half-open ranges.
pub fn occupied_runs(mask: &[bool]) -> Vec<std::ops::Range<usize>> {
    let mut runs = Vec::new();
    let mut start = None;
    for (k, &m) in mask.iter().enumerate() {
        match (m, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                runs.push(s..k);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(s..mask.len());
    }
    runs
}
