use num_complex::Complex64;

use crate::cfr::{CfrTensor, Shape};
use crate::error::{Error, Result};

/// Dense `f32` tensor laid out (batch, channels, height, width), row-major.
///
/// For channel estimation the height axis is the pilot axis and the width
/// axis is the antenna axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    dims: [usize; 4],
    data: Vec<f32>,
}

impl Tensor4 {
    pub fn new(dims: [usize; 4], data: Vec<f32>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!("tensor dims must be positive, got {dims:?}")));
        }
        if dims.iter().product::<usize>() != data.len() {
            return Err(Error::Shape(format!(
                "{} values do not fill dims {dims:?}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: [usize; 4]) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    pub fn channels(&self) -> usize {
        self.dims[1]
    }

    pub fn height(&self) -> usize {
        self.dims[2]
    }

    pub fn width(&self) -> usize {
        self.dims[3]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn offset(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        ((b * self.dims[1] + c) * self.dims[2] + y) * self.dims[3] + x
    }

    #[inline]
    pub fn get(&self, b: usize, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.offset(b, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, b: usize, c: usize, y: usize, x: usize, v: f32) {
        let o = self.offset(b, c, y, x);
        self.data[o] = v;
    }

    /// One `(channels, height, width)` plane block of batch item `b`.
    pub fn item(&self, b: usize) -> &[f32] {
        let n = self.dims[1] * self.dims[2] * self.dims[3];
        &self.data[b * n..(b + 1) * n]
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> f32 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }
}

/// Packs CFRs as a batch: channel `2i` holds the real part of DMRS symbol
/// `i`, channel `2i+1` its imaginary part.
pub fn pack_batch(cfrs: &[&CfrTensor]) -> Result<Tensor4> {
    let first = cfrs
        .first()
        .ok_or_else(|| Error::Shape("cannot pack an empty batch".into()))?;
    let shape = first.shape();
    let mut t = Tensor4::zeros([cfrs.len(), 2 * shape.n_sym, shape.n_p, shape.n_ant]);
    for (b, cfr) in cfrs.iter().enumerate() {
        cfr.ensure_shape(shape)?;
        for i in 0..shape.n_sym {
            for k in 0..shape.n_p {
                for j in 0..shape.n_ant {
                    let v = cfr[(i, k, j)];
                    t.set(b, 2 * i, k, j, v.re as f32);
                    t.set(b, 2 * i + 1, k, j, v.im as f32);
                }
            }
        }
    }
    Ok(t)
}

pub fn pack_input(cfr: &CfrTensor) -> Result<Tensor4> {
    pack_batch(&[cfr])
}

/// Inverse of [`pack_batch`] for batch item `b`.
pub fn unpack_item(t: &Tensor4, b: usize) -> Result<CfrTensor> {
    if t.channels() % 2 != 0 {
        return Err(Error::Shape(format!("odd channel count {}", t.channels())));
    }
    if b >= t.batch() {
        return Err(Error::OutOfRange(format!("batch item {b} of {}", t.batch())));
    }
    let shape = Shape::new(t.channels() / 2, t.height(), t.width());
    Ok(CfrTensor::from_fn(shape, |i, k, j| {
        Complex64::new(t.get(b, 2 * i, k, j) as f64, t.get(b, 2 * i + 1, k, j) as f64)
    }))
}

pub fn unpack_output(t: &Tensor4) -> Result<CfrTensor> {
    unpack_item(t, 0)
}
