use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f32) -> f32 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    pub fn apply_in_place(self, t: &mut Tensor4) {
        if self == Activation::Identity {
            return;
        }
        for v in t.data_mut() {
            *v = self.apply(*v);
        }
    }
}

/// 2-D convolution (cross-correlation) with stride 1 and zero "same"
/// padding. Weights are `(out_ch, in_ch, kh, kw)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub out_ch: usize,
    pub in_ch: usize,
    pub kh: usize,
    pub kw: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Conv2d {
    pub fn new(out_ch: usize, in_ch: usize, kh: usize, kw: usize, weight: Vec<f32>, bias: Vec<f32>) -> Result<Self> {
        if out_ch == 0 || in_ch == 0 || kh == 0 || kw == 0 {
            return Err(Error::Model(format!(
                "conv dims must be positive: ({out_ch}, {in_ch}, {kh}, {kw})"
            )));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::Model(format!("same padding needs odd kernels, got {kh}x{kw}")));
        }
        if weight.len() != out_ch * in_ch * kh * kw || bias.len() != out_ch {
            return Err(Error::Model(format!(
                "conv ({out_ch}, {in_ch}, {kh}, {kw}) has {} weights and {} biases",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self {
            out_ch,
            in_ch,
            kh,
            kw,
            weight,
            bias,
        })
    }

    pub fn zeros(out_ch: usize, in_ch: usize, kh: usize, kw: usize) -> Result<Self> {
        Self::new(out_ch, in_ch, kh, kw, vec![0.0; out_ch * in_ch * kh * kw], vec![0.0; out_ch])
    }

    pub fn n_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    #[inline]
    pub fn w(&self, o: usize, i: usize, dy: usize, dx: usize) -> f32 {
        self.weight[((o * self.in_ch + i) * self.kh + dy) * self.kw + dx]
    }

    pub fn forward(&self, input: &Tensor4) -> Result<Tensor4> {
        if input.channels() != self.in_ch {
            return Err(Error::Shape(format!(
                "conv expects {} input channels, got {}",
                self.in_ch,
                input.channels()
            )));
        }
        let [batch, _, h, w] = input.dims();
        let mut out = Tensor4::zeros([batch, self.out_ch, h, w]);
        let ph = self.kh / 2;
        let pw = self.kw / 2;
        let plane = h * w;
        for b in 0..batch {
            let src = input.item(b);
            for o in 0..self.out_ch {
                let base = out.offset(b, o, 0, 0);
                let dst = &mut out.data_mut()[base..base + plane];
                dst.fill(self.bias[o]);
                for i in 0..self.in_ch {
                    let src_plane = &src[i * plane..(i + 1) * plane];
                    for dy in 0..self.kh {
                        // output rows y with 0 <= y + dy - ph < h
                        let y0 = ph.saturating_sub(dy);
                        let y1 = (h + ph).saturating_sub(dy).min(h);
                        if y1 <= y0 {
                            continue;
                        }
                        for dx in 0..self.kw {
                            let wv = self.w(o, i, dy, dx);
                            if wv == 0.0 {
                                continue;
                            }
                            let x0 = pw.saturating_sub(dx);
                            let x1 = (w + pw).saturating_sub(dx).min(w);
                            if x1 <= x0 {
                                continue;
                            }
                            for y in y0..y1 {
                                let sy = y + dy - ph;
                                let drow = &mut dst[y * w + x0..y * w + x1];
                                let srow = &src_plane[sy * w + x0 + dx - pw..sy * w + x1 + dx - pw];
                                for (d, s) in drow.iter_mut().zip(srow) {
                                    *d += wv * s;
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}
