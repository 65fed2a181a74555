//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the code under test except for data accessors.
#![allow(dead_code)]

use cebench::nn::{Activation, Conv2d, DenoiserModel, Tensor4};
use cebench::{CfrTensor, Complex64};
use std::f64::consts::PI;

/// Direct same-padded cross-correlation with f64 accumulation and explicit
/// bounds checks.
pub fn conv_ref(input: &Tensor4, conv: &Conv2d) -> Vec<f64> {
    let [n, c, h, w] = input.dims();
    assert_eq!(c, conv.in_ch);
    let (ph, pw) = ((conv.kh / 2) as i64, (conv.kw / 2) as i64);
    let mut out = vec![0.0f64; n * conv.out_ch * h * w];
    for b in 0..n {
        for o in 0..conv.out_ch {
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    let mut acc = conv.bias[o] as f64;
                    for i in 0..c {
                        for dy in 0..conv.kh as i64 {
                            for dx in 0..conv.kw as i64 {
                                let (sy, sx) = (y + dy - ph, x + dx - pw);
                                if sy < 0 || sx < 0 || sy >= h as i64 || sx >= w as i64 {
                                    continue;
                                }
                                let wi = ((o * c + i) * conv.kh + dy as usize) * conv.kw + dx as usize;
                                let xi = ((b * c + i) * h + sy as usize) * w + sx as usize;
                                acc += conv.weight[wi] as f64 * input.data()[xi] as f64;
                            }
                        }
                    }
                    out[((b * conv.out_ch + o) * h + y as usize) * w + x as usize] = acc;
                }
            }
        }
    }
    out
}

fn act(a: Activation, v: f64) -> f64 {
    match a {
        Activation::Relu => v.max(0.0),
        Activation::Identity => v,
    }
}

fn to_tensor(dims: [usize; 4], v: &[f64]) -> Tensor4 {
    Tensor4::new(dims, v.iter().map(|&x| x as f32).collect()).unwrap()
}

/// Layer-by-layer forward pass. Intermediate activations are rounded to
/// f32 between layers, as a 32-bit engine stores them.
pub fn model_ref(model: &DenoiserModel, input: &Tensor4) -> Vec<f64> {
    let a = model.architecture().activation;
    let [n, _, h, w] = input.dims();
    let f = model.head().out_ch;
    let dims_f = [n, f, h, w];
    let mut x: Vec<f64> = conv_ref(input, model.head()).into_iter().map(|v| act(a, v)).collect();
    for block in model.blocks() {
        let t: Vec<f64> = conv_ref(&to_tensor(dims_f, &x), &block.conv1)
            .into_iter()
            .map(|v| act(a, v))
            .collect();
        let t = conv_ref(&to_tensor(dims_f, &t), &block.conv2);
        x = x.iter().zip(&t).map(|(s, r)| act(a, (*s as f32 as f64) + r)).collect();
    }
    conv_ref(&to_tensor(dims_f, &x), model.tail())
}

pub fn max_abs_diff(a: &[f32], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (*x as f64 - y).abs()).fold(0.0, f64::max)
}

/// Gaussian tail probability by Craig's integral, Simpson's rule.
pub fn q_function(x: f64) -> f64 {
    let n = 4000;
    let h = (PI / 2.0) / n as f64;
    let f = |t: f64| {
        let s = t.sin();
        if s == 0.0 {
            0.0
        } else {
            (-x * x / (2.0 * s * s)).exp()
        }
    };
    let mut acc = f(0.0) + f(PI / 2.0);
    for i in 1..n {
        acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0 / PI
}

/// Gray-mapped QPSK symbol error rate at `es_n0_db`.
pub fn qpsk_ser(es_n0_db: f64) -> f64 {
    let q = q_function(10f64.powf(es_n0_db / 10.0).sqrt());
    2.0 * q - q * q
}

/// `angle(Σ_j Σ_k H(k)·H(k+1)*)` over adjacent occupied pilots of symbol `i`.
pub fn adjacent_phase(h: &CfrTensor, mask: &[bool], i: usize) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..h.n_p() - 1 {
        if mask[k] && mask[k + 1] {
            for j in 0..h.n_ant() {
                acc += h[(i, k, j)] * h[(i, k + 1, j)].conj();
            }
        }
    }
    acc.arg()
}

/// `angle(Σ_j Σ_k H^{i1}(k)·H^{i2}(k)*)`.
pub fn inter_symbol_phase(h: &CfrTensor, i1: usize, i2: usize) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..h.n_p() {
        for j in 0..h.n_ant() {
            acc += h[(i1, k, j)] * h[(i2, k, j)].conj();
        }
    }
    acc.arg()
}

/// Replaces every masked-out pilot with NaN.
pub fn poison(t: &CfrTensor, mask: &[bool]) -> CfrTensor {
    let mut out = t.clone();
    for i in 0..t.n_sym() {
        for k in (0..t.n_p()).filter(|&k| !mask[k]) {
            for j in 0..t.n_ant() {
                out[(i, k, j)] = Complex64::new(f64::NAN, f64::NAN);
            }
        }
    }
    out
}

/// Bitwise equality that treats NaN payloads as equal.
pub fn same_bits(a: &CfrTensor, b: &CfrTensor) -> bool {
    a.shape() == b.shape()
        && a
            .values()
            .iter()
            .zip(b.values())
            .all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits())
}
