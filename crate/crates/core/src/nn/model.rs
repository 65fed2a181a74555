//! Residual CNN denoiser and its weight file.
//!
//! Network: head conv → activation → 4 × residual block → tail conv, where
//! each residual block is conv → activation → conv → add skip → activation.
//!
//! Weight file, little-endian:
//!
//! ```text
//! "S2FW" | u32 version | u32 arch_len | architecture JSON
//! per layer in declared order: weight (out_ch, in_ch, kh, kw) f32, bias (out_ch) f32
//! ```

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::dataset::write_atomic;
use crate::error::{Error, Result};
use crate::nn::conv::{Activation, Conv2d};
use crate::nn::tensor::Tensor4;
use crate::seed;

pub const WEIGHT_MAGIC: [u8; 4] = *b"S2FW";
pub const WEIGHT_VERSION: u32 = 1;
pub const RESIDUAL_BLOCKS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub name: String,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kh: usize,
    pub kw: usize,
}

/// Architecture header carried by every weight file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub n_sym: usize,
    pub n_ant: usize,
    pub features: usize,
    pub kernel: usize,
    pub activation: Activation,
    pub blocks: usize,
    pub layers: Vec<LayerSpec>,
}

impl Architecture {
    /// Standard layer list: head and tail share the block kernel size.
    pub fn standard(n_sym: usize, n_ant: usize, features: usize, kernel: usize, activation: Activation) -> Self {
        Self::with_io_kernel(n_sym, n_ant, features, kernel, kernel, activation)
    }

    fn with_io_kernel(
        n_sym: usize,
        n_ant: usize,
        features: usize,
        kernel: usize,
        io_kernel: usize,
        activation: Activation,
    ) -> Self {
        let c = 2 * n_sym;
        let mut layers = vec![LayerSpec {
            name: "head".into(),
            in_ch: c,
            out_ch: features,
            kh: io_kernel,
            kw: io_kernel,
        }];
        for b in 0..RESIDUAL_BLOCKS {
            for n in 1..=2 {
                layers.push(LayerSpec {
                    name: format!("block{b}.conv{n}"),
                    in_ch: features,
                    out_ch: features,
                    kh: kernel,
                    kw: kernel,
                });
            }
        }
        layers.push(LayerSpec {
            name: "tail".into(),
            in_ch: features,
            out_ch: c,
            kh: io_kernel,
            kw: io_kernel,
        });
        Self {
            n_sym,
            n_ant,
            features,
            kernel,
            activation,
            blocks: RESIDUAL_BLOCKS,
            layers,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Model(m));
        if self.blocks != RESIDUAL_BLOCKS {
            return fail(format!("expected {RESIDUAL_BLOCKS} residual blocks, got {}", self.blocks));
        }
        if self.n_sym == 0 || self.n_ant == 0 || self.features == 0 {
            return fail("n_sym, n_ant and features must be positive".into());
        }
        let expected = 2 + 2 * self.blocks;
        if self.layers.len() != expected {
            return fail(format!("expected {expected} layers, got {}", self.layers.len()));
        }
        let c = 2 * self.n_sym;
        let head = &self.layers[0];
        if head.in_ch != c {
            return fail(format!("head takes {} channels but 2·N_sym = {c}", head.in_ch));
        }
        if head.out_ch != self.features {
            return fail(format!("head emits {} channels, features = {}", head.out_ch, self.features));
        }
        for l in &self.layers[1..expected - 1] {
            if l.in_ch != self.features || l.out_ch != self.features {
                return fail(format!("{} is {}→{}, expected {f}→{f}", l.name, l.in_ch, l.out_ch, f = self.features));
            }
        }
        let tail = &self.layers[expected - 1];
        if tail.in_ch != self.features || tail.out_ch != c {
            return fail(format!("tail is {}→{}, expected {}→{c}", tail.in_ch, tail.out_ch, self.features));
        }
        for l in &self.layers {
            if l.kh == 0 || l.kw == 0 || l.kh % 2 == 0 || l.kw % 2 == 0 {
                return fail(format!("{} has kernel {}x{}; kernels must be odd", l.name, l.kh, l.kw));
            }
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.out_ch * l.in_ch * l.kh * l.kw + l.out_ch)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResBlock {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
}

/// Immutable denoiser; [`DenoiserModel::infer`] allocates its own scratch
/// so a model can be shared across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserModel {
    arch: Architecture,
    head: Conv2d,
    blocks: Vec<ResBlock>,
    tail: Conv2d,
}

impl DenoiserModel {
    /// Assembles a model from convs in declared layer order.
    pub fn from_layers(arch: Architecture, convs: Vec<Conv2d>) -> Result<Self> {
        arch.validate()?;
        if convs.len() != arch.layers.len() {
            return Err(Error::Model(format!("{} convs for {} layers", convs.len(), arch.layers.len())));
        }
        for (spec, conv) in arch.layers.iter().zip(&convs) {
            if (conv.out_ch, conv.in_ch, conv.kh, conv.kw) != (spec.out_ch, spec.in_ch, spec.kh, spec.kw) {
                return Err(Error::Model(format!("{} does not match its declared shape", spec.name)));
            }
        }
        let mut it = convs.into_iter();
        let head = it.next().unwrap();
        let mut blocks = Vec::with_capacity(arch.blocks);
        for _ in 0..arch.blocks {
            let conv1 = it.next().unwrap();
            let conv2 = it.next().unwrap();
            blocks.push(ResBlock { conv1, conv2 });
        }
        let tail = it.next().unwrap();
        Ok(Self { arch, head, blocks, tail })
    }

    /// Gaussian weights scaled by `1/sqrt(fan_in)` times `gain`, small
    /// random biases.
    pub fn random(arch: Architecture, gain: f32, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = seed::rng(seed);
        let convs = arch
            .layers
            .iter()
            .map(|l| {
                let fan_in = (l.in_ch * l.kh * l.kw) as f32;
                let scale = gain / fan_in.sqrt();
                let w = (0..l.out_ch * l.in_ch * l.kh * l.kw)
                    .map(|_| rng.sample::<f32, _>(StandardNormal) * scale)
                    .collect();
                let b = (0..l.out_ch).map(|_| rng.sample::<f32, _>(StandardNormal) * 0.1).collect();
                Conv2d::new(l.out_ch, l.in_ch, l.kh, l.kw, w, b)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(arch, convs)
    }

    /// A ReLU network that reproduces its input.
    ///
    /// The 1×1 head splits every input channel into its positive and
    /// negative parts (`F = 4·N_sym`), the residual convolutions are all
    /// zero so each block passes its non-negative input through, and the
    /// 1×1 tail recombines `x⁺ - x⁻`.
    pub fn identity_fixture(n_sym: usize, n_ant: usize, kernel: usize) -> Result<Self> {
        let c = 2 * n_sym;
        let f = 2 * c;
        let arch = Architecture::with_io_kernel(n_sym, n_ant, f, kernel, 1, Activation::Relu);
        let mut head = Conv2d::zeros(f, c, 1, 1)?;
        let mut tail = Conv2d::zeros(c, f, 1, 1)?;
        for ch in 0..c {
            head.weight[ch * c + ch] = 1.0;
            head.weight[(c + ch) * c + ch] = -1.0;
            tail.weight[ch * f + ch] = 1.0;
            tail.weight[ch * f + c + ch] = -1.0;
        }
        let mut convs = vec![head];
        for _ in 0..2 * RESIDUAL_BLOCKS {
            convs.push(Conv2d::zeros(f, f, kernel, kernel)?);
        }
        convs.push(tail);
        Self::from_layers(arch, convs)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn head(&self) -> &Conv2d {
        &self.head
    }

    pub fn blocks(&self) -> &[ResBlock] {
        &self.blocks
    }

    pub fn tail(&self) -> &Conv2d {
        &self.tail
    }

    /// Convs in declared layer order.
    pub fn layers(&self) -> Vec<&Conv2d> {
        let mut v = vec![&self.head];
        for b in &self.blocks {
            v.push(&b.conv1);
            v.push(&b.conv2);
        }
        v.push(&self.tail);
        v
    }

    pub fn in_channels(&self) -> usize {
        self.head.in_ch
    }

    pub fn infer(&self, input: &Tensor4) -> Result<Tensor4> {
        if input.channels() != self.in_channels() {
            return Err(Error::Shape(format!(
                "model expects {} input channels, got {}",
                self.in_channels(),
                input.channels()
            )));
        }
        let act = self.arch.activation;
        let mut x = self.head.forward(input)?;
        act.apply_in_place(&mut x);
        for block in &self.blocks {
            let mut t = block.conv1.forward(&x)?;
            act.apply_in_place(&mut t);
            let t = block.conv2.forward(&t)?;
            for (xv, tv) in x.data_mut().iter_mut().zip(t.data()) {
                *xv = act.apply(*xv + tv);
            }
        }
        self.tail.forward(&x)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let arch = serde_json::to_vec(&self.arch)?;
        let mut out = Vec::with_capacity(12 + arch.len() + 4 * self.arch.n_params());
        out.extend_from_slice(&WEIGHT_MAGIC);
        out.extend_from_slice(&WEIGHT_VERSION.to_le_bytes());
        out.extend_from_slice(&(arch.len() as u32).to_le_bytes());
        out.extend_from_slice(&arch);
        for conv in self.layers() {
            for v in conv.weight.iter().chain(&conv.bias) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 {
            return Err(Error::Format("weight file shorter than its fixed header".into()));
        }
        let magic = [bytes[0], bytes[1], bytes[2], bytes[3]];
        if magic != WEIGHT_MAGIC {
            return Err(Error::BadMagic {
                expected: WEIGHT_MAGIC,
                found: magic,
            });
        }
        let version = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
        if version != WEIGHT_VERSION {
            return Err(Error::Version {
                expected: WEIGHT_VERSION,
                found: version,
            });
        }
        let arch_len = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
        let body = &bytes[12..];
        if body.len() < arch_len {
            return Err(Error::Format("truncated architecture header".into()));
        }
        let arch: Architecture = serde_json::from_slice(&body[..arch_len])?;
        arch.validate()?;
        let params = &body[arch_len..];
        let expected = arch.n_params() * 4;
        if params.len() != expected {
            return Err(Error::Model(format!(
                "parameter payload is {} bytes, architecture needs {expected}",
                params.len()
            )));
        }
        let mut floats = params
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
        let convs = arch
            .layers
            .iter()
            .map(|l| {
                let w = floats.by_ref().take(l.out_ch * l.in_ch * l.kh * l.kw).collect();
                let b = floats.by_ref().take(l.out_ch).collect();
                Conv2d::new(l.out_ch, l.in_ch, l.kh, l.kw, w, b)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(arch, convs)
    }
}

pub fn load_model(path: &Path) -> Result<DenoiserModel> {
    let bytes = std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingArtifact {
                path: path.to_path_buf(),
                what: "model weight file not found".into(),
            }
        } else {
            Error::Io(e)
        }
    })?;
    DenoiserModel::decode(&bytes)
}

/// Writes the weight file and returns its size in bytes.
pub fn write_weights(model: &DenoiserModel, path: &Path) -> Result<u64> {
    let bytes = model.encode()?;
    write_atomic(path, &bytes)?;
    Ok(bytes.len() as u64)
}

/// Checks that a model fits a carrier geometry.
pub fn check_model_geometry(model: &DenoiserModel, n_sym: usize, n_ant: usize) -> Result<()> {
    let a = model.architecture();
    if a.n_sym != n_sym || a.n_ant != n_ant {
        return Err(Error::Model(format!(
            "model built for N_sym={}, N_ant={} but data has N_sym={n_sym}, N_ant={n_ant}",
            a.n_sym, a.n_ant
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_arch() -> Architecture {
        Architecture::standard(2, 2, 5, 3, Activation::Relu)
    }

    #[test]
    fn standard_arch_has_four_blocks() {
        let a = Architecture::standard(3, 2, 48, 3, Activation::Relu);
        a.validate().unwrap();
        assert_eq!(a.layers.len(), 10);
        assert_eq!(a.layers[0].in_ch, 6);
        assert_eq!(a.layers[9].out_ch, 6);
    }

    #[test]
    fn weight_round_trip() {
        let m = DenoiserModel::random(small_arch(), 1.0, 3).unwrap();
        let back = DenoiserModel::decode(&m.encode().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn structural_errors() {
        let m = DenoiserModel::random(small_arch(), 1.0, 3).unwrap();
        let bytes = m.encode().unwrap();
        assert!(matches!(DenoiserModel::decode(&bytes[..bytes.len() - 4]), Err(Error::Model(_))));
        let mut bad = bytes.clone();
        bad[3] = b'X';
        assert!(matches!(DenoiserModel::decode(&bad), Err(Error::BadMagic { .. })));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(DenoiserModel::decode(&bad), Err(Error::Version { .. })));

        let mut arch = small_arch();
        arch.layers[0].in_ch = 5;
        assert!(arch.validate().is_err());
        let mut arch = small_arch();
        arch.blocks = 3;
        assert!(arch.validate().is_err());
    }

    #[test]
    fn head_channels_must_match_n_sym() {
        let m = DenoiserModel::random(small_arch(), 1.0, 3).unwrap();
        let bytes = m.encode().unwrap();
        let arch_len = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
        let mut arch: Architecture = serde_json::from_slice(&bytes[12..12 + arch_len]).unwrap();
        arch.n_sym = 3;
        let json = serde_json::to_vec(&arch).unwrap();
        let mut forged = bytes[..8].to_vec();
        forged.extend_from_slice(&(json.len() as u32).to_le_bytes());
        forged.extend_from_slice(&json);
        forged.extend_from_slice(&bytes[12 + arch_len..]);
        let err = DenoiserModel::decode(&forged).unwrap_err();
        assert!(err.to_string().contains("2·N_sym"), "{err}");
    }

    #[test]
    fn zero_input_zero_bias_gives_zero() {
        let mut m = DenoiserModel::random(small_arch(), 1.0, 4).unwrap();
        m.head.bias.fill(0.0);
        for b in &mut m.blocks {
            b.conv1.bias.fill(0.0);
            b.conv2.bias.fill(0.0);
        }
        m.tail.bias.fill(0.0);
        let y = m.infer(&Tensor4::zeros([1, 4, 12, 2])).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_fixture_reproduces_input() {
        let m = DenoiserModel::identity_fixture(3, 2, 3).unwrap();
        let x = Tensor4::new([1, 6, 7, 2], (0..84).map(|v| (v as f32 * 0.37).sin()).collect()).unwrap();
        let y = m.infer(&x).unwrap();
        assert!(y.max_abs_diff(&x) < 1e-6);
    }

    #[test]
    fn batch_items_are_independent() {
        let m = DenoiserModel::random(small_arch(), 1.0, 5).unwrap();
        let item: Vec<f32> = (0..4 * 9 * 2).map(|v| (v as f32 * 0.1).cos()).collect();
        let mut both = item.clone();
        both.extend_from_slice(&item);
        let y = m.infer(&Tensor4::new([2, 4, 9, 2], both).unwrap()).unwrap();
        assert_eq!(y.item(0), y.item(1));
        assert!(m.infer(&Tensor4::zeros([1, 3, 9, 2])).is_err());
    }
}
