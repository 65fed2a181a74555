use cebench::channel::TdlProfile;
use cebench::dataset::{decode_dataset, encode_dataset, read_dataset, split_indices, write_dataset, DatasetHeader};
use cebench::generate::{AllocationSpec, GeneratorContext};
use cebench::impairments::{ImpairmentSettings, Toggles};
use cebench::nn::{load_model, write_weights, Activation, Architecture, DenoiserModel};
use cebench::{build_grid, Complex64, Error, GridConfig};
use proptest::prelude::*;
use std::path::Path;

fn le32(v: u32) -> [u8; 4] {
    v.to_le_bytes()
}

/// One record on a 1-symbol, 6-pilot, 1-antenna grid, assembled byte by
/// byte from the documented layout.
fn hand_built_dataset() -> Vec<u8> {
    let header = br#"{"grid":{"n_prb":1,"scs_hz":30000.0,"comb":2,"dmrs_symbols":[3],"n_ant":1},"record_count":1,"has_observations":true,"toggles":null,"creation_seed":5,"description":"hand"}"#;
    let mut b = Vec::new();
    b.extend_from_slice(b"S2FD");
    b.extend_from_slice(&le32(1));
    b.extend_from_slice(&le32(header.len() as u32));
    b.extend_from_slice(header);
    b.extend_from_slice(&[1, 1, 1, 1, 0, 0]);
    for k in 0..6 {
        let (re, im) = if k < 4 { (k as f32 + 0.5, -(k as f32)) } else { (0.0, 0.0) };
        b.extend_from_slice(&re.to_le_bytes());
        b.extend_from_slice(&im.to_le_bytes());
    }
    for k in 0..6 {
        b.extend_from_slice(&(k as f32 * 0.25).to_le_bytes());
        b.extend_from_slice(&1.0f32.to_le_bytes());
    }
    let draw = b"{\"to_s\":1e-7,\"cfo_hz\":-12.5,\"ant_gains_lin\":[1.0],\"snr_db\":null,\"dc_indices\":[2],\"dc_leak\":[[0.5,-0.5]],\"seed\":99}\n";
    b.extend_from_slice(&le32(draw.len() as u32));
    b.extend_from_slice(draw);
    b
}

#[test]
fn hand_built_dataset_decodes_and_reencodes_identically() {
    let bytes = hand_built_dataset();
    let (header, records) = decode_dataset(&bytes).unwrap();
    assert_eq!(header.record_count, 1);
    assert_eq!(header.creation_seed, 5);
    let r = &records[0];
    assert_eq!(r.mask, vec![true, true, true, true, false, false]);
    let obs = r.ls_obs.as_ref().unwrap();
    assert_eq!(obs[(0, 2, 0)], Complex64::new(2.5, -2.0));
    assert_eq!(obs[(0, 5, 0)], Complex64::new(0.0, 0.0));
    assert_eq!(r.truth[(0, 3, 0)], Complex64::new(0.75, 1.0));
    assert_eq!(r.draw.to_s, 1e-7);
    assert_eq!(r.draw.snr_db, f64::INFINITY);
    assert_eq!(r.draw.dc_leak, vec![Complex64::new(0.5, -0.5)]);
    assert_eq!(encode_dataset(&header, &records).unwrap().bytes, bytes);
}

#[test]
fn malformed_dataset_bytes_are_rejected() {
    let good = hand_built_dataset();
    let mut bad = good.clone();
    bad[0] = b'X';
    assert!(matches!(decode_dataset(&bad), Err(Error::BadMagic { .. })));
    let mut bad = good.clone();
    bad[4] = 2;
    assert!(matches!(decode_dataset(&bad), Err(Error::Version { found: 2, .. })));
    assert!(decode_dataset(&good[..good.len() - 3]).is_err());
    let mut bad = good.clone();
    bad.push(0);
    assert!(decode_dataset(&bad).is_err());
    // a masked-out observation must be exactly zero
    let mut bad = good.clone();
    let hlen = u32::from_le_bytes([good[8], good[9], good[10], good[11]]) as usize;
    let obs5 = 12 + hlen + 6 + 5 * 8;
    bad[obs5..obs5 + 4].copy_from_slice(&1.0f32.to_le_bytes());
    assert!(decode_dataset(&bad).is_err());
    let mut bad = good;
    bad[12 + hlen] = 7;
    assert!(decode_dataset(&bad).is_err());
}

fn context(toggles: Toggles, allocation: Option<AllocationSpec>) -> GeneratorContext {
    let grid = build_grid(&GridConfig {
        n_prb: 24,
        ..GridConfig::default()
    })
    .unwrap();
    let imp = ImpairmentSettings {
        toggles,
        ..ImpairmentSettings::default()
    }
    .resolve(&grid, Path::new("."))
    .unwrap();
    GeneratorContext::new(grid, TdlProfile::preset("medium").unwrap(), imp, allocation).unwrap()
}

#[test]
fn generated_dataset_round_trips_bit_exact() {
    let alloc = AllocationSpec {
        probability: 0.5,
        min_prb: 6,
        max_prb: 18,
    };
    let ctx = context(Toggles::all_on(), Some(alloc));
    let records = ctx.generate(40, 1234).unwrap();
    assert!(records.iter().any(|r| r.mask.iter().any(|m| !m)));
    let header = DatasetHeader::new(&ctx.grid, Some(Toggles::all_on()), 1234);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.s2fd");
    let n = write_dataset(&path, &header, &records).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes.len() as u64, n);
    let (h2, back) = read_dataset(&path).unwrap();
    assert_eq!(h2.record_count, 40);
    assert_eq!(back, records);
    assert_eq!(encode_dataset(&h2, &back).unwrap().bytes, bytes);

    // identical seeds reproduce the payload
    let again = encode_dataset(&header, &ctx.generate(40, 1234).unwrap()).unwrap();
    assert_eq!(again.bytes, bytes);
}

#[test]
fn truth_only_dataset_round_trips() {
    let ctx = context(Toggles::all_off(), None);
    let mut records = ctx.generate(3, 8).unwrap();
    for r in &mut records {
        r.ls_obs = None;
    }
    let header = DatasetHeader::new(&ctx.grid, None, 8);
    let enc = encode_dataset(&header, &records).unwrap();
    let (h, back) = decode_dataset(&enc.bytes).unwrap();
    assert!(!h.has_observations);
    assert_eq!(back, records);
}

/// Weight file for n_sym = 1, n_ant = 1, F = 2, 1x1 kernels, with every
/// parameter equal to its position in the file divided by 100.
fn hand_built_weights() -> Vec<u8> {
    let mut layers = vec![r#"{"name":"head","in_ch":2,"out_ch":2,"kh":1,"kw":1}"#.to_string()];
    for b in 0..4 {
        for c in 1..=2 {
            layers.push(format!(r#"{{"name":"block{b}.conv{c}","in_ch":2,"out_ch":2,"kh":1,"kw":1}}"#));
        }
    }
    layers.push(r#"{"name":"tail","in_ch":2,"out_ch":2,"kh":1,"kw":1}"#.to_string());
    let arch = format!(
        r#"{{"n_sym":1,"n_ant":1,"features":2,"kernel":1,"activation":"relu","blocks":4,"layers":[{}]}}"#,
        layers.join(",")
    );
    let mut b = Vec::new();
    b.extend_from_slice(b"S2FW");
    b.extend_from_slice(&le32(1));
    b.extend_from_slice(&le32(arch.len() as u32));
    b.extend_from_slice(arch.as_bytes());
    // 10 layers x (4 weights + 2 biases)
    for p in 0..60 {
        b.extend_from_slice(&(p as f32 / 100.0).to_le_bytes());
    }
    b
}

#[test]
fn hand_built_weight_file_decodes_in_layer_order() {
    let bytes = hand_built_weights();
    let m = DenoiserModel::decode(&bytes).unwrap();
    assert_eq!(m.architecture().blocks, 4);
    for (l, conv) in m.layers().iter().enumerate() {
        let base = l * 6;
        let w: Vec<f32> = (0..4).map(|p| (base + p) as f32 / 100.0).collect();
        let bias: Vec<f32> = (4..6).map(|p| (base + p) as f32 / 100.0).collect();
        assert_eq!(conv.weight, w);
        assert_eq!(conv.bias, bias);
    }
    // out 0 reads in 0 and in 1 through weights 0.00 and 0.01
    assert_eq!(m.head().w(0, 1, 0, 0), 0.01);
    assert_eq!(m.encode().unwrap(), bytes);
}

#[test]
fn malformed_weight_files_are_rejected() {
    let good = hand_built_weights();
    let mut bad = good.clone();
    bad[3] = b'D';
    assert!(matches!(DenoiserModel::decode(&bad), Err(Error::BadMagic { .. })));
    let mut bad = good.clone();
    bad[4] = 9;
    assert!(matches!(DenoiserModel::decode(&bad), Err(Error::Version { .. })));
    assert!(DenoiserModel::decode(&good[..good.len() - 4]).is_err());
    assert!(DenoiserModel::decode(&good[..10]).is_err());
    let text = String::from_utf8_lossy(&good).replace(r#""blocks":4"#, r#""blocks":3"#);
    assert!(DenoiserModel::decode(text.as_bytes()).is_err());
}

#[test]
fn random_model_file_round_trip_is_bit_exact() {
    let arch = Architecture::standard(3, 2, 8, 3, Activation::Relu);
    let m = DenoiserModel::random(arch, 1.0, 17).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.s2fw");
    let n = write_weights(&m, &path).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), n);
    let back = load_model(&path).unwrap();
    for (a, b) in m.layers().iter().zip(back.layers()) {
        assert!(a.weight.iter().zip(&b.weight).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(a.bias.iter().zip(&b.bias).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert!(matches!(load_model(&dir.path().join("nope.s2fw")), Err(Error::MissingArtifact { .. })));
}

proptest! {
    #[test]
    fn splits_partition_the_records(n in 1usize..100, a in 0.05f64..0.9, seed in any::<u64>()) {
        let fr = [a, (1.0 - a) * 0.5, (1.0 - a) * 0.5];
        let parts = split_indices(n, &fr, seed).unwrap();
        let mut all: Vec<usize> = parts.concat();
        prop_assert_eq!(all.len(), n);
        all.sort_unstable();
        all.dedup();
        prop_assert_eq!(all.len(), n);
        prop_assert_eq!(split_indices(n, &fr, seed).unwrap(), parts);
    }
}
