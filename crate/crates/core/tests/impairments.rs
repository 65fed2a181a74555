mod support;

use cebench::channel::{cfr_at, gen_channel, TdlProfile};
use cebench::impairments::{
    add_awgn, apply_antenna_scaling, apply_cfo, apply_chain, apply_dc_leakage, apply_timing_offset, ripple_profile,
    sample_impairments, EmpiricalDist, ImpairmentConfig, ImpairmentDraw, Toggles,
};
use cebench::{build_grid, seed, CarrierGrid, CfrTensor, Complex64, GridConfig, Shape};
use proptest::prelude::*;

fn grid(n_prb: usize) -> CarrierGrid {
    build_grid(&GridConfig {
        n_prb,
        ..GridConfig::default()
    })
    .unwrap()
}

fn channel(g: &CarrierGrid, s: u64) -> CfrTensor {
    let p = TdlProfile::preset("medium").unwrap();
    cfr_at(&gen_channel(&p, g, 14, s).unwrap(), g, g.dmrs_symbols()).unwrap()
}

fn noise_power(clean: &CfrTensor, noisy: &CfrTensor) -> f64 {
    clean.values().iter().zip(noisy.values()).map(|(a, b)| (b - a).norm_sqr()).sum::<f64>() / clean.values().len() as f64
}

#[test]
fn ten_db_snr_step_is_ten_db_of_noise() {
    // 3 x 16380 x 2 ≈ 10⁵ entries
    let big = build_grid(&GridConfig {
        n_prb: 273,
        n_ant: 20,
        ..GridConfig::default()
    })
    .unwrap();
    let h = CfrTensor::from_fn(Shape::of_grid(&big), |i, k, j| Complex64::from_polar(1.0, (i + k + j) as f64));
    assert!(h.values().len() >= 90_000);
    for s in [-5.0, 0.0, 7.0] {
        let p0 = noise_power(&h, &add_awgn(&h, s, 1));
        let p1 = noise_power(&h, &add_awgn(&h, s + 10.0, 2));
        let step = 10.0 * (p0 / p1).log10();
        assert!((step - 10.0).abs() <= 0.3, "{step}");
    }
    let ratio = noise_power(&h, &add_awgn(&h, 0.0, 3)) / h.mean_power();
    assert!((ratio - 1.0).abs() <= 0.05, "{ratio}");
}

#[test]
fn empirical_sampling_mean_within_three_sigma() {
    let samples: Vec<f64> = (0..37).map(|i| ((i * 7919) % 101) as f64 * 0.3 - 11.0).collect();
    let d = EmpiricalDist::from_samples(samples).unwrap();
    let n = 100_000;
    let mut rng = seed::rng(42);
    let mean = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
    assert!((mean - d.mean()).abs() <= 3.0 * d.std_dev() / (n as f64).sqrt());
}

#[test]
fn strong_leak_dominates_its_pilot() {
    let g = grid(20);
    let (mut leaked, mut rms2) = (0.0, 0.0);
    let mut n = 0.0;
    for s in 0..200 {
        let h = channel(&g, s);
        let amp = 10.0 * h.mean_power().sqrt();
        let out = apply_dc_leakage(&h, &[17], &[Complex64::new(amp, 0.0)]).unwrap();
        for i in 0..g.n_sym() {
            for j in 0..g.n_ant() {
                leaked += out[(i, 17, j)].norm_sqr();
                rms2 += h.mean_power();
                n += 1.0;
            }
        }
        // every other pilot untouched
        assert!((0..g.n_pilots()).filter(|&k| k != 17).all(|k| out[(0, k, 1)] == h[(0, k, 1)]));
    }
    assert!(10.0 * (leaked / n / (rms2 / n)).log10() >= 20.0);
}

#[test]
fn default_ripple_stays_within_half_a_db() {
    let r = ripple_profile(1638, 0.5);
    for v in &r {
        let db = 20.0 * v.norm().log10();
        assert!(db.abs() <= 0.5 + 1e-12);
    }
}

#[test]
fn antenna_scaling_of_one_and_a_half_db() {
    let g = grid(4);
    let h = CfrTensor::from_fn(Shape::of_grid(&g), |_, _, _| Complex64::new(1.0, 1.0));
    let out = apply_antenna_scaling(&h, &[0.0, -1.5]).unwrap();
    for i in 0..g.n_sym() {
        for k in 0..g.n_pilots() {
            let ratio = out[(i, k, 0)].norm_sqr() / out[(i, k, 1)].norm_sqr();
            assert!((ratio - 10f64.powf(0.15)).abs() < 1e-12);
        }
    }
}

#[test]
fn disabled_chain_is_bit_exact_identity() {
    let g = grid(8);
    let h = channel(&g, 9);
    let cfg = ImpairmentConfig::disabled(&g);
    let draw = sample_impairments(&cfg, 1).unwrap();
    assert_eq!(draw, ImpairmentDraw { seed: draw.seed, ..ImpairmentDraw::identity(g.n_ant(), 0) });
    let (out, _) = apply_chain(&h, &draw, &cfg, &g).unwrap();
    assert!(support::same_bits(&out, &h));
}

#[test]
fn offsets_only_chain_preserves_magnitudes_and_is_deterministic() {
    let g = grid(8);
    let h = channel(&g, 4);
    let mut cfg = ImpairmentConfig::disabled(&g);
    cfg.toggles = Toggles {
        to: true,
        cfo: true,
        ..Toggles::all_off()
    };
    let mut draw = ImpairmentDraw::identity(g.n_ant(), 8);
    draw.to_s = 0.3e-6;
    draw.cfo_hz = 400.0;
    let (a, _) = apply_chain(&h, &draw, &cfg, &g).unwrap();
    let (b, _) = apply_chain(&h, &draw, &cfg, &g).unwrap();
    assert!(support::same_bits(&a, &b));
    for (x, y) in a.values().iter().zip(h.values()) {
        assert!((x.norm() - y.norm()).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn timing_and_frequency_offsets_commute(
        s in any::<u64>(),
        to in -2e-6f64..2e-6,
        cfo in -3000.0f64..3000.0,
    ) {
        let g = grid(4);
        let h = channel(&g, s);
        let a = apply_cfo(&apply_timing_offset(&h, to, &g), cfo, &g);
        let b = apply_timing_offset(&apply_cfo(&h, cfo, &g), to, &g);
        prop_assert!(a.max_abs_diff(&b) < 1e-10);
    }

    #[test]
    fn awgn_is_deterministic_in_seed(s in any::<u64>(), snr in -10.0f64..30.0) {
        let g = grid(2);
        let h = channel(&g, 1);
        prop_assert!(support::same_bits(&add_awgn(&h, snr, s), &add_awgn(&h, snr, s)));
    }
}
