use std::f64::consts::PI;

use aqa_core::dsp::*;
use proptest::prelude::*;

fn sine(freq: f64, amp: f64, seconds: f64) -> Vec<f32> {
    let n = (seconds * SAMPLE_RATE as f64) as usize;
    (0..n).map(|i| (amp * (2.0 * PI * freq * i as f64 / SAMPLE_RATE as f64).sin()) as f32).collect()
}

/// Direct evaluation of a biquad's transfer function on the unit circle.
fn biquad_power(b: [f64; 3], a: [f64; 2], f: f64) -> f64 {
    let w = 2.0 * PI * f / SAMPLE_RATE as f64;
    let z = |k: f64| ((k * w).cos(), -(k * w).sin());
    let eval = |c: [f64; 3]| {
        let (r1, i1) = z(1.0);
        let (r2, i2) = z(2.0);
        (c[0] + c[1] * r1 + c[2] * r2, c[1] * i1 + c[2] * i2)
    };
    let (nr, ni) = eval(b);
    let (dr, di) = eval([1.0, a[0], a[1]]);
    (nr * nr + ni * ni) / (dr * dr + di * di)
}

#[test]
fn coefficients_at_48k_are_the_published_ones() {
    let k = KWeightingFilter::for_rate(48_000);
    let s1 = [1.53512485958697, -2.69169618940638, 1.19839281085285, -1.69065929318241, 0.73248077421585];
    let s2 = [1.0, -2.0, 1.0, -1.99004745483398, 0.99007225036621];
    let got1 = [k.stage1.b[0], k.stage1.b[1], k.stage1.b[2], k.stage1.a[0], k.stage1.a[1]];
    let got2 = [k.stage2.b[0], k.stage2.b[1], k.stage2.b[2], k.stage2.a[0], k.stage2.a[1]];
    for (g, w) in got1.iter().chain(&got2).zip(s1.iter().chain(&s2)) {
        assert!((g - w).abs() < 1e-6, "{g} vs {w}");
    }
    let d = KWeightingFilter::derived(48_000.0);
    for (g, w) in [d.stage1.b[0], d.stage1.a[0], d.stage2.a[0], d.stage2.a[1]].iter().zip([s1[0], s1[3], s2[3], s2[4]])
    {
        assert!((g - w).abs() < 1e-6);
    }
}

#[test]
fn k_weighting_is_flat_at_1k_after_the_offset() {
    let k = KWeightingFilter::for_rate(48_000);
    let effective = k.gain_db(1000.0, 48_000.0) - 0.691;
    assert!(effective.abs() < 0.1, "{effective}");
}

#[test]
fn full_scale_997hz_sine_reads_minus_3_01() {
    let x = sine(997.0, 1.0, 5.0);
    let l = lufs_integrated(&x, SAMPLE_RATE).unwrap();
    assert!((l + 3.01).abs() < 0.1, "{l}");

    // Steady sine: every block has mean square 0.5·|H|², so the gates pass all.
    let k = KWeightingFilter::for_rate(48_000);
    let power = biquad_power(k.stage1.b, k.stage1.a, 997.0) * biquad_power(k.stage2.b, k.stage2.a, 997.0);
    let oracle = -0.691 + 10.0 * (0.5 * power).log10();
    assert!((l - oracle).abs() < 0.01, "{l} vs {oracle}");
}

#[test]
fn silence_is_negative_infinity() {
    let l = lufs_integrated(&vec![0.0; 48_000], SAMPLE_RATE).unwrap();
    assert!(l.is_infinite() && l < 0.0);
}

#[test]
fn half_amplitude_is_6_02_lu_quieter() {
    let x = sine(440.0, 0.8, 3.0);
    let half: Vec<f32> = x.iter().map(|v| v * 0.5).collect();
    let d = lufs_integrated(&x, SAMPLE_RATE).unwrap() - lufs_integrated(&half, SAMPLE_RATE).unwrap();
    assert!((d - 6.02).abs() < 0.05, "{d}");
}

#[test]
fn shorter_than_one_block_is_an_error() {
    let err = lufs_integrated(&vec![0.1; 19_199], SAMPLE_RATE).unwrap_err();
    assert_eq!(err, DspError::TooShort { needed: 19_200, got: 19_199 });
}

#[test]
fn other_rates_use_derived_filters() {
    let x: Vec<f32> = {
        let n = 44_100 * 3;
        (0..n).map(|i| (0.5 * (2.0 * PI * 997.0 * i as f64 / 44_100.0).sin()) as f32).collect()
    };
    let l44 = lufs_integrated(&x, 44_100).unwrap();
    let l48 = lufs_integrated(&sine(997.0, 0.5, 3.0), SAMPLE_RATE).unwrap();
    assert!((l44 - l48).abs() < 0.05, "{l44} vs {l48}");
}

#[test]
fn centroid_of_pure_tone() {
    let c = spectral_centroid(&sine(1000.0, 0.5, 1.0), SAMPLE_RATE).unwrap();
    assert!((c - 1000.0).abs() < 25.0, "{c}");
}

#[test]
fn centroid_of_two_equal_tones() {
    let a = sine(500.0, 0.4, 1.0);
    let b = sine(1500.0, 0.4, 1.0);
    let x: Vec<f32> = a.iter().zip(&b).map(|(p, q)| p + q).collect();
    let c = spectral_centroid(&x, SAMPLE_RATE).unwrap();
    // Equal lines at 500 and 1500 Hz weigh equally.
    assert!((c - 1000.0).abs() < 50.0, "{c}");
}

#[test]
fn centroid_of_white_noise_is_high() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f32> = (0..48_000).map(|_| rng.random_range(-0.5..0.5)).collect();
    assert!(spectral_centroid(&x, SAMPLE_RATE).unwrap() > 5000.0);
}

#[test]
fn centroid_of_silence_is_undefined() {
    assert_eq!(spectral_centroid(&[0.0; 4096], SAMPLE_RATE), Err(DspError::Silent));
}

fn params(rt60: f64, wet: f64) -> ReverbParams {
    ReverbParams { rt60_s: rt60, ir_length_s: rt60, wet_dry: wet, seed: 17 }
}

#[test]
fn dry_mix_is_identity() {
    let x = sine(300.0, 0.7, 0.5);
    assert_eq!(apply_reverb(&x, &params(0.4, 0.0), SAMPLE_RATE).unwrap(), x);
}

#[test]
fn impulse_decays_60_db_over_rt60() {
    for rt60 in [0.2, 0.4, 0.6] {
        let mut x = vec![0.0f32; (1.5 * rt60 * SAMPLE_RATE as f64) as usize];
        x[0] = 1.0;
        let y = apply_reverb(&x, &params(rt60, 1.0), SAMPLE_RATE).unwrap();
        // Least-squares slope of the windowed energy in dB over the tail.
        let win = 480;
        let (mut ts, mut ds) = (Vec::new(), Vec::new());
        let stop = (0.8 * rt60 * SAMPLE_RATE as f64) as usize;
        let mut start = win;
        while start + win <= stop {
            let e: f64 = y[start..start + win].iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / win as f64;
            ts.push((start + win / 2) as f64 / SAMPLE_RATE as f64);
            ds.push(10.0 * e.log10());
            start += win;
        }
        let n = ts.len() as f64;
        let (mt, md) = (ts.iter().sum::<f64>() / n, ds.iter().sum::<f64>() / n);
        let cov: f64 = ts.iter().zip(&ds).map(|(t, d)| (t - mt) * (d - md)).sum();
        let var: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
        let drop = -cov / var * rt60;
        assert!((drop - 60.0).abs() < 6.0, "rt60 {rt60}: {drop} dB");
    }
}

#[test]
fn reverb_is_deterministic() {
    let x = sine(440.0, 0.5, 0.3);
    let p = params(0.3, 0.4);
    assert_eq!(apply_reverb(&x, &p, SAMPLE_RATE).unwrap(), apply_reverb(&x, &p, SAMPLE_RATE).unwrap());
}

#[test]
fn invalid_reverb_parameters_are_rejected() {
    let mut p = params(0.3, 1.5);
    assert!(p.validate().is_err());
    p.wet_dry = 0.5;
    p.ir_length_s = 0.1;
    assert!(p.validate().is_err());
    p.rt60_s = 0.0;
    assert!(p.validate().is_err());
}

#[test]
fn infinite_snr_is_identity() {
    let x = sine(440.0, 0.5, 0.2);
    assert_eq!(add_uniform_noise(&x, f64::INFINITY, 1).unwrap(), x);
}

#[test]
fn zero_db_snr_adds_equal_power() {
    let x = sine(440.0, 0.5, 2.0);
    let y = add_uniform_noise(&x, 0.0, 9).unwrap();
    let ps: f64 = x.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / x.len() as f64;
    let pn: f64 = y.iter().zip(&x).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum::<f64>() / x.len() as f64;
    assert!((pn / ps - 1.0).abs() < 0.05, "{}", pn / ps);
}

#[test]
fn noise_depends_on_seed_only() {
    let x = sine(440.0, 0.5, 0.2);
    let a = add_uniform_noise(&x, 20.0, 1).unwrap();
    assert_eq!(a, add_uniform_noise(&x, 20.0, 1).unwrap());
    assert_ne!(a, add_uniform_noise(&x, 20.0, 2).unwrap());
}

#[test]
fn noise_rejects_silence_and_nan() {
    assert_eq!(add_uniform_noise(&[0.0; 100], 20.0, 1), Err(DspError::Silent));
    assert!(matches!(add_uniform_noise(&[0.1; 100], f64::NAN, 1), Err(DspError::InvalidParameter(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn loudness_follows_the_gain_law(freq in 100.0f64..6000.0, amp in 0.2f64..0.9, alpha in 0.1f64..1.0) {
        let x = sine(freq, amp, 1.0);
        let y: Vec<f32> = x.iter().map(|&v| (v as f64 * alpha) as f32).collect();
        let d = lufs_integrated(&y, SAMPLE_RATE).unwrap() - lufs_integrated(&x, SAMPLE_RATE).unwrap();
        prop_assert!((d - 20.0 * alpha.log10()).abs() < 0.05);
    }

    #[test]
    fn reverb_mix_is_linear(scale in -2.0f64..2.0, seed in 0u64..1000, wet in 0.0f64..1.0) {
        let x = sine(220.0, 0.3, 0.25);
        let ax: Vec<f32> = x.iter().map(|&v| (v as f64 * scale) as f32).collect();
        let p = ReverbParams { rt60_s: 0.2, ir_length_s: 0.2, wet_dry: wet, seed };
        let y = reverb_mix(&x, &p, SAMPLE_RATE).unwrap();
        let ay = reverb_mix(&ax, &p, SAMPLE_RATE).unwrap();
        for (a, b) in ay.iter().zip(&y) {
            prop_assert!((a - scale * b).abs() < 1e-5);
        }
    }

    #[test]
    fn noise_hits_the_requested_snr(snr in 0.0f64..40.0, seed in 0u64..1000) {
        let x = sine(330.0, 0.5, 1.0);
        let y = add_uniform_noise(&x, snr, seed).unwrap();
        let ps: f64 = x.iter().map(|&v| (v as f64).powi(2)).sum();
        let pn: f64 = y.iter().zip(&x).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum();
        prop_assert!((10.0 * (ps / pn).log10() - snr).abs() < 0.3);
    }
}
