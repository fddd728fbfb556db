//! Every manifest feature checked against a straight-line reimplementation
//! of its definition, including an O(L²) DFT in place of the FFT.

mod oracle;

use har_core::features::{extract_window, fft_spectrum, Domain, FeatureManifest, Sensor, Statistic};
use oracle::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

#[test]
fn every_feature_matches_definitional_oracle() {
    let manifest = FeatureManifest::default_manifest();
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let mut worst = (0.0f64, String::new());
    for _ in 0..50 {
        let w = random_window(&mut rng);
        let fv = extract_window(&w, &manifest).unwrap();
        for (d, got) in manifest.descriptors().iter().zip(&fv.values) {
            let o = d.sensor.channel_offset();
            let raw: [Vec<f64>; 3] = std::array::from_fn(|a| w.data[o + a].clone());
            let signals = match d.domain {
                Domain::Time => raw,
                Domain::Freq => raw.map(|s| fft_spectrum(&s).unwrap()),
            };
            let expected = oracle(d.statistic, d.axis, &signals);
            let e = rel_err(*got, expected);
            if e > worst.0 {
                worst = (e, d.id());
            }
            assert!(e < 1e-12, "{}: got {got}, oracle {expected}, rel err {e:e}", d.id());
        }
    }
    eprintln!("worst relative error {:e} ({})", worst.0, worst.1);
}

#[test]
fn spectrum_matches_naive_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240602);
    for _ in 0..50 {
        let w = random_window(&mut rng);
        for ch in &w.data {
            let fast = fft_spectrum(ch).unwrap();
            let slow = naive_dft_magnitudes(ch);
            let scale = slow.iter().copied().fold(0.0, f64::max);
            for (k, (a, b)) in fast.iter().zip(&slow).enumerate() {
                assert!((a - b).abs() <= 1e-12 * scale, "bin {k}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn frequency_features_through_naive_dft_on_well_conditioned_bins() {
    let manifest = FeatureManifest::default_manifest();
    let mut rng = ChaCha8Rng::seed_from_u64(20240603);
    for _ in 0..50 {
        let w = random_window(&mut rng);
        let fv = extract_window(&w, &manifest).unwrap();
        for (d, got) in manifest.descriptors().iter().zip(&fv.values) {
            if d.domain != Domain::Freq {
                continue;
            }
            let o = d.sensor.channel_offset();
            let spectra: [Vec<f64>; 3] =
                std::array::from_fn(|a| naive_dft_magnitudes(&w.data[o + a]));
            let expected = oracle(d.statistic, d.axis, &spectra);
            let scale = spectra
                .iter()
                .flatten()
                .map(|m| m.abs())
                .fold(0.0, f64::max);
            let tol = if matches!(d.statistic, Statistic::Min | Statistic::MinPeak) {
                1e-12 * scale
            } else {
                1e-12 * expected.abs().max(got.abs())
            };
            assert!(
                (got - expected).abs() <= tol.max(f64::MIN_POSITIVE),
                "{}: got {got}, oracle {expected}",
                d.id()
            );
        }
    }
}

#[test]
fn oracle_dft_agrees_on_a_pure_tone() {
    let x: Vec<f64> = (0..L).map(|n| (2.0 * PI * 2.0 * n as f64 / L as f64).sin()).collect();
    let m = naive_dft_magnitudes(&x);
    assert!((m[2] - 128.0).abs() < 1e-9);
    let gyro = FeatureManifest::default_manifest()
        .descriptors()
        .iter()
        .filter(|d| d.sensor == Sensor::Gyro)
        .count();
    assert_eq!(gyro, 160);
}
