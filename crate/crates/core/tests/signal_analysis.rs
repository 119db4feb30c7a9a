use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use spectracube::analytics::{bandpass, phase_difference, PhaseMethod, PhaseOptions};

fn tone(f: f64, fs: f64, n: usize, phase: f64) -> Vec<f64> {
    (0..n).map(|i| (2.0 * PI * f * i as f64 / fs + phase).sin()).collect()
}

fn interior_peak(x: &[f64]) -> f64 {
    let n = x.len();
    x[n / 10..n - n / 10].iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[test]
fn passband_tone_keeps_amplitude() {
    let fs = 10.0;
    for phase in [0.0, 0.3, 1.2, 2.5] {
        let x = tone(0.05, fs, 1800, phase);
        let y = bandpass(&x, fs, 0.01, 0.1, 3).unwrap();
        let peak = interior_peak(&y);
        assert!((peak - 1.0).abs() < 0.05, "phase {phase}: peak {peak}");
    }
}

#[test]
fn stopband_tone_is_removed() {
    let fs = 60.0;
    for phase in [0.0, 0.7, 1.57, 2.9] {
        let x = tone(1.0, fs, 60 * 180 + 17, phase);
        let y = bandpass(&x, fs, 0.01, 0.1, 3).unwrap();
        let peak = interior_peak(&y);
        assert!(peak < 0.01, "phase {phase}: peak {peak}");
    }
}

#[test]
fn constant_input_gives_zero_output() {
    let x = vec![3.7; 5000];
    let y = bandpass(&x, 10.0, 0.01, 0.1, 3).unwrap();
    assert!(interior_peak(&y) < 1e-6 * 3.7);
}

fn noisy_pair(shift: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let fs = 60.0;
    let n = (180.0 * fs) as usize;
    let a = tone(0.05, fs, n, 0.0);
    let b = tone(0.05, fs, n, -shift);
    let heart_a = tone(1.0, fs, n, 0.4);
    let heart_b = tone(1.0, fs, n, 1.1);
    // SNR 10 dB against a unit-amplitude tone
    let noise = Normal::new(0.0, (0.5f64 / 10.0).sqrt()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = (0..n).map(|i| a[i] + 0.5 * heart_a[i] + noise.sample(&mut rng)).collect();
    let b = (0..n).map(|i| b[i] + 0.5 * heart_b[i] + noise.sample(&mut rng)).collect();
    (a, b)
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

#[test]
fn antiphase_pair_is_near_180_degrees() {
    let (a, b) = noisy_pair(PI, 11);
    for method in [PhaseMethod::Hilbert, PhaseMethod::Xspec] {
        let r = phase_difference(&a, &b, 60.0, &PhaseOptions { method, ..Default::default() }).unwrap();
        assert!(angle_gap(r.phase_deg, 180.0) < 2.0, "{method:?}: {}", r.phase_deg);
        assert!(!r.low_confidence);
    }
}

#[test]
fn known_lag_is_recovered() {
    let (a, b) = noisy_pair(PI / 2.0, 5);
    let r = phase_difference(&a, &b, 60.0, &PhaseOptions::default()).unwrap();
    assert!(angle_gap(r.phase_deg, 90.0) < 3.0, "{}", r.phase_deg);
    assert!((0.0..360.0).contains(&r.phase_deg));
}

#[test]
fn edge_trim_is_capped() {
    let (a, b) = noisy_pair(PI, 1);
    let r = phase_difference(&a, &b, 60.0, &PhaseOptions::default()).unwrap();
    // 1 / f_lo = 100 s exceeds 10 % of 180 s
    assert_eq!(r.edge_samples, 1080);
}
