use std::f64::consts::PI;

use proptest::prelude::*;
use spectracube::analytics::{
    bandpass, phase_difference, sam_values, segment_vessels, ssim_auto, ChannelBox, PhaseMethod, PhaseOptions,
    SegmentationThresholds,
};
use spectracube::io::{decode_cube, encode_cube};
use spectracube::neural::softplus;
use spectracube::phantom::{render_rgb, Generator, RenderOptions, SceneScript, SensitivityFunction};
use spectracube::preprocess::{apply_color_correction, fit_color_correction, normalize_reflectance, ReferencePair};
use spectracube::regression::{expand, train, TrainOptions, FEATURE_DEGREES};
use spectracube::sampling::{qq_compare, SamplingThresholds};
use spectracube::tissue::{forward_reflectance, spo2, ExtinctionTable, TissueParams};
use spectracube::{Hypercube, RgbImage, SampledLine, WavelengthGrid};

fn cube_strategy() -> impl Strategy<Value = Hypercube> {
    (1usize..6, 1usize..6, 2usize..8).prop_flat_map(|(r, c, k)| {
        prop::collection::vec(-1e6f32..1e6f32, r * c * k).prop_map(move |v| {
            let grid = WavelengthGrid::new(400.0, 10.0, k).unwrap();
            Hypercube::new(r, c, grid, v.into_iter().map(f64::from).collect()).unwrap()
        })
    })
}

fn rgb_strategy(n: usize) -> impl Strategy<Value = Vec<[f64; 3]>> {
    prop::collection::vec(prop::array::uniform3(0.0f64..1.0), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn container_round_trip_is_exact(cube in cube_strategy()) {
        let back = decode_cube(&encode_cube(&cube).unwrap()).unwrap();
        prop_assert_eq!(back.data(), cube.data());
        for i in 0..cube.bands() {
            prop_assert_eq!(back.slice_plane(cube.grid().wavelength(i)).unwrap(), cube.plane(i));
        }
    }

    #[test]
    fn normalization_is_affine_invariant(
        raw in prop::collection::vec(0.0f64..1.0, 12),
        white in prop::collection::vec(0.6f64..1.0, 12),
        black in prop::collection::vec(0.0f64..0.3, 12),
        a in 0.1f64..10.0,
        b in -5.0f64..5.0,
    ) {
        let grid = WavelengthGrid::new(500.0, 1.0, 3).unwrap();
        let cube = |v: &[f64]| Hypercube::new(2, 2, grid, v.to_vec()).unwrap();
        let tr = |v: &[f64]| v.iter().map(|x| a * x + b).collect::<Vec<_>>();
        let base = normalize_reflectance(&cube(&raw), &ReferencePair::full(white.clone(), black.clone()), 2.0).unwrap();
        let moved = normalize_reflectance(&cube(&tr(&raw)), &ReferencePair::full(tr(&white), tr(&black)), 2.0).unwrap();
        for (x, y) in base.data().iter().zip(moved.data()) {
            prop_assert!((x - y).abs() < 1e-9, "{} vs {}", x, y);
        }
    }

    #[test]
    fn color_correction_never_worse_than_its_solve(x1 in rgb_strategy(24), m in prop::array::uniform9(-0.3f64..0.3)) {
        // x2 = (I + small perturbation) x1 + bounded noise
        let x2: Vec<[f64; 3]> = x1
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut q = [0.0; 3];
                for (r, qr) in q.iter_mut().enumerate() {
                    *qr = p[r] + (0..3).map(|c| m[r * 3 + c] * p[c]).sum::<f64>() * 0.3 + 0.01 * ((i * 7 + r) % 5) as f64;
                }
                q.map(|v| v.clamp(0.0, 1.0))
            })
            .collect();
        let Ok(cc) = fit_color_correction(&x1, &x2) else { return Ok(()) };
        let img = RgbImage::new(1, x1.len(), x1.iter().flatten().copied().collect()).unwrap();
        let out = apply_color_correction(&img, &cc).unwrap();
        let rms = |y: &[[f64; 3]]| {
            (y.iter().zip(&x2).flat_map(|(p, q)| (0..3).map(move |c| (p[c] - q[c]).powi(2))).sum::<f64>()
                / (3 * y.len()) as f64)
                .sqrt()
        };
        let mapped: Vec<[f64; 3]> = out.pixels().collect();
        // clamping to [0, 1] can only move predictions toward targets in [0, 1]
        prop_assert!(rms(&mapped) <= cc.rms_residual + 1e-12);
        prop_assert!(cc.rms_residual <= rms(&x1) + 1e-12);
    }

    #[test]
    fn qq_check_is_reflexive(x in rgb_strategy(40)) {
        let r = qq_compare(&x, &x, 99, SamplingThresholds::default()).unwrap();
        prop_assert!(r.pass);
        prop_assert!(r.max_qq_deviation == 0.0);
        prop_assert!(r.range_coverage == 1.0);
    }

    #[test]
    fn qq_points_stay_ordered_under_monotone_transform(
        sample in rgb_strategy(30),
        parent in rgb_strategy(200),
        gamma in 0.3f64..3.0,
    ) {
        let t = |v: &[[f64; 3]]| v.iter().map(|p| p.map(|x| x.powf(gamma))).collect::<Vec<_>>();
        let a = qq_compare(&sample, &parent, 49, SamplingThresholds::default()).unwrap();
        let b = qq_compare(&t(&sample), &t(&parent), 49, SamplingThresholds::default()).unwrap();
        prop_assert_eq!(a.range_coverage, b.range_coverage);
        for ch in a.channels.iter().chain(&b.channels) {
            prop_assert!(ch.qq_points.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
        }
    }

    #[test]
    fn expansion_scales_by_degree(rgb in prop::array::uniform3(0.0f64..2.0), a in 0.01f64..3.0) {
        let base = expand(rgb);
        let scaled = expand(rgb.map(|v| a * v));
        for i in 0..base.len() {
            let want = base[i] * a.powi(FEATURE_DEGREES[i] as i32);
            prop_assert!((scaled[i] - want).abs() <= 1e-12 * want.abs().max(1e-300));
        }
    }

    #[test]
    fn regression_reproduces_exact_polynomial_data(
        rgb in rgb_strategy(60),
        coef in prop::collection::vec(-1.0f64..1.0, 34 * 4),
        seed in any::<u64>(),
    ) {
        let grid = WavelengthGrid::new(500.0, 10.0, 4).unwrap();
        let spectra: Vec<f64> = rgb
            .iter()
            .flat_map(|&p| {
                let f = expand(p);
                let coef = &coef;
                (0..4).map(move |j| (0..34).map(|i| coef[j * 34 + i] * f[i]).sum::<f64>())
            })
            .collect();
        let line = SampledLine::new(grid, (0..60).map(|i| (i, 0)).collect(), rgb.clone(), spectra.clone()).unwrap();
        let opts = TrainOptions { split_seed: seed, ..Default::default() };
        let Ok(model) = train(&line, &opts) else { return Ok(()) };
        let again = train(&line, &opts).unwrap();
        prop_assert_eq!(model.coefficients(), again.coefficients());
        for (i, p) in rgb.iter().enumerate() {
            let got = model.predict_values(*p);
            for j in 0..4 {
                let want = spectra[i * 4 + j];
                prop_assert!((got[j] - want).abs() < 1e-6 * (1.0 + want.abs()), "{} vs {}", got[j], want);
            }
        }
    }

    #[test]
    fn saturation_is_scale_invariant(hbo2 in 0.001f64..5.0, hb in 0.001f64..5.0, a in 1e-3f64..1e3) {
        let s = spo2(hbo2, hb).unwrap();
        prop_assert!((spo2(a * hbo2, a * hb).unwrap() - s).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn reflectance_falls_with_total_hemoglobin(
        b1 in 0.1f64..2.0, b2 in -3.0f64..0.0, b3 in 0.0f64..0.5,
        b4 in 0.0f64..3.0, b5 in 0.0f64..1.0, db in 0.01f64..1.0,
    ) {
        let ext = ExtinctionTable::default_for(WavelengthGrid::new(450.0, 5.0, 41).unwrap()).unwrap();
        let p = TissueParams { b1, b2, b3, b4, b5, lipid: 0.0 };
        let lo = forward_reflectance(&p, &ext);
        let hi = forward_reflectance(&TissueParams { b4: b4 + db, ..p }, &ext);
        for (a, b) in lo.values().iter().zip(hi.values()) {
            prop_assert!(b < a);
        }
    }

    #[test]
    fn softplus_is_positive(x in -700.0f64..700.0) {
        prop_assert!(softplus(x) > 0.0);
    }

    #[test]
    fn sam_is_a_symmetric_scale_free_angle(
        a in prop::collection::vec(0.01f64..1.0, 2..40),
        seed in prop::collection::vec(0.01f64..1.0, 40),
        c in 1e-3f64..1e3,
    ) {
        let b = &seed[..a.len()];
        let scaled: Vec<f64> = a.iter().map(|v| c * v).collect();
        prop_assert!(sam_values(&a, &scaled).unwrap() < 1e-7);
        let ab = sam_values(&a, b).unwrap();
        prop_assert_eq!(ab, sam_values(b, &a).unwrap());
        prop_assert!((0.0..=PI).contains(&ab));
    }

    #[test]
    fn ssim_of_identical_maps_is_one(p in prop::collection::vec(-10.0f64..10.0, 4..100)) {
        prop_assume!(p.iter().any(|&v| v != p[0]));
        prop_assert_eq!(ssim_auto(&p, &p).unwrap().value, 1.0);
    }

    #[test]
    fn bandpass_is_linear(
        x in prop::collection::vec(-1.0f64..1.0, 300),
        y in prop::collection::vec(-1.0f64..1.0, 300),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
    ) {
        let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
        let fx = bandpass(&x, 2.0, 0.05, 0.3, 3).unwrap();
        let fy = bandpass(&y, 2.0, 0.05, 0.3, 3).unwrap();
        let fm = bandpass(&mix, 2.0, 0.05, 0.3, 3).unwrap();
        for i in 0..x.len() {
            prop_assert!((fm[i] - alpha * fx[i] - beta * fy[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn segmentation_grows_with_its_thresholds(
        px in rgb_strategy(64),
        widen in prop::array::uniform6(0.0f64..0.2),
    ) {
        let img = RgbImage::new(8, 8, px.iter().flatten().copied().collect()).unwrap();
        let base = SegmentationThresholds::default();
        let grow = |b: ChannelBox, k: usize| ChannelBox {
            min: [0, 1, 2].map(|c| (b.min[c] - widen[k + c]).max(0.0)),
            max: [0, 1, 2].map(|c| (b.max[c] + widen[k + c]).min(1.0)),
        };
        let wide = SegmentationThresholds { vessel: grow(base.vessel, 0), avascular: grow(base.avascular, 3) };
        let a = segment_vessels(&img, &base).unwrap();
        let b = segment_vessels(&img, &wide).unwrap();
        for i in 0..64 {
            prop_assert!(!a.vessel[i] || b.vessel[i]);
            prop_assert!(!a.avascular[i] || b.avascular[i]);
        }
    }

    #[test]
    fn compiled_scenes_stay_physical(script in script_strategy()) {
        // compile either rejects the script or every pixel of every frame is valid
        if let Ok(scene) = script.compile() {
            for f in 0..script.frames {
                for p in scene.params(f).unwrap() {
                    prop_assert!(p.validate().is_ok(), "{:?}", p);
                }
            }
        }
    }

    #[test]
    fn bounded_scripts_always_compile(script in bounded_script_strategy()) {
        prop_assert!(script.compile().is_ok());
    }
}

fn generator_strategy(lo: f64, hi: f64) -> impl Strategy<Value = Generator> {
    let leaf = prop_oneof![
        (lo..hi).prop_map(|value| Generator::Constant { value }),
        (lo..hi, lo..hi).prop_map(|(from, to)| Generator::Gradient { from, to, axis: Default::default() }),
        (lo..hi, 0.0..(hi - lo), 1.0f64..20.0, any::<u64>()).prop_map(|(mean, amplitude, scale_px, seed)| {
            Generator::Texture { mean, amplitude, scale_px, waves: 6, seed }
        }),
        (lo..hi, lo..hi, 0.0f64..10.0, 0.0f64..2.0, 0.5f64..5.0).prop_map(
            |(high, low, start_col, cols_per_frame, width_px)| Generator::DepletionFront {
                high, low, start_col, cols_per_frame, width_px,
            }
        ),
        (lo..hi, lo..hi, 0.1f64..10.0).prop_map(|(initial, final_value, tau_s)| Generator::Decay {
            initial, final_value, tau_s,
        }),
        (lo..hi, 0.0..(hi - lo), 0.01f64..2.0, 0.0f64..6.3).prop_map(|(mean, amplitude, freq_hz, phase_rad)| {
            Generator::Oscillation { mean, amplitude, freq_hz, phase_rad }
        }),
    ];
    leaf.prop_recursive(2, 6, 3, |inner| prop::collection::vec(inner, 1..3).prop_map(|terms| Generator::Sum { terms }))
}

fn script_with(
    b1: impl Strategy<Value = Generator>,
    b4: impl Strategy<Value = Generator>,
    b5: impl Strategy<Value = Generator>,
) -> impl Strategy<Value = SceneScript> {
    (1usize..6, 1usize..6, 1usize..4, b1, b4, b5).prop_map(|(rows, cols, frames, b1, b4, b5)| SceneScript {
        frames,
        frame_interval_s: 0.5,
        b1,
        b4,
        b5,
        ..SceneScript::standard(rows, cols)
    })
}

fn script_strategy() -> impl Strategy<Value = SceneScript> {
    script_with(generator_strategy(-0.5, 2.0), generator_strategy(-0.5, 3.0), generator_strategy(-0.3, 1.3))
}

/// Leaf generators whose every value lies inside `[lo, hi]`.
fn bounded_generator(lo: f64, hi: f64) -> impl Strategy<Value = Generator> {
    let mid = (lo + hi) / 2.0;
    let half = (hi - lo) / 2.0;
    prop_oneof![
        (lo..=hi).prop_map(|value| Generator::Constant { value }),
        (lo..=hi, lo..=hi).prop_map(|(from, to)| Generator::Gradient { from, to, axis: Default::default() }),
        (0.0..=half, 1.0f64..20.0, any::<u64>()).prop_map(move |(amplitude, scale_px, seed)| {
            Generator::Texture { mean: mid, amplitude, scale_px, waves: 6, seed }
        }),
        (lo..=hi, lo..=hi, 0.1f64..10.0).prop_map(|(initial, final_value, tau_s)| Generator::Decay {
            initial, final_value, tau_s,
        }),
        (0.0..=half, 0.01f64..2.0, 0.0f64..6.3).prop_map(move |(amplitude, freq_hz, phase_rad)| {
            Generator::Oscillation { mean: mid, amplitude, freq_hz, phase_rad }
        }),
    ]
}

fn bounded_script_strategy() -> impl Strategy<Value = SceneScript> {
    script_with(bounded_generator(0.0, 2.0), bounded_generator(0.0, 3.0), bounded_generator(0.0, 1.0))
}

#[test]
fn phase_of_a_signal_with_itself_and_its_negation() {
    let fs = 10.0;
    let a: Vec<f64> = (0..3000).map(|i| (2.0 * PI * 0.05 * i as f64 / fs).sin()).collect();
    let neg: Vec<f64> = a.iter().map(|v| -v).collect();
    for method in [PhaseMethod::Hilbert, PhaseMethod::Xspec] {
        let opts = PhaseOptions { method, ..Default::default() };
        let same = phase_difference(&a, &a, fs, &opts).unwrap().phase_deg;
        let anti = phase_difference(&a, &neg, fs, &opts).unwrap().phase_deg;
        assert!(same.min(360.0 - same) < 1e-6, "{method:?}: {same}");
        assert!((anti - 180.0).abs() < 1e-6, "{method:?}: {anti}");
    }
}

#[test]
fn softplus_meets_identity_far_right() {
    assert!((softplus(30.0) - 30.0).abs() < 1e-12);
}

#[test]
fn seeded_render_is_bit_identical() {
    let grid = WavelengthGrid::new(400.0, 5.0, 61).unwrap();
    let ext = ExtinctionTable::default_for(grid).unwrap();
    let cube = SceneScript::standard(20, 15).compile().unwrap().render_cube(&ext, 0).unwrap();
    let s = SensitivityFunction::default_for(grid).unwrap();
    let opts = RenderOptions { noise_sigma: 0.02, seed: 42, bits: Some(10), ..Default::default() };
    let a = render_rgb(&cube, &s, &opts).unwrap();
    let b = render_rgb(&cube, &s, &opts).unwrap();
    assert_eq!(a.image.data(), b.image.data());
}
