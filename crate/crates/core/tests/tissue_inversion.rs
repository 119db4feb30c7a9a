use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectracube::tissue::{fit_spectrum, forward_reflectance, ExtinctionTable, FitOptions, TissueParams};
use spectracube::WavelengthGrid;

fn random_params(rng: &mut ChaCha8Rng) -> TissueParams {
    TissueParams {
        b1: rng.random_range(0.2..0.6),
        b2: rng.random_range(-2.0..-0.5),
        b3: rng.random_range(0.005..0.05),
        b4: rng.random_range(0.3..3.0),
        b5: rng.random_range(0.2..0.98),
        lipid: 0.0,
    }
}

#[test]
fn noiseless_round_trip_over_physiological_box() {
    let ext = ExtinctionTable::default_for(WavelengthGrid::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = FitOptions::default();
    let t = std::time::Instant::now();
    let mut worst = (0.0f64, 0.0f64);
    let mut iters = 0;
    for _ in 0..100 {
        let p = random_params(&mut rng);
        let s = forward_reflectance(&p, &ext);
        let init = TissueParams {
            b1: p.b1 * rng.random_range(0.8..1.2),
            b2: p.b2 * rng.random_range(0.8..1.2),
            b3: p.b3 * rng.random_range(0.8..1.2),
            b4: p.b4 * rng.random_range(0.8..1.2),
            b5: (p.b5 * rng.random_range(0.8..1.2)).min(0.999),
            lipid: 0.0,
        };
        let fit = fit_spectrum(&s, &ext, &init, &opts).unwrap();
        iters += fit.iterations;
        worst.0 = worst.0.max((fit.params.b4 - p.b4).abs() / p.b4);
        worst.1 = worst.1.max((fit.params.b5 - p.b5).abs());
    }
    eprintln!("worst b4 rel {:.2e} b5 abs {:.2e} mean iters {} in {:?}", worst.0, worst.1, iters / 100, t.elapsed());
    assert!(worst.0 < 0.01 && worst.1 < 0.01);
}
