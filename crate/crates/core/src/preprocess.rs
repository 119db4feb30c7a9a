//! White/black reference normalization and cross-camera color correction.

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::cube::{Hypercube, RgbImage};
use crate::error::{Error, Result};
use crate::grid::Spectrum;

/// Minimum allowed `white - black` denominator.
pub const EPS_DENOMINATOR: f64 = 1e-6;
/// Upper clamp on normalized reflectance (specular glints exceed 1).
pub const CLAMP_MAX: f64 = 2.0;

/// A white or black reference: a full array matching the data, or one value per
/// channel (flat-field) broadcast over every pixel.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    Full(Vec<f64>),
    PerChannel(Vec<f64>),
}

impl Reference {
    fn value(&self, index: usize, channels: usize) -> f64 {
        match self {
            Reference::Full(v) => v[index],
            Reference::PerChannel(v) => v[index % channels],
        }
    }

    fn check(&self, len: usize, channels: usize, what: &str) -> Result<()> {
        let (got, want) = match self {
            Reference::Full(v) => (v.len(), len),
            Reference::PerChannel(v) => (v.len(), channels),
        };
        if got != want {
            return Err(Error::Dimension(format!(
                "{what} reference has {got} values, expected {want}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePair {
    pub white: Reference,
    pub black: Reference,
}

impl ReferencePair {
    pub fn full(white: Vec<f64>, black: Vec<f64>) -> Self {
        Self {
            white: Reference::Full(white),
            black: Reference::Full(black),
        }
    }

    pub fn per_channel(white: Vec<f64>, black: Vec<f64>) -> Self {
        Self {
            white: Reference::PerChannel(white),
            black: Reference::PerChannel(black),
        }
    }
}

/// Data that can be reflectance-normalized element-wise.
pub trait Reflectance: Sized {
    /// Interleaved values with the channel (band) index varying fastest.
    fn values(&self) -> &[f64];
    fn channels(&self) -> usize;
    /// Upper clamp allowed by the type.
    fn max_value(&self) -> f64 {
        f64::INFINITY
    }
    fn rebuild(&self, values: Vec<f64>) -> Result<Self>;
}

impl Reflectance for Spectrum {
    fn values(&self) -> &[f64] {
        Spectrum::values(self)
    }
    fn channels(&self) -> usize {
        self.grid().count()
    }
    fn rebuild(&self, values: Vec<f64>) -> Result<Self> {
        Spectrum::new(*self.grid(), values)
    }
}

impl Reflectance for Hypercube {
    fn values(&self) -> &[f64] {
        self.data()
    }
    fn channels(&self) -> usize {
        self.bands()
    }
    fn rebuild(&self, values: Vec<f64>) -> Result<Self> {
        let cube = Hypercube::new(self.rows(), self.cols(), *self.grid(), values)?;
        match self.plane_names() {
            Some(n) => cube.with_plane_names(n.to_vec()),
            None => Ok(cube),
        }
    }
}

impl Reflectance for RgbImage {
    fn values(&self) -> &[f64] {
        self.data()
    }
    fn channels(&self) -> usize {
        3
    }
    fn max_value(&self) -> f64 {
        1.0
    }
    fn rebuild(&self, values: Vec<f64>) -> Result<Self> {
        let img = RgbImage::new(self.rows(), self.cols(), values)?;
        Ok(match self.bit_depth_origin() {
            Some(b) => img.with_bit_depth(b),
            None => img,
        })
    }
}

/// `(measured - black) / (white - black)`, clamped to `[0, clamp_max]`.
///
/// RGB images additionally clamp at 1 to keep the image invariant.
pub fn normalize_reflectance<T: Reflectance>(
    measured: &T,
    refs: &ReferencePair,
    clamp_max: f64,
) -> Result<T> {
    let data = measured.values();
    let ch = measured.channels();
    refs.white.check(data.len(), ch, "white")?;
    refs.black.check(data.len(), ch, "black")?;
    let upper = clamp_max.min(measured.max_value());
    let mut bad = Vec::new();
    let mut out = Vec::with_capacity(data.len());
    for (i, &m) in data.iter().enumerate() {
        let w = refs.white.value(i, ch);
        let b = refs.black.value(i, ch);
        let den = w - b;
        if !(den >= EPS_DENOMINATOR) {
            bad.push(i);
            out.push(0.0);
            continue;
        }
        out.push(((m - b) / den).clamp(0.0, upper));
    }
    if !bad.is_empty() {
        return Err(Error::SmallDenominator {
            eps: EPS_DENOMINATOR,
            coords: bad,
        });
    }
    measured.rebuild(out)
}

/// A 3×3 matrix `M` with `x2 ≈ M · x1` per pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorCorrection {
    pub matrix: [[f64; 3]; 3],
    pub condition_number: f64,
    pub rms_residual: f64,
}

impl ColorCorrection {
    pub fn identity() -> Self {
        Self {
            matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            condition_number: 1.0,
            rms_residual: 0.0,
        }
    }

    pub fn from_matrix(matrix: [[f64; 3]; 3]) -> Self {
        let m = Matrix3::from_fn(|r, c| matrix[r][c]);
        Self {
            matrix,
            condition_number: condition(&m),
            rms_residual: 0.0,
        }
    }

    pub fn apply_pixel(&self, p: [f64; 3]) -> [f64; 3] {
        let m = &self.matrix;
        std::array::from_fn(|r| m[r][0] * p[0] + m[r][1] * p[1] + m[r][2] * p[2])
    }
}

fn condition(m: &Matrix3<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Least-squares fit of `M` minimizing `Σ ‖x2_i − M x1_i‖²`.
pub fn fit_color_correction(x1: &[[f64; 3]], x2: &[[f64; 3]]) -> Result<ColorCorrection> {
    let n = x1.len();
    if n != x2.len() {
        return Err(Error::Dimension(format!(
            "{n} source samples but {} target samples",
            x2.len()
        )));
    }
    if n < 3 {
        return Err(Error::DegenerateColorSamples(format!("need at least 3 samples, got {n}")));
    }
    if x1.iter().chain(x2).flatten().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateColorSamples("non-finite sample".into()));
    }
    let a = DMatrix::from_fn(n, 3, |r, c| x1[r][c]);
    let b = DMatrix::from_fn(n, 3, |r, c| x2[r][c]);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::DegenerateColorSamples(format!(
            "source samples have rank < 3 (singular values {:?})",
            svd.singular_values.as_slice()
        )));
    }
    // a · Mᵀ = b
    let mt = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::DegenerateColorSamples(e.to_string()))?;
    let matrix: [[f64; 3]; 3] = std::array::from_fn(|r| std::array::from_fn(|c| mt[(c, r)]));
    let resid = &b - &a * &mt;
    let rms = (resid.norm_squared() / (3 * n) as f64).sqrt();
    let mut cc = ColorCorrection::from_matrix(matrix);
    cc.rms_residual = rms;
    Ok(cc)
}

/// Maps every pixel through `M` and clamps into `[0, 1]`.
pub fn apply_color_correction(img: &RgbImage, cc: &ColorCorrection) -> Result<RgbImage> {
    let data: Vec<f64> = img
        .pixels()
        .flat_map(|p| cc.apply_pixel(p).map(|v| v.clamp(0.0, 1.0)))
        .collect();
    let out = RgbImage::new(img.rows(), img.cols(), data)?;
    Ok(match img.bit_depth_origin() {
        Some(b) => out.with_bit_depth(b),
        None => out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::WavelengthGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spectrum(vals: Vec<f64>) -> Spectrum {
        let g = WavelengthGrid::new(500.0, 1.0, vals.len()).unwrap();
        Spectrum::new(g, vals).unwrap()
    }

    #[test]
    fn normalization_fixed_points() {
        let white = vec![0.9, 0.8, 0.7];
        let black = vec![0.1, 0.05, 0.02];
        let refs = ReferencePair::full(white.clone(), black.clone());
        let w = normalize_reflectance(&spectrum(white.clone()), &refs, CLAMP_MAX).unwrap();
        assert!(w.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let b = normalize_reflectance(&spectrum(black.clone()), &refs, CLAMP_MAX).unwrap();
        assert!(b.values().iter().all(|&v| v == 0.0));
        let mid: Vec<f64> = white.iter().zip(&black).map(|(w, b)| (w + b) / 2.0).collect();
        let m = normalize_reflectance(&spectrum(mid), &refs, CLAMP_MAX).unwrap();
        assert!(m.values().iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn small_denominator_lists_coordinates() {
        let refs = ReferencePair::full(vec![1.0, 0.5, 0.3], vec![0.0, 0.5, 0.4]);
        match normalize_reflectance(&spectrum(vec![0.5; 3]), &refs, CLAMP_MAX) {
            Err(Error::SmallDenominator { coords, .. }) => assert_eq!(coords, vec![1, 2]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn per_channel_references_broadcast_and_clamp() {
        let img = RgbImage::new(1, 2, vec![0.5, 0.5, 0.5, 1.0, 0.0, 0.25]).unwrap();
        let refs = ReferencePair::per_channel(vec![0.5, 1.0, 0.5], vec![0.0, 0.0, 0.0]);
        let out = normalize_reflectance(&img, &refs, CLAMP_MAX).unwrap();
        assert_eq!(out.data(), &[1.0, 0.5, 1.0, 1.0, 0.0, 0.5]);
    }

    #[test]
    fn normalization_is_affine_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let k = 8;
            let white: Vec<f64> = (0..k).map(|_| rng.random_range(0.6..1.0)).collect();
            let black: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..0.1)).collect();
            let meas: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
            let a = rng.random_range(0.5..4.0);
            let b = rng.random_range(-1.0..1.0);
            let t = |v: &Vec<f64>| v.iter().map(|x| a * x + b).collect::<Vec<_>>();
            let r1 = normalize_reflectance(
                &spectrum(meas.clone()),
                &ReferencePair::full(white.clone(), black.clone()),
                CLAMP_MAX,
            )
            .unwrap();
            let r2 = normalize_reflectance(
                &spectrum(t(&meas)),
                &ReferencePair::full(t(&white), t(&black)),
                CLAMP_MAX,
            )
            .unwrap();
            for (x, y) in r1.values().iter().zip(r2.values()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    fn random_samples(n: usize, seed: u64) -> Vec<[f64; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| std::array::from_fn(|_| rng.random_range(0.0..1.0))).collect()
    }

    #[test]
    fn color_fit_identity_and_scaling() {
        let x1 = random_samples(100, 1);
        let cc = fit_color_correction(&x1, &x1).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let e = if r == c { 1.0 } else { 0.0 };
                assert!((cc.matrix[r][c] - e).abs() < 1e-10);
            }
        }
        let x2: Vec<[f64; 3]> = x1.iter().map(|p| p.map(|v| 2.0 * v)).collect();
        let cc = fit_color_correction(&x1, &x2).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let e = if r == c { 2.0 } else { 0.0 };
                assert!((cc.matrix[r][c] - e).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn color_fit_recovers_random_matrix() {
        let x1 = random_samples(1000, 2);
        let a = [[0.9, 0.1, -0.05], [0.05, 1.1, 0.02], [-0.1, 0.2, 0.8]];
        let cc0 = ColorCorrection::from_matrix(a);
        let x2: Vec<[f64; 3]> = x1.iter().map(|&p| cc0.apply_pixel(p)).collect();
        let cc = fit_color_correction(&x1, &x2).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert!((cc.matrix[r][c] - a[r][c]).abs() < 1e-8);
            }
        }
        // direct residual check
        let worst = x1
            .iter()
            .zip(&x2)
            .flat_map(|(&p, q)| {
                let m = cc.apply_pixel(p);
                (0..3).map(move |i| (m[i] - q[i]).abs())
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-10);
    }

    #[test]
    fn color_fit_rejects_rank_deficient() {
        let x1: Vec<[f64; 3]> = (0..20).map(|i| [i as f64, 2.0 * i as f64, 0.0]).collect();
        let err = fit_color_correction(&x1, &x1).unwrap_err();
        assert!(err.to_string().contains("degenerate color sample set"));
    }

    #[test]
    fn fit_then_apply_meets_least_squares_residual() {
        let x1 = random_samples(200, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x2: Vec<[f64; 3]> = x1
            .iter()
            .map(|p| [0.8 * p[0] + 0.05, 0.9 * p[1], p[2] * p[2]].map(|v| v + rng.random_range(-0.01..0.01)))
            .collect();
        let cc = fit_color_correction(&x1, &x2).unwrap();
        let rms = (x1
            .iter()
            .zip(&x2)
            .map(|(&p, q)| {
                let m = cc.apply_pixel(p);
                (0..3).map(|i| (m[i] - q[i]).powi(2)).sum::<f64>()
            })
            .sum::<f64>()
            / (3.0 * x1.len() as f64))
            .sqrt();
        assert!(rms <= cc.rms_residual + 1e-12);
    }

    #[test]
    fn apply_color_correction_examples() {
        let img = RgbImage::new(1, 1, vec![0.2, 0.4, 0.6]).unwrap();
        assert_eq!(apply_color_correction(&img, &ColorCorrection::identity()).unwrap(), img);
        let zero = ColorCorrection::from_matrix([[0.0; 3]; 3]);
        assert_eq!(apply_color_correction(&img, &zero).unwrap().data(), &[0.0, 0.0, 0.0]);
        let half_r = ColorCorrection::from_matrix([[0.5, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let out = apply_color_correction(&img, &half_r).unwrap();
        assert!((out.data()[0] - 0.1).abs() < 1e-15);
        assert_eq!(&out.data()[1..], &[0.4, 0.6]);
    }
}
