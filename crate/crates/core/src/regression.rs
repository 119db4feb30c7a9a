//! Polynomial-feature least-squares mapping from RGB to full spectra.
//!
//! Each RGB triple is expanded into the 34 monomials of degree 1 to 4 and a
//! k × p transform is solved over the training part of a sampled line. The
//! learned transform is then applied to every pixel of an image.

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::{Hypercube, RgbImage, SampledLine};
use crate::error::{Error, Result};
use crate::grid::{Spectrum, WavelengthGrid};
use crate::io::{read_framed, write_framed};

/// Number of non-constant monomials of degree 1..=4 in three variables.
pub const NUM_FEATURES: usize = 34;

/// Condition number above which the design is treated as rank-deficient.
pub const CONDITION_LIMIT: f64 = 1e10;

/// Total degree of each feature in [`expand`] order.
pub const FEATURE_DEGREES: [u32; NUM_FEATURES] = [
    1, 1, 1, //
    2, 2, 2, 2, 2, 2, //
    3, 3, 3, 3, 3, 3, 3, 3, 3, 3, //
    4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4,
];

/// Exponents `(r, g, b)` of each feature in [`expand`] order.
pub const FEATURE_EXPONENTS: [[u32; 3]; NUM_FEATURES] = [
    [1, 0, 0], [0, 1, 0], [0, 0, 1],
    [2, 0, 0], [0, 2, 0], [0, 0, 2], [1, 1, 0], [0, 1, 1], [1, 0, 1],
    [3, 0, 0], [0, 3, 0], [0, 0, 3], [1, 2, 0], [1, 0, 2], [2, 1, 0], [0, 1, 2], [2, 0, 1], [0, 2, 1], [1, 1, 1],
    [4, 0, 0], [0, 4, 0], [0, 0, 4], [3, 1, 0], [3, 0, 1], [1, 3, 0], [0, 3, 1], [1, 0, 3], [0, 1, 3],
    [2, 2, 0], [2, 0, 2], [0, 2, 2], [2, 1, 1], [1, 2, 1], [1, 1, 2],
];

/// The 34 monomials of `(r, g, b)`:
/// `R, G, B, R², G², B², RG, GB, RB, R³, G³, B³, RG², RB², GR², GB², BR², BG², RGB,
/// R⁴, G⁴, B⁴, R³G, R³B, G³R, G³B, B³R, B³G, R²G², R²B², G²B², R²GB, G²RB, B²RG`.
pub fn expand(rgb: [f64; 3]) -> [f64; NUM_FEATURES] {
    let [r, g, b] = rgb;
    let (r2, g2, b2) = (r * r, g * g, b * b);
    [
        r,
        g,
        b,
        r2,
        g2,
        b2,
        r * g,
        g * b,
        r * b,
        r2 * r,
        g2 * g,
        b2 * b,
        r * g2,
        r * b2,
        g * r2,
        g * b2,
        b * r2,
        b * g2,
        r * g * b,
        r2 * r2,
        g2 * g2,
        b2 * b2,
        r2 * r * g,
        r2 * r * b,
        g2 * g * r,
        g2 * g * b,
        b2 * b * r,
        b2 * b * g,
        r2 * g2,
        r2 * b2,
        g2 * b2,
        r2 * g * b,
        g2 * r * b,
        b2 * r * g,
    ]
}

/// Feature vector with an optional leading constant.
pub fn features(rgb: [f64; 3], bias: bool) -> Vec<f64> {
    let e = expand(rgb);
    let mut v = Vec::with_capacity(NUM_FEATURES + 1);
    if bias {
        v.push(1.0);
    }
    v.extend_from_slice(&e);
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "lambda")]
pub enum Ridge {
    Off,
    Fixed(f64),
    /// `1e-8 · trace(XᵀX)`.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub split_seed: u64,
    pub train_frac: f64,
    pub bias: bool,
    pub ridge: Ridge,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            split_seed: 0,
            train_frac: 0.8,
            bias: false,
            ridge: Ridge::Off,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingStats {
    pub m: usize,
    pub rmse_train: f64,
    pub rmse_test: f64,
    /// Infinite for a singular design; JSON stores that as null.
    #[serde(deserialize_with = "null_as_infinity")]
    pub condition_number: f64,
    pub ridge_lambda: f64,
    pub split_seed: u64,
    pub train_frac: f64,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

fn null_as_infinity<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

/// A trained k × p transform.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionModel {
    grid: WavelengthGrid,
    bias: bool,
    /// Row-major k × p.
    coefficients: Vec<f64>,
    stats: TrainingStats,
    rgb_min: [f64; 3],
    rgb_max: [f64; 3],
}

/// Deterministic shuffle split: Fisher–Yates with a seeded ChaCha stream.
pub fn split_indices(m: usize, train_frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_train = ((m as f64) * train_frac).round() as usize;
    let test = idx.split_off(n_train.min(m));
    (idx, test)
}

fn rmse(residual_sq_sum: f64, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        (residual_sq_sum / count as f64).sqrt()
    }
}

/// Least squares through `X P = Q R`: solve `R z = Qᵀ Y`, then undo the pivoting.
fn lstsq(x: DMatrix<f64>, y: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let qr = x.col_piv_qr();
    let mut z = qr.r().solve_upper_triangular(&qr.q().tr_mul(y))?;
    qr.p().inv_permute_rows(&mut z);
    Some(z)
}

/// Solves `min_T ‖Y − X̂ Tᵀ‖²` on the training split of `line`.
pub fn train(line: &SampledLine, opts: &TrainOptions) -> Result<RegressionModel> {
    if !(opts.train_frac > 0.0 && opts.train_frac <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_frac must be in (0, 1], got {}",
            opts.train_frac
        )));
    }
    let p = NUM_FEATURES + usize::from(opts.bias);
    let (train_idx, test_idx) = split_indices(line.len(), opts.train_frac, opts.split_seed);
    if train_idx.len() < p {
        return Err(Error::InsufficientSamples {
            needed: p,
            got: train_idx.len(),
        });
    }
    let k = line.grid().count();
    let n = train_idx.len();
    let x = DMatrix::from_fn(n, p, |r, c| features(line.rgb()[train_idx[r]], opts.bias)[c]);
    let y = DMatrix::from_fn(n, k, |r, c| line.spectrum_row(train_idx[r])[c]);

    let sv = x.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };

    let mut ridge_lambda = 0.0;
    let tt = if condition > CONDITION_LIMIT {
        ridge_lambda = match opts.ridge {
            Ridge::Off => return Err(Error::RankDeficient { condition }),
            Ridge::Fixed(l) if l > 0.0 => l,
            Ridge::Fixed(l) => {
                return Err(Error::InvalidArgument(format!("ridge lambda must be positive, got {l}")))
            }
            Ridge::Auto => 1e-8 * x.iter().map(|v| v * v).sum::<f64>(),
        };
        // augmented least squares [X; √λ I] Tᵀ = [Y; 0]
        let s = ridge_lambda.sqrt();
        let xa = DMatrix::from_fn(n + p, p, |r, c| {
            if r < n {
                x[(r, c)]
            } else if r - n == c {
                s
            } else {
                0.0
            }
        });
        let ya = DMatrix::from_fn(n + p, k, |r, c| if r < n { y[(r, c)] } else { 0.0 });
        lstsq(xa, &ya).ok_or(Error::RankDeficient { condition })?
    } else {
        lstsq(x.clone(), &y).ok_or(Error::RankDeficient { condition })?
    };
    // tt is p × k; store T as k × p row-major
    let mut coefficients = vec![0.0; k * p];
    for i in 0..k {
        for j in 0..p {
            coefficients[i * p + j] = tt[(j, i)];
        }
    }
    if let Some(index) = coefficients.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }

    let mut rgb_min = [f64::INFINITY; 3];
    let mut rgb_max = [f64::NEG_INFINITY; 3];
    for &i in &train_idx {
        for c in 0..3 {
            rgb_min[c] = rgb_min[c].min(line.rgb()[i][c]);
            rgb_max[c] = rgb_max[c].max(line.rgb()[i][c]);
        }
    }
    let mut model = RegressionModel {
        grid: *line.grid(),
        bias: opts.bias,
        coefficients,
        stats: TrainingStats {
            m: line.len(),
            rmse_train: 0.0,
            rmse_test: 0.0,
            condition_number: condition,
            ridge_lambda,
            split_seed: opts.split_seed,
            train_frac: opts.train_frac,
            train_indices: train_idx,
            test_indices: test_idx,
        },
        rgb_min,
        rgb_max,
    };
    let sse = |idx: &[usize]| -> f64 {
        idx.iter()
            .map(|&i| {
                let pred = model.predict_values(line.rgb()[i]);
                pred.iter()
                    .zip(line.spectrum_row(i))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .sum()
    };
    let rmse_train = rmse(sse(&model.stats.train_indices), model.stats.train_indices.len() * k);
    let rmse_test = rmse(sse(&model.stats.test_indices), model.stats.test_indices.len() * k);
    model.stats.rmse_train = rmse_train;
    model.stats.rmse_test = rmse_test;
    Ok(model)
}

/// Per-pixel recovery result with the interpolation-validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub cube: Hypercube,
    /// True where a pixel lies outside the RGB range seen in training.
    pub out_of_range: Vec<bool>,
}

impl RegressionModel {
    /// Builds a model from an explicit k × p row-major transform.
    pub fn from_transform(grid: WavelengthGrid, bias: bool, coefficients: Vec<f64>) -> Result<Self> {
        let p = NUM_FEATURES + usize::from(bias);
        if coefficients.len() != grid.count() * p {
            return Err(Error::Dimension(format!(
                "transform has {} values, expected {} x {p}",
                coefficients.len(),
                grid.count()
            )));
        }
        if let Some(index) = coefficients.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            grid,
            bias,
            coefficients,
            stats: TrainingStats {
                m: 0,
                rmse_train: 0.0,
                rmse_test: 0.0,
                condition_number: f64::NAN,
                ridge_lambda: 0.0,
                split_seed: 0,
                train_frac: 0.0,
                train_indices: Vec::new(),
                test_indices: Vec::new(),
            },
            rgb_min: [0.0; 3],
            rgb_max: [1.0; 3],
        })
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn num_features(&self) -> usize {
        NUM_FEATURES + usize::from(self.bias)
    }

    pub fn bias(&self) -> bool {
        self.bias
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn stats(&self) -> &TrainingStats {
        &self.stats
    }

    pub fn rgb_range(&self) -> ([f64; 3], [f64; 3]) {
        (self.rgb_min, self.rgb_max)
    }

    fn predict_into(&self, rgb: [f64; 3], out: &mut [f64]) {
        let x = features(rgb, self.bias);
        let p = x.len();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.coefficients[i * p..(i + 1) * p];
            *o = row.iter().zip(&x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn predict_values(&self, rgb: [f64; 3]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.count()];
        self.predict_into(rgb, &mut out);
        out
    }

    /// `y = T · expand(rgb)`, unclamped.
    pub fn predict_spectrum(&self, rgb: [f64; 3]) -> Result<Spectrum> {
        Spectrum::new(self.grid, self.predict_values(rgb))
    }

    pub fn in_range(&self, rgb: [f64; 3]) -> bool {
        (0..3).all(|c| rgb[c] >= self.rgb_min[c] && rgb[c] <= self.rgb_max[c])
    }

    /// Applies the transform to every pixel of `img`.
    pub fn recover_cube(&self, img: &RgbImage) -> Result<Recovery> {
        let k = self.grid.count();
        let cols = img.cols();
        let mut data = vec![0.0; img.len() * k];
        data.par_chunks_mut(cols * k).enumerate().for_each(|(r, row)| {
            for c in 0..cols {
                self.predict_into(img.pixel(r, c), &mut row[c * k..(c + 1) * k]);
            }
        });
        let out_of_range = img.pixels().map(|p| !self.in_range(p)).collect();
        Ok(Recovery {
            cube: Hypercube::new(img.rows(), img.cols(), self.grid, data)?,
            out_of_range,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let header = ModelHeader {
            format: MODEL_FORMAT.into(),
            wl_start_nm: self.grid.start_nm(),
            wl_step_nm: self.grid.step_nm(),
            wl_count: self.grid.count(),
            p: self.num_features(),
            bias: self.bias,
            rgb_min: self.rgb_min,
            rgb_max: self.rgb_max,
            stats: self.stats.clone(),
        };
        write_framed(path, &header, &self.coefficients)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (h, coefficients): (ModelHeader, _) =
            read_framed(path, |h: &ModelHeader| h.wl_count * h.p)?;
        if h.format != MODEL_FORMAT {
            return Err(Error::MalformedHeader(format!("not a regression model: {:?}", h.format)));
        }
        if h.p != NUM_FEATURES + usize::from(h.bias) {
            return Err(Error::MalformedHeader(format!("p = {} inconsistent with bias", h.p)));
        }
        let grid = WavelengthGrid::new(h.wl_start_nm, h.wl_step_nm, h.wl_count)
            .map_err(|e| Error::MalformedHeader(e.to_string()))?;
        Ok(Self {
            grid,
            bias: h.bias,
            coefficients,
            stats: h.stats,
            rgb_min: h.rgb_min,
            rgb_max: h.rgb_max,
        })
    }
}

const MODEL_FORMAT: &str = "spectracube-regression-v1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelHeader {
    format: String,
    wl_start_nm: f64,
    wl_step_nm: f64,
    wl_count: usize,
    p: usize,
    bias: bool,
    rgb_min: [f64; 3],
    rgb_max: [f64; 3],
    stats: TrainingStats,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn expand_examples() {
        assert_eq!(expand([0.0; 3]), [0.0; NUM_FEATURES]);
        assert_eq!(expand([1.0; 3]), [1.0; NUM_FEATURES]);
        let e = expand([1.0, 0.0, 0.0]);
        // R, R², R³, R⁴
        let ones = [0usize, 3, 9, 19];
        for (i, v) in e.iter().enumerate() {
            assert_eq!(*v, if ones.contains(&i) { 1.0 } else { 0.0 }, "term {i}");
        }
    }

    #[test]
    fn exponent_table_matches_expand() {
        let rgb = [0.3, 0.7, 1.9];
        let e = expand(rgb);
        for i in 0..NUM_FEATURES {
            let [a, b, c] = FEATURE_EXPONENTS[i];
            let want = rgb[0].powi(a as i32) * rgb[1].powi(b as i32) * rgb[2].powi(c as i32);
            assert!((e[i] - want).abs() < 1e-14, "term {i}");
            assert_eq!(a + b + c, FEATURE_DEGREES[i]);
        }
    }

    #[test]
    fn split_sizes() {
        let (tr, te) = split_indices(750, 0.8, 42);
        assert_eq!((tr.len(), te.len()), (600, 150));
        let mut all: Vec<_> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..750).collect::<Vec<_>>());
        assert_eq!(split_indices(750, 0.8, 42), (tr, te));
    }

    fn synthetic_line(m: usize, k: usize, seed: u64) -> (SampledLine, Vec<f64>) {
        let grid = WavelengthGrid::new(400.0, 2.0, k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t0: Vec<f64> = (0..k * NUM_FEATURES).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rgb: Vec<[f64; 3]> = (0..m)
            .map(|_| std::array::from_fn(|_| rng.random_range(0.0..1.0)))
            .collect();
        // brute-force Y = T0 · X̂
        let spectra: Vec<f64> = rgb
            .iter()
            .flat_map(|&p| {
                let x = expand(p);
                let t0 = &t0;
                (0..k).map(move |i| (0..NUM_FEATURES).map(|j| t0[i * NUM_FEATURES + j] * x[j]).sum::<f64>())
            })
            .collect();
        let coords = (0..m).map(|i| (i, 0)).collect();
        (SampledLine::new(grid, coords, rgb, spectra).unwrap(), t0)
    }

    #[test]
    fn exact_linear_data_is_recovered() {
        let (line, t0) = synthetic_line(200, 12, 9);
        let model = train(&line, &TrainOptions::default()).unwrap();
        assert!(model.stats().rmse_train < 1e-10, "{}", model.stats().rmse_train);
        assert!(model.stats().rmse_test < 1e-9);
        for (a, b) in model.coefficients().iter().zip(&t0) {
            assert!((a - b).abs() < 1e-6);
        }
        for &i in &model.stats().train_indices {
            let s = model.predict_spectrum(line.rgb()[i]).unwrap();
            for (a, b) in s.values().iter().zip(line.spectrum_row(i)) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (line, _) = synthetic_line(120, 5, 10);
        let opts = TrainOptions { split_seed: 77, ..Default::default() };
        assert_eq!(train(&line, &opts).unwrap(), train(&line, &opts).unwrap());
    }

    #[test]
    fn identical_rows_are_rank_deficient() {
        let grid = WavelengthGrid::new(400.0, 1.0, 3).unwrap();
        let m = 60;
        let line = SampledLine::new(
            grid,
            (0..m).map(|i| (i, 0)).collect(),
            vec![[0.3, 0.5, 0.2]; m],
            vec![0.5; m * 3],
        )
        .unwrap();
        assert!(matches!(
            train(&line, &TrainOptions::default()),
            Err(Error::RankDeficient { .. })
        ));
        let ridge = TrainOptions { ridge: Ridge::Auto, ..Default::default() };
        let model = train(&line, &ridge).unwrap();
        assert!(model.stats().ridge_lambda > 0.0);
        let s = model.predict_values([0.3, 0.5, 0.2]);
        assert!(s.iter().all(|v| (v - 0.5).abs() < 1e-3), "{s:?}");
    }

    #[test]
    fn insufficient_rows() {
        let (line, _) = synthetic_line(40, 3, 1);
        assert!(matches!(
            train(&line, &TrainOptions::default()),
            Err(Error::InsufficientSamples { needed: 34, got: 32 })
        ));
    }

    #[test]
    fn zero_input_and_zero_transform() {
        let (line, _) = synthetic_line(100, 4, 2);
        let model = train(&line, &TrainOptions::default()).unwrap();
        assert!(model.predict_values([0.0; 3]).iter().all(|&v| v == 0.0));
        let zero = RegressionModel::from_transform(*line.grid(), false, vec![0.0; 4 * 34]).unwrap();
        assert!(zero.predict_values([0.4, 0.1, 0.9]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_image_recovers_constant_field() {
        let (line, _) = synthetic_line(100, 6, 3);
        let model = train(&line, &TrainOptions::default()).unwrap();
        let v = [0.2, 0.6, 0.4];
        let img = RgbImage::uniform(3, 4, v).unwrap();
        let rec = model.recover_cube(&img).unwrap();
        let want = model.predict_values(v);
        for r in 0..3 {
            for c in 0..4 {
                assert_eq!(rec.cube.pixel(r, c), want.as_slice());
            }
        }
    }

    #[test]
    fn model_file_round_trip() {
        let (line, _) = synthetic_line(100, 6, 4);
        let model = train(&line, &TrainOptions { bias: true, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.hsl");
        model.save(&p).unwrap();
        assert_eq!(RegressionModel::load(&p).unwrap(), model);
    }
}
