//! Synthetic scenes with known tissue parameters, rendered to cubes and RGB.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::{Hypercube, RgbImage, SampledLine};
use crate::error::{Error, Result};
use crate::grid::{interp_linear, WavelengthGrid};
use crate::io::{parse_table, read_table, Table};
use crate::tissue::{forward_reflectance, ExtinctionTable, HemodynamicMaps, TissueParams};

/// Default sensor band centers (nm) and width.
pub const DEFAULT_BAND_CENTERS_NM: [f64; 3] = [610.0, 540.0, 460.0];
pub const DEFAULT_BAND_SIGMA_NM: f64 = 30.0;

/// Per-channel spectral response on a grid, each row normalized to unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityFunction {
    grid: WavelengthGrid,
    rows: [Vec<f64>; 3],
    source: String,
}

impl SensitivityFunction {
    /// Builds from R, G, B rows. Rows are rescaled to unit sum.
    pub fn from_rows(grid: WavelengthGrid, rows: [Vec<f64>; 3], source: impl Into<String>) -> Result<Self> {
        let mut rows = rows;
        for (c, row) in rows.iter_mut().enumerate() {
            if row.len() != grid.count() {
                return Err(Error::Dimension(format!(
                    "sensitivity row {c} has {} entries for {} bands",
                    row.len(),
                    grid.count()
                )));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "sensitivity row {c} must be finite and non-negative"
                )));
            }
            let sum: f64 = row.iter().sum();
            if sum <= 0.0 {
                return Err(Error::InvalidArgument(format!("sensitivity row {c} sums to zero")));
            }
            row.iter_mut().for_each(|v| *v /= sum);
        }
        Ok(Self {
            grid,
            rows,
            source: source.into(),
        })
    }

    /// Gaussian bands at 610/540/460 nm (R, G, B) with σ = 30 nm.
    pub fn default_for(grid: WavelengthGrid) -> Result<Self> {
        let band = |center: f64| {
            grid.wavelengths()
                .iter()
                .map(|w| (-0.5 * ((w - center) / DEFAULT_BAND_SIGMA_NM).powi(2)).exp())
                .collect::<Vec<_>>()
        };
        let [r, g, b] = DEFAULT_BAND_CENTERS_NM;
        Self::from_rows(grid, [band(r), band(g), band(b)], "builtin:gaussian-610-540-460")
    }

    /// Each channel responds only at the band nearest the given wavelength.
    pub fn delta(grid: WavelengthGrid, wavelengths_nm: [f64; 3]) -> Result<Self> {
        let mut rows = [vec![0.0; grid.count()], vec![0.0; grid.count()], vec![0.0; grid.count()]];
        for (row, wl) in rows.iter_mut().zip(wavelengths_nm) {
            row[grid.nearest_index(wl)?] = 1.0;
        }
        Self::from_rows(grid, rows, "delta")
    }

    /// Resamples `r`, `g`, `b` columns onto `grid`; zero outside the table.
    pub fn from_table(table: &Table, grid: WavelengthGrid, source: impl Into<String>) -> Result<Self> {
        let column = |name: &str| -> Result<Vec<f64>> {
            let ys = table
                .column(name)
                .ok_or_else(|| Error::Csv(format!("sensitivity table lacks column {name}")))?;
            Ok(grid
                .wavelengths()
                .into_iter()
                .map(|wl| interp_linear(&table.wavelengths, ys, wl).unwrap_or(0.0))
                .collect())
        };
        Self::from_rows(grid, [column("r")?, column("g")?, column("b")?], source)
    }

    pub fn load(path: impl AsRef<Path>, grid: WavelengthGrid) -> Result<Self> {
        let path = path.as_ref();
        Self::from_table(&read_table(path)?, grid, path.display().to_string())
    }

    /// Parses CSV text with a `wavelength_nm,r,g,b` header.
    pub fn parse(text: &str, grid: WavelengthGrid) -> Result<Self> {
        Self::from_table(&parse_table(text.as_bytes(), "sensitivity")?, grid, "inline")
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn row(&self, channel: usize) -> &[f64] {
        &self.rows[channel]
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// `S y` for one spectrum.
    pub fn apply(&self, spectrum: &[f64]) -> [f64; 3] {
        let dot = |row: &[f64]| row.iter().zip(spectrum).map(|(a, b)| a * b).sum::<f64>();
        [dot(&self.rows[0]), dot(&self.rows[1]), dot(&self.rows[2])]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Rows,
    #[default]
    Cols,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Blob {
    pub row: f64,
    pub col: f64,
    pub sigma_px: f64,
    pub amplitude: f64,
}

fn default_waves() -> usize {
    6
}

/// Value of one parameter as a function of pixel and time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    Constant {
        value: f64,
    },
    /// Linear ramp from the first to the last row or column.
    Gradient {
        from: f64,
        to: f64,
        #[serde(default)]
        axis: Axis,
    },
    /// Background plus Gaussian bumps.
    Blobs {
        background: f64,
        blobs: Vec<Blob>,
    },
    /// Smooth random field: `mean + amplitude · (mean of `waves` plane sines)`.
    Texture {
        mean: f64,
        amplitude: f64,
        scale_px: f64,
        #[serde(default = "default_waves")]
        waves: usize,
        seed: u64,
    },
    /// Sigmoid edge between `low` (behind the front) and `high`, advancing along columns.
    DepletionFront {
        high: f64,
        low: f64,
        start_col: f64,
        cols_per_frame: f64,
        width_px: f64,
    },
    /// `final_value + (initial − final_value) · exp(−t / tau_s)`.
    Decay {
        initial: f64,
        final_value: f64,
        tau_s: f64,
    },
    /// `mean + amplitude · sin(2π f t + phase)`.
    Oscillation {
        mean: f64,
        amplitude: f64,
        freq_hz: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    Sum {
        terms: Vec<Generator>,
    },
}

/// Plane waves precomputed for a texture generator.
#[derive(Debug, Clone)]
struct Waves(Vec<(f64, f64, f64)>);

impl Waves {
    fn new(scale_px: f64, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self(
            (0..count)
                .map(|_| {
                    let theta = rng.random_range(0.0..PI);
                    let wavelength = scale_px * rng.random_range(1.0..2.0);
                    let k = 2.0 * PI / wavelength;
                    (k * theta.cos(), k * theta.sin(), rng.random_range(0.0..2.0 * PI))
                })
                .collect(),
        )
    }

    fn eval(&self, row: f64, col: f64) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.iter().map(|(kx, ky, ph)| (kx * col + ky * row + ph).sin()).sum::<f64>() / self.0.len() as f64
    }
}

/// A generator with its random state resolved.
#[derive(Debug, Clone)]
enum Compiled {
    Leaf(Generator),
    Texture { mean: f64, amplitude: f64, waves: Waves },
    Sum(Vec<Compiled>),
}

impl Compiled {
    fn new(g: &Generator) -> Result<Self> {
        Ok(match g {
            Generator::Texture {
                mean,
                amplitude,
                scale_px,
                waves,
                seed,
            } => {
                if !(*scale_px > 0.0) {
                    return Err(Error::InvalidArgument("texture scale_px must be positive".into()));
                }
                Compiled::Texture {
                    mean: *mean,
                    amplitude: *amplitude,
                    waves: Waves::new(*scale_px, *waves, *seed),
                }
            }
            Generator::Sum { terms } => Compiled::Sum(terms.iter().map(Compiled::new).collect::<Result<_>>()?),
            Generator::DepletionFront { width_px, .. } if !(*width_px > 0.0) => {
                return Err(Error::InvalidArgument("depletion front width_px must be positive".into()))
            }
            Generator::Decay { tau_s, .. } if !(*tau_s > 0.0) => {
                return Err(Error::InvalidArgument("decay tau_s must be positive".into()))
            }
            Generator::Blobs { blobs, .. } if blobs.iter().any(|b| !(b.sigma_px > 0.0)) => {
                return Err(Error::InvalidArgument("blob sigma_px must be positive".into()))
            }
            other => Compiled::Leaf(other.clone()),
        })
    }

    fn eval(&self, row: usize, col: usize, rows: usize, cols: usize, frame: usize, t: f64) -> f64 {
        let (r, c) = (row as f64, col as f64);
        match self {
            Compiled::Texture { mean, amplitude, waves } => mean + amplitude * waves.eval(r, c),
            Compiled::Sum(terms) => terms.iter().map(|g| g.eval(row, col, rows, cols, frame, t)).sum(),
            Compiled::Leaf(g) => match g {
                Generator::Constant { value } => *value,
                Generator::Gradient { from, to, axis } => {
                    let (pos, n) = match axis {
                        Axis::Rows => (r, rows),
                        Axis::Cols => (c, cols),
                    };
                    let u = if n > 1 { pos / (n - 1) as f64 } else { 0.0 };
                    from + (to - from) * u
                }
                Generator::Blobs { background, blobs } => {
                    background
                        + blobs
                            .iter()
                            .map(|b| {
                                let d2 = (r - b.row).powi(2) + (c - b.col).powi(2);
                                b.amplitude * (-0.5 * d2 / (b.sigma_px * b.sigma_px)).exp()
                            })
                            .sum::<f64>()
                }
                Generator::DepletionFront {
                    high,
                    low,
                    start_col,
                    cols_per_frame,
                    width_px,
                } => {
                    let front = start_col + cols_per_frame * frame as f64;
                    low + (high - low) / (1.0 + (-(c - front) / width_px).exp())
                }
                Generator::Decay {
                    initial,
                    final_value,
                    tau_s,
                } => final_value + (initial - final_value) * (-t / tau_s).exp(),
                Generator::Oscillation {
                    mean,
                    amplitude,
                    freq_hz,
                    phase_rad,
                } => mean + amplitude * (2.0 * PI * freq_hz * t + phase_rad).sin(),
                Generator::Texture { .. } | Generator::Sum { .. } => unreachable!("compiled separately"),
            },
        }
    }
}

fn default_frames() -> usize {
    1
}

fn default_interval() -> f64 {
    1.0 / 960.0
}

fn constant(value: f64) -> Generator {
    Generator::Constant { value }
}

fn default_b1() -> Generator {
    constant(TissueParams::default().b1)
}
fn default_b2() -> Generator {
    constant(TissueParams::default().b2)
}
fn default_b3() -> Generator {
    constant(TissueParams::default().b3)
}
fn default_b4() -> Generator {
    constant(TissueParams::default().b4)
}
fn default_b5() -> Generator {
    constant(TissueParams::default().b5)
}
fn default_lipid() -> Generator {
    constant(0.0)
}

/// Scripted tissue-parameter fields over space and time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneScript {
    pub rows: usize,
    pub cols: usize,
    #[serde(default = "default_frames")]
    pub frames: usize,
    #[serde(default = "default_interval")]
    pub frame_interval_s: f64,
    #[serde(default = "default_b1")]
    pub b1: Generator,
    #[serde(default = "default_b2")]
    pub b2: Generator,
    #[serde(default = "default_b3")]
    pub b3: Generator,
    #[serde(default = "default_b4")]
    pub b4: Generator,
    #[serde(default = "default_b5")]
    pub b5: Generator,
    #[serde(default = "default_lipid")]
    pub lipid: Generator,
}

/// A script ready for evaluation.
#[derive(Debug, Clone)]
pub struct Scene {
    script: SceneScript,
    fields: [Compiled; 6],
}

impl SceneScript {
    /// Static scene with fixed scattering whose every row and column spans the
    /// whole HbT and saturation range.
    pub fn standard(rows: usize, cols: usize) -> Self {
        let scale = rows.min(cols) as f64 / 5.0;
        let tex = |mean: f64, amplitude: f64, seed: u64| Generator::Texture {
            mean,
            amplitude,
            scale_px: scale,
            waves: 6,
            seed,
        };
        Self {
            rows,
            cols,
            frames: 1,
            frame_interval_s: default_interval(),
            // fixed scattering with a mild illumination-like scale
            b1: tex(0.4, 0.05, 11),
            b2: constant(-1.2),
            b3: constant(0.025),
            b4: tex(1.2, 0.8, 14),
            b5: tex(0.65, 0.3, 15),
            lipid: constant(0.0),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks dimensions and that every pixel of every frame has valid parameters.
    pub fn compile(&self) -> Result<Scene> {
        if self.rows == 0 || self.cols == 0 || self.frames == 0 {
            return Err(Error::Dimension("scene needs positive rows, cols and frames".into()));
        }
        if !(self.frame_interval_s > 0.0 && self.frame_interval_s.is_finite()) {
            return Err(Error::InvalidArgument("frame_interval_s must be positive".into()));
        }
        let fields = [
            Compiled::new(&self.b1)?,
            Compiled::new(&self.b2)?,
            Compiled::new(&self.b3)?,
            Compiled::new(&self.b4)?,
            Compiled::new(&self.b5)?,
            Compiled::new(&self.lipid)?,
        ];
        let scene = Scene {
            script: self.clone(),
            fields,
        };
        for f in 0..self.frames {
            scene.params(f)?;
        }
        Ok(scene)
    }
}

impl Scene {
    pub fn script(&self) -> &SceneScript {
        &self.script
    }

    pub fn time_s(&self, frame: usize) -> f64 {
        frame as f64 * self.script.frame_interval_s
    }

    pub fn params_at(&self, row: usize, col: usize, frame: usize) -> TissueParams {
        let t = self.time_s(frame);
        let (rows, cols) = (self.script.rows, self.script.cols);
        let v = |i: usize| self.fields[i].eval(row, col, rows, cols, frame, t);
        TissueParams {
            b1: v(0),
            b2: v(1),
            b3: v(2),
            b4: v(3),
            b5: v(4),
            lipid: v(5),
        }
    }

    /// Row-major parameters of one frame, each validated.
    pub fn params(&self, frame: usize) -> Result<Vec<TissueParams>> {
        if frame >= self.script.frames {
            return Err(Error::InvalidArgument(format!(
                "frame {frame} outside 0..{}",
                self.script.frames
            )));
        }
        let cols = self.script.cols;
        (0..self.script.rows * cols)
            .into_par_iter()
            .map(|i| {
                let p = self.params_at(i / cols, i % cols, frame);
                p.validate().map_err(|e| {
                    Error::InvalidArgument(format!("pixel ({}, {}) frame {frame}: {e}", i / cols, i % cols))
                })?;
                Ok(p)
            })
            .collect()
    }

    /// Ground-truth hemodynamic maps of one frame.
    pub fn truth_maps(&self, frame: usize) -> Result<HemodynamicMaps> {
        let params = self.params(frame)?;
        Ok(HemodynamicMaps {
            rows: self.script.rows,
            cols: self.script.cols,
            hbo2: params.iter().map(|p| p.hbo2()).collect(),
            hb: params.iter().map(|p| p.hb()).collect(),
            spo2: params.iter().map(|p| p.b5).collect(),
            rss: vec![0.0; params.len()],
            converged: vec![true; params.len()],
            params: Some(params),
        })
    }

    /// Forward reflectance of every pixel.
    pub fn render_cube(&self, ext: &ExtinctionTable, frame: usize) -> Result<Hypercube> {
        if self.script.lipid != constant(0.0) && ext.lipid().is_none() {
            return Err(Error::InvalidArgument("scene uses lipid but the table has no eps_lipid column".into()));
        }
        let params = self.params(frame)?;
        let cols = self.script.cols;
        Hypercube::from_fn(self.script.rows, cols, *ext.grid(), |r, c| {
            forward_reflectance(&params[r * cols + c], ext).into_values()
        })
    }
}

/// Affine map `offset + gain · x` applied before clipping to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RgbScale {
    pub offset: f64,
    pub gain: f64,
}

impl RgbScale {
    pub const IDENTITY: RgbScale = RgbScale { offset: 0.0, gain: 1.0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ScaleMode {
    /// Gain `1 / max` when the noiseless maximum exceeds 1, otherwise identity.
    #[default]
    Auto,
    Fixed(RgbScale),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    pub noise_sigma: f64,
    pub seed: u64,
    pub scale: ScaleMode,
    /// Quantize to this many bits per channel.
    pub bits: Option<u8>,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            noise_sigma: 0.0,
            seed: 0,
            scale: ScaleMode::Auto,
            bits: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub image: RgbImage,
    pub scale: RgbScale,
    /// Channel values clipped into `[0, 1]`.
    pub clipped: usize,
}

/// `S y` for every pixel, before noise and scaling.
pub fn project_rgb(cube: &Hypercube, s: &SensitivityFunction) -> Result<Vec<f64>> {
    if cube.grid() != s.grid() {
        return Err(Error::Dimension(format!(
            "cube grid {:?} differs from sensitivity grid {:?}",
            cube.grid(),
            s.grid()
        )));
    }
    let cols = cube.cols();
    Ok((0..cube.rows() * cols)
        .into_par_iter()
        .flat_map_iter(|i| s.apply(cube.pixel(i / cols, i % cols)))
        .collect())
}

/// Renders `x = S y + e`, then scales, clips and optionally quantizes.
pub fn render_rgb(cube: &Hypercube, s: &SensitivityFunction, opts: &RenderOptions) -> Result<Rendered> {
    if !(opts.noise_sigma >= 0.0 && opts.noise_sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise sigma {} must be >= 0", opts.noise_sigma)));
    }
    if let Some(b) = opts.bits {
        if !(1..=16).contains(&b) {
            return Err(Error::InvalidArgument(format!("bit depth {b} outside 1..=16")));
        }
    }
    let mut x = project_rgb(cube, s)?;
    let scale = match opts.scale {
        ScaleMode::Fixed(sc) => sc,
        ScaleMode::Auto => {
            let max = x.iter().copied().fold(0.0, f64::max);
            if max > 1.0 {
                RgbScale { offset: 0.0, gain: 1.0 / max }
            } else {
                RgbScale::IDENTITY
            }
        }
    };
    if opts.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, opts.noise_sigma).expect("valid sigma");
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for v in x.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    let mut clipped = 0;
    let levels = opts.bits.map(|b| ((1u32 << b) - 1) as f64);
    for v in x.iter_mut() {
        let y = scale.offset + scale.gain * *v;
        if !(0.0..=1.0).contains(&y) {
            clipped += 1;
        }
        let y = y.clamp(0.0, 1.0);
        *v = match levels {
            Some(l) => (y * l).round() / l,
            None => y,
        };
    }
    let mut image = RgbImage::new(cube.rows(), cube.cols(), x)?;
    if let Some(b) = opts.bits {
        image = image.with_bit_depth(b);
    }
    Ok(Rendered { image, scale, clipped })
}

/// Pairs the RGB values and spectra of the pixels at `coords`.
pub fn extract_points(cube: &Hypercube, rgb: &RgbImage, coords: &[(usize, usize)]) -> Result<SampledLine> {
    if cube.rows() != rgb.rows() || cube.cols() != rgb.cols() {
        return Err(Error::Dimension(format!(
            "cube is {}x{}, image {}x{}",
            cube.rows(),
            cube.cols(),
            rgb.rows(),
            rgb.cols()
        )));
    }
    if let Some(&(r, c)) = coords.iter().find(|(r, c)| *r >= cube.rows() || *c >= cube.cols()) {
        return Err(Error::InvalidArgument(format!("pixel ({r}, {c}) outside the image")));
    }
    let rgb_rows = coords.iter().map(|&(r, c)| rgb.pixel(r, c)).collect();
    let spectra = coords.iter().flat_map(|&(r, c)| cube.pixel(r, c).iter().copied()).collect();
    SampledLine::new(*cube.grid(), coords.to_vec(), rgb_rows, spectra)
}

/// The full column `col` as a sampled line.
pub fn extract_line(cube: &Hypercube, rgb: &RgbImage, col: usize) -> Result<SampledLine> {
    if col >= cube.cols() {
        return Err(Error::InvalidArgument(format!("column {col} outside 0..{}", cube.cols())));
    }
    let coords: Vec<_> = (0..cube.rows()).map(|r| (r, col)).collect();
    extract_points(cube, rgb, &coords)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> WavelengthGrid {
        WavelengthGrid::new(380.0, 5.0, 69).unwrap()
    }

    fn ext() -> ExtinctionTable {
        ExtinctionTable::default_for(grid()).unwrap()
    }

    #[test]
    fn default_sensitivity_rows_sum_to_one() {
        let s = SensitivityFunction::default_for(grid()).unwrap();
        for c in 0..3 {
            assert!((s.row(c).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(s.row(c).iter().all(|v| *v >= 0.0));
        }
        // R peaks near 610 nm
        let peak = s.row(0).iter().enumerate().fold((0, 0.0), |m, (i, &v)| if v > m.1 { (i, v) } else { m }).0;
        assert_eq!(grid().wavelength(peak), 610.0);
    }

    #[test]
    fn sensitivity_rejects_bad_rows() {
        let g = WavelengthGrid::new(400.0, 10.0, 3).unwrap();
        assert!(SensitivityFunction::from_rows(g, [vec![1.0; 3], vec![0.0; 3], vec![1.0; 3]], "t").is_err());
        assert!(SensitivityFunction::from_rows(g, [vec![1.0; 3], vec![-1.0, 2.0, 0.0], vec![1.0; 3]], "t").is_err());
        assert!(SensitivityFunction::from_rows(g, [vec![1.0; 2], vec![1.0; 3], vec![1.0; 3]], "t").is_err());
    }

    #[test]
    fn sensitivity_csv_is_zero_outside_table() {
        let s = SensitivityFunction::parse("wavelength_nm,r,g,b\n400,1,0,0\n420,1,1,1\n440,0,1,1\n", grid()).unwrap();
        assert_eq!(s.row(0)[0], 0.0);
        assert!(s.row(1).iter().sum::<f64>() > 0.99);
    }

    #[test]
    fn constant_scene_gives_uniform_cube() {
        let script = SceneScript {
            rows: 3,
            cols: 4,
            ..SceneScript::from_json(r#"{"rows":3,"cols":4}"#).unwrap()
        };
        let scene = script.compile().unwrap();
        let cube = scene.render_cube(&ext(), 0).unwrap();
        let want = forward_reflectance(&TissueParams::default(), &ext());
        for r in 0..3 {
            for c in 0..4 {
                assert_eq!(cube.pixel(r, c), want.values());
            }
        }
    }

    #[test]
    fn script_json_round_trip_and_unknown_keys() {
        let script = SceneScript::standard(10, 12);
        let back = SceneScript::from_json(&script.to_json().unwrap()).unwrap();
        assert_eq!(script, back);
        assert!(SceneScript::from_json(r#"{"rows":3,"cols":4,"b6":{"kind":"constant","value":1}}"#).is_err());
        let g: Generator = serde_json::from_str(r#"{"kind":"gradient","from":0,"to":1}"#).unwrap();
        assert_eq!(g, Generator::Gradient { from: 0.0, to: 1.0, axis: Axis::Cols });
    }

    #[test]
    fn out_of_bounds_script_is_rejected() {
        let mut s = SceneScript::from_json(r#"{"rows":2,"cols":5}"#).unwrap();
        s.b5 = Generator::Gradient { from: 0.5, to: 1.2, axis: Axis::Cols };
        assert!(s.compile().is_err());
    }

    #[test]
    fn gradient_and_dynamic_generators() {
        let mut s = SceneScript::from_json(r#"{"rows":2,"cols":5,"frames":10,"frame_interval_s":0.5}"#).unwrap();
        s.b5 = Generator::Gradient { from: 0.0, to: 1.0, axis: Axis::Cols };
        s.b4 = Generator::Decay { initial: 2.0, final_value: 1.0, tau_s: 1.0 };
        s.b1 = Generator::Oscillation { mean: 0.5, amplitude: 0.1, freq_hz: 0.5, phase_rad: 0.0 };
        let scene = s.compile().unwrap();
        assert_eq!(scene.params_at(1, 0, 0).b5, 0.0);
        assert_eq!(scene.params_at(1, 4, 0).b5, 1.0);
        assert!((scene.params_at(0, 2, 0).b5 - 0.5).abs() < 1e-15);
        assert!((scene.params_at(0, 0, 2).b4 - (1.0 + (-1.0f64).exp())).abs() < 1e-12);
        // t = 0.5 s at 0.5 Hz: quarter period
        assert!((scene.params_at(0, 0, 1).b1 - 0.6).abs() < 1e-12);
    }

    #[test]
    fn depletion_front_advances() {
        let mut s = SceneScript::from_json(r#"{"rows":1,"cols":40,"frames":20}"#).unwrap();
        s.b5 = Generator::DepletionFront {
            high: 0.9,
            low: 0.2,
            start_col: 5.0,
            cols_per_frame: 1.0,
            width_px: 0.5,
        };
        let scene = s.compile().unwrap();
        for f in [0usize, 7, 15] {
            let front = 5 + f;
            assert!(scene.params_at(0, front - 3, f).b5 < 0.25);
            assert!(scene.params_at(0, front + 3, f).b5 > 0.85);
        }
    }

    #[test]
    fn texture_stays_within_amplitude() {
        let scene = SceneScript::standard(40, 30).compile().unwrap();
        let p = scene.params(0).unwrap();
        assert!(p.iter().all(|q| (0.35..=0.95).contains(&q.b5) && (0.4..=2.0).contains(&q.b4)));
        let lo = p.iter().map(|q| q.b5).fold(1.0, f64::min);
        let hi = p.iter().map(|q| q.b5).fold(0.0, f64::max);
        assert!(hi - lo > 0.2, "texture too flat: {lo}..{hi}");
    }

    #[test]
    fn delta_sensitivity_reads_cube_values() {
        let scene = SceneScript::standard(4, 5).compile().unwrap();
        let cube = scene.render_cube(&ext(), 0).unwrap();
        let s = SensitivityFunction::delta(grid(), [600.0, 550.0, 450.0]).unwrap();
        let out = render_rgb(&cube, &s, &RenderOptions { scale: ScaleMode::Fixed(RgbScale::IDENTITY), ..Default::default() }).unwrap();
        let g = grid();
        let idx = [600.0, 550.0, 450.0].map(|w| g.nearest_index(w).unwrap());
        for r in 0..4 {
            for c in 0..5 {
                let px = out.image.pixel(r, c);
                for ch in 0..3 {
                    assert_eq!(px[ch], cube.pixel(r, c)[idx[ch]].clamp(0.0, 1.0));
                }
            }
        }
    }

    #[test]
    fn projection_is_linear() {
        let scene = SceneScript::standard(3, 3).compile().unwrap();
        let cube = scene.render_cube(&ext(), 0).unwrap();
        let scaled = Hypercube::new(3, 3, grid(), cube.data().iter().map(|v| 2.5 * v).collect()).unwrap();
        let s = SensitivityFunction::default_for(grid()).unwrap();
        let a = project_rgb(&cube, &s).unwrap();
        let b = project_rgb(&scaled, &s).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((2.5 * x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn render_is_deterministic_and_quantizes() {
        let scene = SceneScript::standard(6, 6).compile().unwrap();
        let cube = scene.render_cube(&ext(), 0).unwrap();
        let s = SensitivityFunction::default_for(grid()).unwrap();
        let opts = RenderOptions { noise_sigma: 0.01, seed: 9, bits: Some(10), ..Default::default() };
        let a = render_rgb(&cube, &s, &opts).unwrap();
        let b = render_rgb(&cube, &s, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.image.bit_depth_origin(), Some(10));
        assert!(a.image.data().iter().all(|v| (v * 1023.0 - (v * 1023.0).round()).abs() < 1e-9));
        let c = render_rgb(&cube, &s, &RenderOptions { seed: 10, ..opts }).unwrap();
        assert_ne!(a.image, c.image);
    }

    #[test]
    fn extract_line_matches_cube_and_image() {
        let scene = SceneScript::standard(7, 5).compile().unwrap();
        let cube = scene.render_cube(&ext(), 0).unwrap();
        let s = SensitivityFunction::default_for(grid()).unwrap();
        let img = render_rgb(&cube, &s, &RenderOptions::default()).unwrap().image;
        let line = extract_line(&cube, &img, 2).unwrap();
        assert_eq!(line.len(), 7);
        for i in 0..7 {
            assert_eq!(line.spectrum_row(i), cube.pixel(i, 2));
            assert_eq!(line.rgb()[i], img.pixel(i, 2));
        }
        assert!(extract_line(&cube, &img, 5).is_err());
    }
}
