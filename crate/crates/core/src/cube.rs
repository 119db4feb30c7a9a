//! In-memory containers: hypercubes, RGB images and sampled lines.

use crate::error::{Error, Result};
use crate::grid::{Spectrum, WavelengthGrid};

/// A rows × cols × k cube of spectral values.
///
/// Stored pixel-interleaved (each pixel's spectrum is contiguous); the file
/// container is band-sequential and the conversion happens at I/O time.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypercube {
    rows: usize,
    cols: usize,
    grid: WavelengthGrid,
    data: Vec<f64>,
    plane_names: Option<Vec<String>>,
}

impl Hypercube {
    pub fn new(rows: usize, cols: usize, grid: WavelengthGrid, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("cube must have positive rows and cols".into()));
        }
        let expected = rows * cols * grid.count();
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "cube data has {} values, expected {rows}x{cols}x{} = {expected}",
                data.len(),
                grid.count()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            rows,
            cols,
            grid,
            data,
            plane_names: None,
        })
    }

    pub fn zeros(rows: usize, cols: usize, grid: WavelengthGrid) -> Result<Self> {
        Self::new(rows, cols, grid, vec![0.0; rows * cols * grid.count()])
    }

    /// Builds a cube by evaluating `f(row, col)` for every pixel spectrum.
    pub fn from_fn<F>(rows: usize, cols: usize, grid: WavelengthGrid, f: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> Vec<f64> + Sync,
    {
        use rayon::prelude::*;
        let k = grid.count();
        let mut data = vec![0.0; rows * cols * k];
        data.par_chunks_mut(cols * k).enumerate().for_each(|(r, row)| {
            for c in 0..cols {
                let s = f(r, c);
                row[c * k..(c + 1) * k].copy_from_slice(&s[..k]);
            }
        });
        Self::new(rows, cols, grid, data)
    }

    /// Attaches names to the planes (used for parameter maps).
    pub fn with_plane_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.grid.count() {
            return Err(Error::Dimension(format!(
                "{} plane names for {} planes",
                names.len(),
                self.grid.count()
            )));
        }
        self.plane_names = Some(names);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bands(&self) -> usize {
        self.grid.count()
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn plane_names(&self) -> Option<&[String]> {
        self.plane_names.as_deref()
    }

    /// Pixel-interleaved data, `((row * cols) + col) * k + band`.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let k = self.bands();
        let start = (row * self.cols + col) * k;
        &self.data[start..start + k]
    }

    pub fn spectrum(&self, row: usize, col: usize) -> Spectrum {
        Spectrum::new(self.grid, self.pixel(row, col).to_vec()).expect("cube invariants")
    }

    /// Row-major copy of band `index`.
    pub fn plane(&self, index: usize) -> Vec<f64> {
        let k = self.bands();
        self.data.iter().skip(index).step_by(k).copied().collect()
    }

    /// Plane at the grid wavelength nearest `wavelength_nm` (ties toward the lower wavelength).
    pub fn slice_plane(&self, wavelength_nm: f64) -> Result<Vec<f64>> {
        let idx = self.grid.nearest_index(wavelength_nm)?;
        Ok(self.plane(idx))
    }

    /// Plane by name, for cubes carrying plane names.
    pub fn named_plane(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.plane_names.as_ref()?.iter().position(|n| n == name)?;
        Some(self.plane(idx))
    }

    /// Every `step`-th row and column, starting at (0, 0).
    pub fn decimate(&self, step: usize) -> Hypercube {
        let step = step.max(1);
        let rows = self.rows.div_ceil(step);
        let cols = self.cols.div_ceil(step);
        let k = self.bands();
        let mut data = Vec::with_capacity(rows * cols * k);
        for r in (0..self.rows).step_by(step) {
            for c in (0..self.cols).step_by(step) {
                data.extend_from_slice(self.pixel(r, c));
            }
        }
        Hypercube {
            rows,
            cols,
            grid: self.grid,
            data,
            plane_names: self.plane_names.clone(),
        }
    }
}

/// Per-pixel R, G, B values normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    bit_depth_origin: Option<u8>,
}

impl RgbImage {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("image must have positive rows and cols".into()));
        }
        if data.len() != rows * cols * 3 {
            return Err(Error::Dimension(format!(
                "image data has {} values, expected {rows}x{cols}x3",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if let Some(index) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(format!(
                "channel value {} at element {index} outside [0, 1]",
                data[index]
            )));
        }
        Ok(Self {
            rows,
            cols,
            data,
            bit_depth_origin: None,
        })
    }

    /// Clamps every value into `[0, 1]` before validating.
    pub fn from_clamped(rows: usize, cols: usize, mut data: Vec<f64>) -> Result<Self> {
        for v in &mut data {
            if v.is_finite() {
                *v = v.clamp(0.0, 1.0);
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn uniform(rows: usize, cols: usize, rgb: [f64; 3]) -> Result<Self> {
        let data = (0..rows * cols).flat_map(|_| rgb).collect();
        Self::new(rows, cols, data)
    }

    pub fn with_bit_depth(mut self, bits: u8) -> Self {
        self.bit_depth_origin = Some(bits);
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bit_depth_origin(&self) -> Option<u8> {
        self.bit_depth_origin
    }

    /// Interleaved `[r, g, b, r, g, b, ...]`, row-major.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        let i = (row * self.cols + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(3).copied().collect()
    }

    pub fn decimate(&self, step: usize) -> RgbImage {
        let step = step.max(1);
        let mut data = Vec::new();
        for r in (0..self.rows).step_by(step) {
            for c in (0..self.cols).step_by(step) {
                data.extend_from_slice(&self.pixel(r, c));
            }
        }
        RgbImage {
            rows: self.rows.div_ceil(step),
            cols: self.cols.div_ceil(step),
            data,
            bit_depth_origin: self.bit_depth_origin,
        }
    }
}

/// Co-registered RGB values and spectra along a sampled set of pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledLine {
    grid: WavelengthGrid,
    coords: Vec<(usize, usize)>,
    rgb: Vec<[f64; 3]>,
    spectra: Vec<f64>,
}

impl SampledLine {
    pub fn new(
        grid: WavelengthGrid,
        coords: Vec<(usize, usize)>,
        rgb: Vec<[f64; 3]>,
        spectra: Vec<f64>,
    ) -> Result<Self> {
        let m = coords.len();
        if m == 0 {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        if rgb.len() != m || spectra.len() != m * grid.count() {
            return Err(Error::Dimension(format!(
                "line with {m} coords has {} rgb rows and {} spectral values (k = {})",
                rgb.len(),
                spectra.len(),
                grid.count()
            )));
        }
        if let Some(index) = rgb.iter().flatten().chain(&spectra).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            grid,
            coords,
            rgb,
            spectra,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn coords(&self) -> &[(usize, usize)] {
        &self.coords
    }

    pub fn rgb(&self) -> &[[f64; 3]] {
        &self.rgb
    }

    pub fn spectra(&self) -> &[f64] {
        &self.spectra
    }

    pub fn spectrum_row(&self, i: usize) -> &[f64] {
        let k = self.grid.count();
        &self.spectra[i * k..(i + 1) * k]
    }

    /// Concatenates lines sharing a grid.
    pub fn concat(lines: &[SampledLine]) -> Result<SampledLine> {
        let first = lines
            .first()
            .ok_or(Error::InsufficientSamples { needed: 1, got: 0 })?;
        let mut coords = Vec::new();
        let mut rgb = Vec::new();
        let mut spectra = Vec::new();
        for l in lines {
            if l.grid != first.grid {
                return Err(Error::Dimension("lines have different wavelength grids".into()));
            }
            coords.extend_from_slice(&l.coords);
            rgb.extend_from_slice(&l.rgb);
            spectra.extend_from_slice(&l.spectra);
        }
        SampledLine::new(first.grid, coords, rgb, spectra)
    }

    /// Subset by row indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> SampledLine {
        let coords = indices.iter().map(|&i| self.coords[i]).collect();
        let rgb = indices.iter().map(|&i| self.rgb[i]).collect();
        let spectra = indices
            .iter()
            .flat_map(|&i| self.spectrum_row(i).iter().copied())
            .collect();
        SampledLine {
            grid: self.grid,
            coords,
            rgb,
            spectra,
        }
    }
}
