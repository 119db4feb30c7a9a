//! Wavelength grids and single spectra.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform, strictly increasing wavelength sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavelengthGrid {
    start_nm: f64,
    step_nm: f64,
    count: usize,
}

impl Default for WavelengthGrid {
    /// 380 nm to 720 nm at 1 nm.
    fn default() -> Self {
        Self {
            start_nm: 380.0,
            step_nm: 1.0,
            count: 341,
        }
    }
}

impl WavelengthGrid {
    pub fn new(start_nm: f64, step_nm: f64, count: usize) -> Result<Self> {
        if !start_nm.is_finite() || !step_nm.is_finite() {
            return Err(Error::InvalidGrid("start and step must be finite".into()));
        }
        if step_nm <= 0.0 {
            return Err(Error::InvalidGrid(format!("step must be positive, got {step_nm}")));
        }
        if count < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {count}")));
        }
        Ok(Self {
            start_nm,
            step_nm,
            count,
        })
    }

    /// Grid covering `[start_nm, end_nm]` inclusive at `step_nm`.
    pub fn spanning(start_nm: f64, end_nm: f64, step_nm: f64) -> Result<Self> {
        let n = ((end_nm - start_nm) / step_nm).round() as i64 + 1;
        if n < 2 {
            return Err(Error::InvalidGrid(format!(
                "range {start_nm}..{end_nm} at step {step_nm} has fewer than 2 points"
            )));
        }
        Self::new(start_nm, step_nm, n as usize)
    }

    pub fn start_nm(&self) -> f64 {
        self.start_nm
    }

    pub fn step_nm(&self) -> f64 {
        self.step_nm
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn end_nm(&self) -> f64 {
        self.wavelength(self.count - 1)
    }

    pub fn wavelength(&self, index: usize) -> f64 {
        self.start_nm + self.step_nm * index as f64
    }

    pub fn wavelengths(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.wavelength(i)).collect()
    }

    /// Index of the grid point nearest to `wavelength_nm`; exact midpoints go to the lower index.
    pub fn nearest_index(&self, wavelength_nm: f64) -> Result<usize> {
        let end = self.end_nm();
        if !(wavelength_nm >= self.start_nm && wavelength_nm <= end) {
            return Err(Error::WavelengthOutOfRange {
                requested: wavelength_nm,
                start: self.start_nm,
                end,
            });
        }
        let pos = (wavelength_nm - self.start_nm) / self.step_nm;
        let lower = pos.floor();
        let frac = pos - lower;
        let idx = if frac > 0.5 { lower + 1.0 } else { lower };
        Ok((idx as usize).min(self.count - 1))
    }

    /// Index range `[lo, hi]` of grid points inside the closed window.
    pub fn window_indices(&self, lo_nm: f64, hi_nm: f64) -> Result<std::ops::Range<usize>> {
        if !(lo_nm < hi_nm) {
            return Err(Error::InvalidArgument(format!(
                "empty window {lo_nm}..{hi_nm}"
            )));
        }
        let first = (0..self.count).find(|&i| self.wavelength(i) >= lo_nm - 1e-9);
        let last = (0..self.count).rev().find(|&i| self.wavelength(i) <= hi_nm + 1e-9);
        match (first, last) {
            (Some(a), Some(b)) if b >= a => Ok(a..b + 1),
            _ => Err(Error::WavelengthOutOfRange {
                requested: lo_nm,
                start: self.start_nm,
                end: self.end_nm(),
            }),
        }
    }
}

/// A spectrum sampled on a [`WavelengthGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: WavelengthGrid,
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(grid: WavelengthGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.count() {
            return Err(Error::Dimension(format!(
                "spectrum has {} values but grid has {} points",
                values.len(),
                grid.count()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Linear interpolation of `(xs, ys)` at `x`; `xs` must be increasing.
/// Returns `None` outside `[xs[0], xs[last]]`.
pub fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let n = xs.len();
    if n == 0 || x < xs[0] || x > xs[n - 1] {
        return None;
    }
    if n == 1 {
        return Some(ys[0]);
    }
    let hi = xs.partition_point(|&v| v < x).clamp(1, n - 1);
    let lo = hi - 1;
    let (x0, x1) = (xs[lo], xs[hi]);
    if x == x1 {
        return Some(ys[hi]);
    }
    let t = (x - x0) / (x1 - x0);
    Some(ys[lo] + t * (ys[hi] - ys[lo]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_covers_visible_range() {
        let g = WavelengthGrid::default();
        assert_eq!(g.count(), 341);
        assert_eq!(g.end_nm(), 720.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(WavelengthGrid::new(380.0, 0.0, 10).is_err());
        assert!(WavelengthGrid::new(380.0, -1.0, 10).is_err());
        assert!(WavelengthGrid::new(380.0, 1.0, 1).is_err());
    }

    #[test]
    fn nearest_index_rounding() {
        let g = WavelengthGrid::default();
        assert_eq!(g.nearest_index(550.0).unwrap(), 170);
        assert_eq!(g.nearest_index(550.4).unwrap(), 170);
        assert_eq!(g.nearest_index(550.5).unwrap(), 170);
        assert_eq!(g.nearest_index(550.6).unwrap(), 171);
        assert!(g.nearest_index(379.0).is_err());
        assert!(g.nearest_index(720.5).is_err());
    }

    #[test]
    fn window_indices_inclusive() {
        let g = WavelengthGrid::default();
        let w = g.window_indices(450.0, 650.0).unwrap();
        assert_eq!(w, 70..271);
        assert_eq!(w.len(), 201);
    }

    #[test]
    fn interp_matches_endpoints() {
        let xs = [1.0, 2.0, 4.0];
        let ys = [10.0, 20.0, 0.0];
        assert_eq!(interp_linear(&xs, &ys, 1.0), Some(10.0));
        assert_eq!(interp_linear(&xs, &ys, 4.0), Some(0.0));
        assert_eq!(interp_linear(&xs, &ys, 3.0), Some(10.0));
        assert_eq!(interp_linear(&xs, &ys, 0.5), None);
    }
}
