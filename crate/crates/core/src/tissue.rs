//! Empirical tissue reflectance model and its per-pixel inversion.
//!
//! ```text
//! I_R(λ) = [b1 (λ/λ0)^b2 + b3 (λ/λ0)^-4] · exp(−b4 (b5 ε_HbO2 + (1 − b5) ε_Hb) − lipid · ε_lipid)
//! ```
//!
//! with `λ0 = 800 nm`. Fitting runs Nelder–Mead on an unconstrained
//! reparameterization: `ln b1, b2, ln b3, ln b4, logit b5[, ln lipid]`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::Hypercube;
use crate::error::{Error, Result};
use crate::grid::{interp_linear, Spectrum, WavelengthGrid};
use crate::io::{parse_table, read_table, Table};
use crate::optim::{nelder_mead, NelderMeadOptions};

/// Reference wavelength of the scattering terms.
pub const LAMBDA0_NM: f64 = 800.0;

/// The extinction table shipped with the library (approximate hemoglobin curves).
pub const DEFAULT_EXTINCTION_CSV: &str = include_str!("../data/extinction_default.csv");

/// Absorption spectra resampled onto a working grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtinctionTable {
    grid: WavelengthGrid,
    hbo2: Vec<f64>,
    hb: Vec<f64>,
    lipid: Option<Vec<f64>>,
    source: String,
}

impl ExtinctionTable {
    /// Resamples `eps_hbo2`, `eps_hb` and optional `eps_lipid` columns onto `grid`.
    pub fn from_table(table: &Table, grid: WavelengthGrid, source: impl Into<String>) -> Result<Self> {
        let column = |name: &str| -> Result<Option<Vec<f64>>> {
            let Some(ys) = table.column(name) else {
                return Ok(None);
            };
            grid.wavelengths()
                .into_iter()
                .map(|wl| {
                    let v = interp_linear(&table.wavelengths, ys, wl).ok_or(
                        Error::WavelengthOutOfRange {
                            requested: wl,
                            start: table.wavelengths[0],
                            end: *table.wavelengths.last().unwrap_or(&f64::NAN),
                        },
                    )?;
                    if v > 0.0 {
                        Ok(v)
                    } else {
                        Err(Error::InvalidArgument(format!(
                            "{name} must be strictly positive, got {v} at {wl} nm"
                        )))
                    }
                })
                .collect::<Result<Vec<_>>>()
                .map(Some)
        };
        let missing = |n: &str| Error::Csv(format!("extinction table lacks column {n}"));
        Ok(Self {
            grid,
            hbo2: column("eps_hbo2")?.ok_or_else(|| missing("eps_hbo2"))?,
            hb: column("eps_hb")?.ok_or_else(|| missing("eps_hb"))?,
            lipid: column("eps_lipid")?,
            source: source.into(),
        })
    }

    pub fn load(path: impl AsRef<Path>, grid: WavelengthGrid) -> Result<Self> {
        let path = path.as_ref();
        Self::from_table(&read_table(path)?, grid, path.display().to_string())
    }

    /// The bundled default table resampled onto `grid`.
    pub fn default_for(grid: WavelengthGrid) -> Result<Self> {
        let t = parse_table(DEFAULT_EXTINCTION_CSV.as_bytes(), "extinction_default.csv")?;
        Self::from_table(&t, grid, "builtin:extinction_default.csv")
    }

    /// Builds a table from already grid-aligned vectors.
    pub fn from_vectors(
        grid: WavelengthGrid,
        hbo2: Vec<f64>,
        hb: Vec<f64>,
        lipid: Option<Vec<f64>>,
    ) -> Result<Self> {
        let k = grid.count();
        let all_ok = |v: &[f64]| v.len() == k && v.iter().all(|x| *x > 0.0 && x.is_finite());
        if !all_ok(&hbo2) || !all_ok(&hb) || lipid.as_deref().is_some_and(|l| !all_ok(l)) {
            return Err(Error::InvalidArgument(format!(
                "extinction vectors must have {k} strictly positive finite entries"
            )));
        }
        Ok(Self {
            grid,
            hbo2,
            hb,
            lipid,
            source: "vectors".into(),
        })
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn hbo2(&self) -> &[f64] {
        &self.hbo2
    }

    pub fn hb(&self) -> &[f64] {
        &self.hb
    }

    pub fn lipid(&self) -> Option<&[f64]> {
        self.lipid.as_deref()
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TissueParams {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub b5: f64,
    #[serde(default)]
    pub lipid: f64,
}

impl Default for TissueParams {
    fn default() -> Self {
        Self {
            b1: 0.5,
            b2: -1.0,
            b3: 0.1,
            b4: 1.0,
            b5: 0.7,
            lipid: 0.0,
        }
    }
}

impl TissueParams {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.b1, self.b2, self.b3, self.b4, self.b5, self.lipid];
        if let Some(index) = vals.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if self.b1 < 0.0 || self.b3 < 0.0 || self.b4 < 0.0 || self.lipid < 0.0 {
            return Err(Error::InvalidArgument("b1, b3, b4 and lipid must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.b5) {
            return Err(Error::InvalidArgument(format!("b5 = {} outside [0, 1]", self.b5)));
        }
        Ok(())
    }

    pub fn hbo2(&self) -> f64 {
        self.b4 * self.b5
    }

    pub fn hb(&self) -> f64 {
        self.b4 * (1.0 - self.b5)
    }
}

/// Per-wavelength constants of the forward model over a contiguous index range.
struct Kernel {
    ln_ratio: Vec<f64>,
    rayleigh: Vec<f64>,
    hbo2: Vec<f64>,
    hb: Vec<f64>,
    lipid: Vec<f64>,
}

impl Kernel {
    fn new(ext: &ExtinctionTable, range: std::ops::Range<usize>) -> Self {
        let wls: Vec<f64> = range.clone().map(|i| ext.grid.wavelength(i)).collect();
        Self {
            ln_ratio: wls.iter().map(|w| (w / LAMBDA0_NM).ln()).collect(),
            rayleigh: wls.iter().map(|w| (w / LAMBDA0_NM).powi(-4)).collect(),
            hbo2: ext.hbo2[range.clone()].to_vec(),
            hb: ext.hb[range.clone()].to_vec(),
            lipid: match &ext.lipid {
                Some(l) => l[range].to_vec(),
                None => vec![0.0; wls.len()],
            },
        }
    }

    #[inline]
    fn value(&self, p: &TissueParams, i: usize) -> f64 {
        let scat = p.b1 * (p.b2 * self.ln_ratio[i]).exp() + p.b3 * self.rayleigh[i];
        let mu = p.b4 * (p.b5 * self.hbo2[i] + (1.0 - p.b5) * self.hb[i]) + p.lipid * self.lipid[i];
        scat * (-mu).exp()
    }

    fn rss(&self, p: &TissueParams, target: &[f64]) -> f64 {
        target
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let d = t - self.value(p, i);
                d * d
            })
            .sum()
    }
}

/// Evaluates the reflectance model on the table's grid.
pub fn forward_reflectance(params: &TissueParams, ext: &ExtinctionTable) -> Spectrum {
    let k = Kernel::new(ext, 0..ext.grid.count());
    let values = (0..ext.grid.count()).map(|i| k.value(params, i)).collect();
    Spectrum::new(ext.grid, values).expect("finite model output for valid parameters")
}

/// `HbO2 / (HbO2 + Hb)`.
pub fn spo2(hbo2: f64, hb: f64) -> Result<f64> {
    if hbo2 < 0.0 || hb < 0.0 || !hbo2.is_finite() || !hb.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "concentrations must be finite and non-negative, got ({hbo2}, {hb})"
        )));
    }
    let total = hbo2 + hb;
    if total <= 0.0 {
        return Err(Error::UndefinedSaturation);
    }
    Ok(hbo2 / total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Fit window in nm; `None` uses the whole grid.
    pub window: Option<(f64, f64)>,
    /// Also fit the lipid absorption coefficient (needs an `eps_lipid` column).
    pub lipid: bool,
    pub init: TissueParams,
    pub tol_x: f64,
    pub tol_f: f64,
    pub max_iter: usize,
    /// Initial simplex offset in reparameterized coordinates.
    pub initial_step: f64,
    /// Offset used when warm-starting from a neighboring pixel.
    pub warm_step: f64,
    /// Extra Nelder–Mead runs restarted from the best point.
    pub restarts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            window: Some((450.0, 650.0)),
            lipid: false,
            init: TissueParams::default(),
            tol_x: 1e-8,
            tol_f: 1e-8,
            max_iter: 2000,
            initial_step: 0.3,
            warm_step: 0.05,
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TissueFit {
    pub params: TissueParams,
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub hbo2: f64,
    pub hb: f64,
    pub spo2: f64,
}

impl TissueFit {
    fn from_params(params: TissueParams, rss: f64, iterations: usize, converged: bool) -> Self {
        Self {
            params,
            rss,
            iterations,
            converged,
            hbo2: params.hbo2(),
            hb: params.hb(),
            spo2: params.b5,
        }
    }
}

const MIN_POSITIVE: f64 = 1e-12;

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-9, 1.0 - 1e-9);
    (p / (1.0 - p)).ln()
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn to_u(p: &TissueParams, lipid: bool) -> Vec<f64> {
    let mut u = vec![
        p.b1.max(MIN_POSITIVE).ln(),
        p.b2,
        p.b3.max(MIN_POSITIVE).ln(),
        p.b4.max(MIN_POSITIVE).ln(),
        logit(p.b5),
    ];
    if lipid {
        u.push(p.lipid.max(MIN_POSITIVE).ln());
    }
    u
}

fn from_u(u: &[f64]) -> TissueParams {
    TissueParams {
        b1: u[0].exp(),
        b2: u[1],
        b3: u[2].exp(),
        b4: u[3].exp(),
        b5: sigmoid(u[4]),
        lipid: u.get(5).map_or(0.0, |v| v.exp()),
    }
}

/// Prepared fitting problem for one table, window and option set.
pub struct Fitter<'a> {
    kernel: Kernel,
    range: std::ops::Range<usize>,
    opts: &'a FitOptions,
}

impl<'a> Fitter<'a> {
    pub fn new(ext: &ExtinctionTable, opts: &'a FitOptions) -> Result<Self> {
        if opts.lipid && ext.lipid.is_none() {
            return Err(Error::InvalidArgument(
                "lipid fitting requested but the extinction table has no eps_lipid column".into(),
            ));
        }
        opts.init.validate()?;
        let range = match opts.window {
            Some((lo, hi)) => ext.grid.window_indices(lo, hi)?,
            None => 0..ext.grid.count(),
        };
        if range.len() < 6 {
            return Err(Error::InsufficientSamples {
                needed: 6,
                got: range.len(),
            });
        }
        Ok(Self {
            kernel: Kernel::new(ext, range.clone()),
            range,
            opts,
        })
    }

    /// Fits a full-grid spectrum (values outside the window are ignored).
    pub fn fit(&self, spectrum: &[f64], init: &TissueParams, step: f64) -> Result<TissueFit> {
        let target = &spectrum[self.range.clone()];
        let lipid = self.opts.lipid;
        let mut init = *init;
        if !lipid {
            init.lipid = 0.0;
        }
        if target.iter().all(|&v| v == 0.0) {
            let rss = self.kernel.rss(&init, target);
            return Ok(TissueFit::from_params(init, rss, 0, false));
        }
        let objective = |u: &[f64]| self.kernel.rss(&from_u(u), target);
        let mut u = to_u(&init, lipid);
        let mut nm = NelderMeadOptions {
            tol_x: self.opts.tol_x,
            tol_f: self.opts.tol_f,
            max_iter: self.opts.max_iter,
            initial_step: vec![step; u.len()],
        };
        let mut best = nelder_mead(objective, &u, &nm)?;
        let mut iterations = best.iterations;
        for _ in 0..self.opts.restarts {
            u.clone_from(&best.x);
            nm.initial_step = vec![step.min(0.05); u.len()];
            let next = nelder_mead(objective, &u, &nm)?;
            iterations += next.iterations;
            let gain = best.f - next.f;
            let done = next.converged && gain <= self.opts.tol_f;
            if next.f <= best.f {
                best = next;
            }
            if done {
                break;
            }
        }
        Ok(TissueFit::from_params(from_u(&best.x), best.f, iterations, best.converged))
    }

    pub fn rss(&self, spectrum: &[f64], params: &TissueParams) -> f64 {
        self.kernel.rss(params, &spectrum[self.range.clone()])
    }

    pub fn window(&self) -> std::ops::Range<usize> {
        self.range.clone()
    }
}

/// Fits one spectrum starting from `init`.
pub fn fit_spectrum(
    spec: &Spectrum,
    ext: &ExtinctionTable,
    init: &TissueParams,
    opts: &FitOptions,
) -> Result<TissueFit> {
    if spec.grid() != ext.grid() {
        return Err(Error::Dimension("spectrum and extinction table grids differ".into()));
    }
    Fitter::new(ext, opts)?.fit(spec.values(), init, opts.initial_step)
}

/// Plane names used when maps are stored in a hypercube container.
pub const MAP_PLANES: [&str; 5] = ["hbo2", "hb", "spo2", "rss", "converged"];
/// Additional plane names holding fitted parameters.
pub const PARAM_PLANES: [&str; 6] = ["b1", "b2", "b3", "b4", "b5", "lipid"];

/// Per-pixel hemodynamic planes, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HemodynamicMaps {
    pub rows: usize,
    pub cols: usize,
    pub hbo2: Vec<f64>,
    pub hb: Vec<f64>,
    pub spo2: Vec<f64>,
    pub rss: Vec<f64>,
    pub converged: Vec<bool>,
    /// Fitted parameters when the maps come from model inversion.
    pub params: Option<Vec<TissueParams>>,
}

impl HemodynamicMaps {
    pub fn from_fits(rows: usize, cols: usize, fits: &[TissueFit]) -> Self {
        Self {
            rows,
            cols,
            hbo2: fits.iter().map(|f| f.hbo2).collect(),
            hb: fits.iter().map(|f| f.hb).collect(),
            spo2: fits.iter().map(|f| f.spo2).collect(),
            rss: fits.iter().map(|f| f.rss).collect(),
            converged: fits.iter().map(|f| f.converged).collect(),
            params: Some(fits.iter().map(|f| f.params).collect()),
        }
    }

    pub fn converged_fraction(&self) -> f64 {
        self.converged.iter().filter(|&&c| c).count() as f64 / self.converged.len().max(1) as f64
    }

    pub fn to_cube(&self) -> Result<Hypercube> {
        let mut planes: Vec<(&str, Vec<f64>)> = vec![
            ("hbo2", self.hbo2.clone()),
            ("hb", self.hb.clone()),
            ("spo2", self.spo2.clone()),
            ("rss", self.rss.clone()),
            ("converged", self.converged.iter().map(|&c| f64::from(u8::from(c))).collect()),
        ];
        if let Some(ps) = &self.params {
            let getters: [fn(&TissueParams) -> f64; 6] =
                [|p| p.b1, |p| p.b2, |p| p.b3, |p| p.b4, |p| p.b5, |p| p.lipid];
            for (name, g) in PARAM_PLANES.iter().zip(getters) {
                planes.push((name, ps.iter().map(g).collect()));
            }
        }
        let n = self.rows * self.cols;
        let bands = planes.len();
        let mut data = vec![0.0; n * bands];
        for (b, (_, plane)) in planes.iter().enumerate() {
            for (i, v) in plane.iter().enumerate() {
                data[i * bands + b] = *v;
            }
        }
        let grid = WavelengthGrid::new(0.0, 1.0, bands)?;
        Hypercube::new(self.rows, self.cols, grid, data)?
            .with_plane_names(planes.iter().map(|(n, _)| n.to_string()).collect())
    }

    pub fn from_cube(cube: &Hypercube) -> Result<Self> {
        let get = |name: &str| {
            cube.named_plane(name)
                .ok_or_else(|| Error::MalformedHeader(format!("map container lacks plane {name:?}")))
        };
        let params = if PARAM_PLANES.iter().all(|n| cube.named_plane(n).is_some()) {
            let p: Vec<Vec<f64>> = PARAM_PLANES.iter().map(|n| get(n)).collect::<Result<_>>()?;
            Some(
                (0..cube.rows() * cube.cols())
                    .map(|i| TissueParams {
                        b1: p[0][i],
                        b2: p[1][i],
                        b3: p[2][i],
                        b4: p[3][i],
                        b5: p[4][i],
                        lipid: p[5][i],
                    })
                    .collect(),
            )
        } else {
            None
        };
        Ok(Self {
            rows: cube.rows(),
            cols: cube.cols(),
            hbo2: get("hbo2")?,
            hb: get("hb")?,
            spo2: get("spo2")?,
            rss: get("rss")?,
            converged: get("converged")?.iter().map(|&v| v > 0.5).collect(),
            params,
        })
    }
}

/// Fits every pixel, warm-starting each from its left neighbor.
///
/// A warm start that fails to converge is retried from the global init and the
/// lower-residual result is kept. Rows are fitted in parallel.
pub fn fit_cube(cube: &Hypercube, ext: &ExtinctionTable, opts: &FitOptions) -> Result<HemodynamicMaps> {
    if cube.grid() != ext.grid() {
        return Err(Error::Dimension("cube and extinction table grids differ".into()));
    }
    let fitter = Fitter::new(ext, opts)?;
    let cold = |spec: &[f64]| -> TissueFit {
        fitter
            .fit(spec, &opts.init, opts.initial_step)
            .unwrap_or_else(|_| TissueFit::from_params(opts.init, f64::MAX, 0, false))
    };
    let rows: Vec<Vec<TissueFit>> = (0..cube.rows())
        .into_par_iter()
        .map(|r| {
            let mut out: Vec<TissueFit> = Vec::with_capacity(cube.cols());
            for c in 0..cube.cols() {
                let spec = cube.pixel(r, c);
                let fit = match out.last() {
                    Some(prev) if prev.converged => {
                        match fitter.fit(spec, &prev.params, opts.warm_step) {
                            Ok(f) if f.converged => f,
                            other => {
                                let fresh = cold(spec);
                                match other {
                                    Ok(f) if f.rss < fresh.rss => f,
                                    _ => fresh,
                                }
                            }
                        }
                    }
                    _ => cold(spec),
                };
                out.push(fit);
            }
            out
        })
        .collect();
    let fits: Vec<TissueFit> = rows.into_iter().flatten().collect();
    let mut maps = HemodynamicMaps::from_fits(cube.rows(), cube.cols(), &fits);
    // failed pixels carry a sentinel residual; keep the planes finite
    for v in maps.rss.iter_mut() {
        if *v == f64::MAX {
            *v = f64::from(f32::MAX);
        }
    }
    Ok(maps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ext() -> ExtinctionTable {
        ExtinctionTable::default_for(WavelengthGrid::default()).unwrap()
    }

    #[test]
    fn default_table_covers_default_grid() {
        let e = ext();
        assert_eq!(e.hbo2().len(), 341);
        assert!(e.lipid().is_some());
        // isosbestic-ish crossing near 500 nm, Soret peaks near 415 / 430 nm
        let g = e.grid();
        let i415 = g.nearest_index(415.0).unwrap();
        let i430 = g.nearest_index(430.0).unwrap();
        assert!(e.hbo2()[i415] > e.hb()[i415]);
        assert!(e.hb()[i430] > e.hbo2()[i430]);
    }

    #[test]
    fn pure_scattering_when_b4_is_zero() {
        let e = ext();
        let p = TissueParams { b1: 0.4, b2: -1.3, b3: 0.02, b4: 0.0, b5: 0.3, lipid: 0.0 };
        let s = forward_reflectance(&p, &e);
        for (i, v) in s.values().iter().enumerate() {
            let l = e.grid().wavelength(i) / LAMBDA0_NM;
            let want = 0.4 * l.powf(-1.3) + 0.02 * l.powi(-4);
            assert!((v - want).abs() < 1e-12 * want.max(1.0));
        }
        let flat = TissueParams { b1: 1.0, b2: 0.0, b3: 0.0, b4: 0.0, b5: 0.5, lipid: 0.0 };
        assert!(forward_reflectance(&flat, &e).values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn saturation_limits_select_one_chromophore() {
        let e = ext();
        let base = TissueParams { b1: 0.3, b2: -1.0, b3: 0.01, b4: 1.5, b5: 1.0, lipid: 0.0 };
        let s = forward_reflectance(&base, &e);
        for (i, v) in s.values().iter().enumerate() {
            let l = e.grid().wavelength(i) / LAMBDA0_NM;
            let scat = 0.3 * l.powf(-1.0) + 0.01 * l.powi(-4);
            assert!((v - scat * (-1.5 * e.hbo2()[i]).exp()).abs() < 1e-12);
        }
        let deoxy = TissueParams { b5: 0.0, ..base };
        let s = forward_reflectance(&deoxy, &e);
        for (i, v) in s.values().iter().enumerate() {
            let l = e.grid().wavelength(i) / LAMBDA0_NM;
            let scat = 0.3 * l.powf(-1.0) + 0.01 * l.powi(-4);
            assert!((v - scat * (-1.5 * e.hb()[i]).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn spo2_examples() {
        assert_eq!(spo2(0.7, 0.7).unwrap(), 0.5);
        assert_eq!(spo2(2.0, 0.0).unwrap(), 1.0);
        assert_eq!(spo2(0.0, 3.0).unwrap(), 0.0);
        assert!(matches!(spo2(0.0, 0.0), Err(Error::UndefinedSaturation)));
    }

    #[test]
    fn noiseless_self_inversion() {
        let e = ext();
        let truth = TissueParams { b1: 0.35, b2: -1.1, b3: 0.02, b4: 1.4, b5: 0.62, lipid: 0.0 };
        let s = forward_reflectance(&truth, &e);
        let init = TissueParams { b1: 0.42, b2: -0.9, b3: 0.016, b4: 1.12, b5: 0.74, lipid: 0.0 };
        let fit = fit_spectrum(&s, &e, &init, &FitOptions::default()).unwrap();
        assert!((fit.params.b4 - 1.4).abs() / 1.4 < 0.01, "{fit:?}");
        assert!((fit.params.b5 - 0.62).abs() < 0.01, "{fit:?}");
        assert!((fit.hbo2 + fit.hb - fit.params.b4).abs() < 1e-12);
    }

    #[test]
    fn zero_spectrum_is_flagged() {
        let e = ext();
        let s = Spectrum::new(*e.grid(), vec![0.0; 341]).unwrap();
        let fit = fit_spectrum(&s, &e, &TissueParams::default(), &FitOptions::default()).unwrap();
        assert!(!fit.converged);
    }

    #[test]
    fn lipid_requires_column() {
        let g = WavelengthGrid::new(450.0, 1.0, 10).unwrap();
        let e = ExtinctionTable::from_vectors(g, vec![1.0; 10], vec![2.0; 10], None).unwrap();
        let opts = FitOptions { lipid: true, window: None, ..Default::default() };
        assert!(Fitter::new(&e, &opts).is_err());
    }

    #[test]
    fn maps_container_round_trip() {
        let fits = vec![
            TissueFit::from_params(TissueParams::default(), 0.5, 10, true),
            TissueFit::from_params(TissueParams { b5: 0.25, ..Default::default() }, 0.25, 3, false),
        ];
        let maps = HemodynamicMaps::from_fits(1, 2, &fits);
        let back = HemodynamicMaps::from_cube(&maps.to_cube().unwrap()).unwrap();
        assert_eq!(back, maps);
    }
}
