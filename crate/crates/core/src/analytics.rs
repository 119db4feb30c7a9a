//! Validation metrics and hemodynamic time-series analysis.

use std::f64::consts::PI;
use std::ops::Range;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cube::{Hypercube, RgbImage};
use crate::error::{Error, Result};
use crate::grid::Spectrum;
use crate::tissue::HemodynamicMaps;

/// Spectral angle in radians between two equally long vectors.
pub fn sam_values(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("spectra of length {} and {}", a.len(), b.len())));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let saa: f64 = a.iter().map(|x| x * x).sum();
    let sbb: f64 = b.iter().map(|x| x * x).sum();
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    // ‖a‖‖b‖, exact when the norms agree
    let denom = if saa == sbb { saa } else { saa.sqrt() * sbb.sqrt() };
    Ok((dot / denom).clamp(-1.0, 1.0).acos())
}

pub fn sam(a: &Spectrum, b: &Spectrum) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::Dimension("spectra on different grids".into()));
    }
    sam_values(a.values(), b.values())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamMap {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub mean: f64,
    pub median: f64,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Per-pixel spectral angle over all bands.
pub fn sam_map(a: &Hypercube, b: &Hypercube) -> Result<SamMap> {
    sam_map_bands(a, b, 0..a.bands())
}

/// Per-pixel spectral angle restricted to a band range.
pub fn sam_map_bands(a: &Hypercube, b: &Hypercube, bands: Range<usize>) -> Result<SamMap> {
    if a.rows() != b.rows() || a.cols() != b.cols() || a.grid() != b.grid() {
        return Err(Error::Dimension(format!(
            "cubes {}x{}x{} and {}x{}x{}",
            a.rows(),
            a.cols(),
            a.bands(),
            b.rows(),
            b.cols(),
            b.bands()
        )));
    }
    if bands.end > a.bands() || bands.is_empty() {
        return Err(Error::InvalidArgument(format!("band range {bands:?} out of bounds")));
    }
    let values: Vec<f64> = (0..a.rows() * a.cols())
        .into_par_iter()
        .map(|i| {
            let (r, c) = (i / a.cols(), i % a.cols());
            sam_values(&a.pixel(r, c)[bands.clone()], &b.pixel(r, c)[bands.clone()])
        })
        .collect::<Result<_>>()?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(SamMap {
        rows: a.rows(),
        cols: a.cols(),
        median: median(&values),
        mean,
        values,
    })
}

pub const SSIM_O1: f64 = 0.01;
pub const SSIM_O2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimResult {
    pub value: f64,
    pub luminance: f64,
    pub contrast: f64,
    pub structure: f64,
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub o1: f64,
    pub o2: f64,
    pub h: f64,
}

/// Whole-image structural similarity with `V1 = (O1 H)²`, `V2 = (O2 H)²`, `V3 = V2 / 2`.
pub fn ssim(p: &[f64], q: &[f64], o1: f64, o2: f64, h: f64) -> Result<SsimResult> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if p.len() != q.len() {
        return Err(Error::Dimension(format!("images of {} and {} pixels", p.len(), q.len())));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("dynamic range must be positive, got {h}")));
    }
    if let Some(index) = p.iter().chain(q).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let n = p.len() as f64;
    let mp = p.iter().sum::<f64>() / n;
    let mq = q.iter().sum::<f64>() / n;
    let dof = (n - 1.0).max(1.0);
    let cov = |x: &[f64], mx: f64, y: &[f64], my: f64| {
        x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / dof
    };
    let vp = cov(p, mp, p, mp);
    let vq = cov(q, mq, q, mq);
    let vpq = cov(p, mp, q, mq);
    // σ_P σ_Q; written so that identical images give exactly σ²
    let sp_sq = if vp == vq { vp } else { (vp * vq).sqrt() };
    let v1 = (o1 * h).powi(2);
    let v2 = (o2 * h).powi(2);
    let v3 = v2 / 2.0;
    let luminance = (2.0 * mp * mq + v1) / (mp * mp + mq * mq + v1);
    let contrast = (2.0 * sp_sq + v2) / (vp + vq + v2);
    let structure = (vpq + v3) / (sp_sq + v3);
    Ok(SsimResult {
        value: luminance * contrast * structure,
        luminance,
        contrast,
        structure,
        v1,
        v2,
        v3,
        o1,
        o2,
        h,
    })
}

/// SSIM with default constants and `H` taken from the data range of the pair.
pub fn ssim_auto(p: &[f64], q: &[f64]) -> Result<SsimResult> {
    let (lo, hi) = p
        .iter()
        .chain(q)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    ssim(p, q, SSIM_O1, SSIM_O2, hi - lo)
}

/// Per-wavelength residual statistics with a normal-approximation 95 % interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualBand {
    pub m: usize,
    /// Mean of `truth − estimate`.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// `1.96 · std / √m`.
    pub half_width: Vec<f64>,
}

/// `truth` and `estimate` are `m × k`, row-major.
pub fn residual_band(truth: &[f64], estimate: &[f64], k: usize) -> Result<ResidualBand> {
    if truth.len() != estimate.len() || k == 0 || !truth.len().is_multiple_of(k) {
        return Err(Error::Dimension(format!(
            "truth {} and estimate {} values with k = {k}",
            truth.len(),
            estimate.len()
        )));
    }
    let m = truth.len() / k;
    if m < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: m });
    }
    let res: Vec<f64> = truth.iter().zip(estimate).map(|(t, e)| t - e).collect();
    let mut mean = vec![0.0; k];
    let mut std = vec![0.0; k];
    for j in 0..k {
        let mu = (0..m).map(|i| res[i * k + j]).sum::<f64>() / m as f64;
        let var = (0..m).map(|i| (res[i * k + j] - mu).powi(2)).sum::<f64>() / (m - 1) as f64;
        mean[j] = mu;
        std[j] = var.sqrt();
    }
    let half_width = std.iter().map(|s| 1.96 * s / (m as f64).sqrt()).collect();
    Ok(ResidualBand {
        m,
        mean,
        std,
        half_width,
    })
}

/// Inclusive per-channel `[min, max]` box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl ChannelBox {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|c| p[c] >= self.min[c] && p[c] <= self.max[c])
    }

    fn validate(&self) -> Result<()> {
        for c in 0..3 {
            let (lo, hi) = (self.min[c], self.max[c]);
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                return Err(Error::InvalidArgument(format!(
                    "channel {c} threshold [{lo}, {hi}] must satisfy 0 <= min <= max <= 1"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationThresholds {
    pub vessel: ChannelBox,
    pub avascular: ChannelBox,
}

impl Default for SegmentationThresholds {
    fn default() -> Self {
        Self {
            vessel: ChannelBox {
                min: [0.29, 0.14, 0.14],
                max: [1.0, 1.0, 1.0],
            },
            avascular: ChannelBox {
                min: [0.0, 0.0, 0.0],
                max: [0.29, 0.11, 0.13],
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationMask {
    pub rows: usize,
    pub cols: usize,
    pub vessel: Vec<bool>,
    pub avascular: Vec<bool>,
    pub thresholds: SegmentationThresholds,
}

impl SegmentationMask {
    /// Pixels in neither class.
    pub fn unclassified(&self) -> Vec<bool> {
        self.vessel.iter().zip(&self.avascular).map(|(v, a)| !v && !a).collect()
    }
}

pub fn segment_vessels(img: &RgbImage, thresholds: &SegmentationThresholds) -> Result<SegmentationMask> {
    thresholds.vessel.validate()?;
    thresholds.avascular.validate()?;
    Ok(SegmentationMask {
        rows: img.rows(),
        cols: img.cols(),
        vessel: img.pixels().map(|p| thresholds.vessel.contains(p)).collect(),
        avascular: img.pixels().map(|p| thresholds.avascular.contains(p)).collect(),
        thresholds: *thresholds,
    })
}

/// One biquad `b0 + b1 z⁻¹ + b2 z⁻²` over `1 + a1 z⁻¹ + a2 z⁻²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (self.a[0] + self.a[1] * z_inv + self.a[2] * z2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bandpass {
    pub sections: Vec<Biquad>,
    pub fs: f64,
    pub f_lo: f64,
    pub f_hi: f64,
    pub order: usize,
}

impl Bandpass {
    /// Digital Butterworth bandpass by bilinear transform with prewarped edges.
    pub fn butterworth(order: usize, f_lo: f64, f_hi: f64, fs: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("filter order must be at least 1".into()));
        }
        if !(f_lo > 0.0 && f_lo < f_hi) {
            return Err(Error::InvalidArgument(format!("need 0 < f_lo < f_hi, got {f_lo}, {f_hi}")));
        }
        if !(fs > 2.0 * f_hi) {
            return Err(Error::InvalidArgument(format!(
                "sampling rate {fs} Hz must exceed twice the upper edge {f_hi} Hz"
            )));
        }
        let k = 2.0 * fs;
        let w1 = k * (PI * f_lo / fs).tan();
        let w2 = k * (PI * f_hi / fs).tan();
        let w0_sq = w1 * w2;
        let bw = w2 - w1;
        let mut poles = Vec::with_capacity(2 * order);
        for i in 0..order {
            let theta = PI * (2 * i + order + 1) as f64 / (2 * order) as f64;
            let p = Complex64::from_polar(1.0, theta);
            // s² − p·bw·s + w0² = 0
            let pb = p * bw;
            let disc = (pb * pb - 4.0 * w0_sq).sqrt();
            for s in [(pb + disc) / 2.0, (pb - disc) / 2.0] {
                poles.push((k + s) / (k - s));
            }
        }
        // pair conjugates, then leftover reals
        let tol = 1e-9;
        let mut complex: Vec<Complex64> = poles.iter().copied().filter(|z| z.im > tol).collect();
        complex.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let mut reals: Vec<f64> = poles.iter().filter(|z| z.im.abs() <= tol).map(|z| z.re).collect();
        reals.sort_by(|a, b| a.total_cmp(b));
        let mut sections: Vec<Biquad> = complex
            .iter()
            .map(|z| Biquad {
                b: [1.0, 0.0, -1.0],
                a: [1.0, -2.0 * z.re, z.norm_sqr()],
            })
            .collect();
        for pair in reals.chunks(2) {
            let (r1, r2) = (pair[0], *pair.get(1).unwrap_or(&0.0));
            sections.push(Biquad {
                b: [1.0, 0.0, -1.0],
                a: [1.0, -(r1 + r2), r1 * r2],
            });
        }
        if sections.len() != order {
            return Err(Error::InvalidArgument("could not pair filter poles".into()));
        }
        let mut f = Self {
            sections,
            fs,
            f_lo,
            f_hi,
            order,
        };
        // unit gain at the center frequency
        let wc = 2.0 * (w0_sq.sqrt() / k).atan();
        let g = f.response_at_omega(wc).norm();
        for c in f.sections[0].b.iter_mut() {
            *c /= g;
        }
        Ok(f)
    }

    fn response_at_omega(&self, omega: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -omega);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    /// Complex frequency response at `f` Hz.
    pub fn response(&self, f: f64) -> Complex64 {
        self.response_at_omega(2.0 * PI * f / self.fs)
    }

    /// Analytic squared magnitude of the bilinear Butterworth bandpass at `f` Hz.
    pub fn analytic_gain_sq(&self, f: f64) -> f64 {
        let k = 2.0 * self.fs;
        let warp = |x: f64| k * (PI * x / self.fs).tan();
        let (w1, w2, w) = (warp(self.f_lo), warp(self.f_hi), warp(f));
        let x = (w * w - w1 * w2) / (w * (w2 - w1));
        1.0 / (1.0 + x.powi(2 * self.order as i32))
    }

    /// Single forward pass (transposed direct form II) with initial states.
    fn run(&self, x: &[f64], zi: &[[f64; 2]]) -> Vec<f64> {
        let mut y = x.to_vec();
        for (s, z0) in self.sections.iter().zip(zi) {
            let [b0, b1, b2] = s.b;
            let [_, a1, a2] = s.a;
            let (mut z1, mut z2) = (z0[0], z0[1]);
            for v in y.iter_mut() {
                let xin = *v;
                let out = b0 * xin + z1;
                z1 = b1 * xin - a1 * out + z2;
                z2 = b2 * xin - a2 * out;
                *v = out;
            }
        }
        y
    }

    /// Steady-state section states for a unit step input.
    fn step_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let dc = (s.b[0] + s.b[1] + s.b[2]) / (s.a[0] + s.a[1] + s.a[2]);
                let zi = [scale * (dc - s.b[0]), scale * (s.b[2] - s.a[2] * dc)];
                scale *= dc;
                zi
            })
            .collect()
    }

    /// Causal filtering from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        self.run(x, &vec![[0.0; 2]; self.sections.len()])
    }

    /// Zero-phase forward-backward filtering.
    ///
    /// The series is extended at both ends by mirror reflection of
    /// `min(n − 1, 3·fs/f_lo)` samples and each pass starts from the steady
    /// state for its first sample.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = x.len();
        if n <= 6 * self.order {
            return Err(Error::InsufficientSamples {
                needed: 6 * self.order + 1,
                got: n,
            });
        }
        let pad = ((3.0 * self.fs / self.f_lo).ceil() as usize).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| x[n - 1 - i]));
        let zi = self.step_states();
        let scaled = |v: f64| zi.iter().map(|z| [z[0] * v, z[1] * v]).collect::<Vec<_>>();
        let mut y = self.run(&ext, &scaled(ext[0]));
        y.reverse();
        let mut y = self.run(&y, &scaled(y[0]));
        y.reverse();
        Ok(y[pad..pad + n].to_vec())
    }
}

pub const DEFAULT_F_LO: f64 = 0.01;
pub const DEFAULT_F_HI: f64 = 0.1;
pub const DEFAULT_ORDER: usize = 3;

/// Zero-phase Butterworth bandpass of `series`.
pub fn bandpass(series: &[f64], fs: f64, f_lo: f64, f_hi: f64, order: usize) -> Result<Vec<f64>> {
    Bandpass::butterworth(order, f_lo, f_hi, fs)?.filtfilt(series)
}

/// Discrete analytic signal (FFT-based Hilbert transform).
pub fn analytic_signal(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (i, v) in buf.iter_mut().enumerate() {
        let h = if i == 0 || (n.is_multiple_of(2) && i == n / 2) {
            1.0
        } else if i < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *v *= h;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|v| v * scale).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMethod {
    #[default]
    Hilbert,
    /// Band-summed cross-spectrum.
    Xspec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseOptions {
    pub method: PhaseMethod,
    pub f_lo: f64,
    pub f_hi: f64,
    pub order: usize,
    /// Apply the bandpass before estimating phase.
    pub filter: bool,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        Self {
            method: PhaseMethod::Hilbert,
            f_lo: DEFAULT_F_LO,
            f_hi: DEFAULT_F_HI,
            order: DEFAULT_ORDER,
            filter: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    /// First series after filtering.
    pub delta_hbo2: Vec<f64>,
    /// Second series after filtering.
    pub delta_hb: Vec<f64>,
    /// Time-averaged phase of the first series relative to the second, in `[0, 360)`.
    pub phase_deg: f64,
    /// Mean resultant length in `[0, 1]`.
    pub magnitude: f64,
    pub method: PhaseMethod,
    /// Samples excluded at each end.
    pub edge_samples: usize,
    pub low_confidence: bool,
}

fn wrap_deg(rad: f64) -> f64 {
    let d = rad.to_degrees().rem_euclid(360.0);
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

/// Phase of `a` relative to `b`.
///
/// With the Hilbert method the per-sample phase differences are averaged on
/// the circle over the interior, excluding `min(1/f_lo s, 10 % of the series)`
/// at each end.
pub fn phase_difference(a: &[f64], b: &[f64], fs: f64, opts: &PhaseOptions) -> Result<PhaseReport> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("series of length {} and {}", a.len(), b.len())));
    }
    if a.len() < 10 {
        return Err(Error::InsufficientSamples { needed: 10, got: a.len() });
    }
    if let Some(index) = a.iter().chain(b).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let (fa, fb) = if opts.filter {
        let f = Bandpass::butterworth(opts.order, opts.f_lo, opts.f_hi, fs)?;
        (f.filtfilt(a)?, f.filtfilt(b)?)
    } else {
        (a.to_vec(), b.to_vec())
    };
    let n = fa.len();
    let edge = ((fs / opts.f_lo).round() as usize).min(n / 10);
    let (phase_deg, magnitude, low_confidence) = match opts.method {
        PhaseMethod::Hilbert => {
            let za = analytic_signal(&fa);
            let zb = analytic_signal(&fb);
            let interior = edge..n - edge;
            let rms = |z: &[Complex64]| {
                (z[interior.clone()].iter().map(|v| v.norm_sqr()).sum::<f64>() / interior.len() as f64).sqrt()
            };
            let (ra, rb) = (rms(&za), rms(&zb));
            let mut weak = 0usize;
            let mut acc = Complex64::new(0.0, 0.0);
            for i in interior.clone() {
                if za[i].norm() < 1e-3 * ra || zb[i].norm() < 1e-3 * rb {
                    weak += 1;
                }
                let d = za[i] * zb[i].conj();
                if d.norm() > 0.0 {
                    acc += d / d.norm();
                }
            }
            let mean = acc / interior.len() as f64;
            (wrap_deg(mean.arg()), mean.norm(), 2 * weak > interior.len())
        }
        PhaseMethod::Xspec => {
            let mut planner = FftPlanner::<f64>::new();
            let fft = planner.plan_fft_forward(n);
            let spectrum = |x: &[f64]| {
                let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                fft.process(&mut buf);
                buf
            };
            let (sa, sb) = (spectrum(&fa), spectrum(&fb));
            let mut acc = Complex64::new(0.0, 0.0);
            let mut total = 0.0;
            for i in 1..n.div_ceil(2) {
                let f = i as f64 * fs / n as f64;
                if f >= opts.f_lo && f <= opts.f_hi {
                    let c = sa[i] * sb[i].conj();
                    acc += c;
                    total += c.norm();
                }
            }
            let magnitude = if total > 0.0 { acc.norm() / total } else { 0.0 };
            (wrap_deg(acc.arg()), magnitude, total == 0.0)
        }
    };
    Ok(PhaseReport {
        delta_hbo2: fa,
        delta_hb: fb,
        phase_deg,
        magnitude,
        method: opts.method,
        edge_samples: edge,
        low_confidence,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiSeries {
    pub hbo2: Vec<f64>,
    pub hb: Vec<f64>,
    /// Series minus their temporal means.
    pub delta_hbo2: Vec<f64>,
    pub delta_hb: Vec<f64>,
}

/// Per-frame spatial means of HbO2 and Hb over `mask`.
pub fn roi_timeseries(frames: &[HemodynamicMaps], mask: &[bool]) -> Result<RoiSeries> {
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::InvalidArgument("empty region mask".into()));
    }
    let mut hbo2 = Vec::with_capacity(frames.len());
    let mut hb = Vec::with_capacity(frames.len());
    for f in frames {
        if f.hbo2.len() != mask.len() {
            return Err(Error::Dimension(format!(
                "frame has {} pixels, mask {}",
                f.hbo2.len(),
                mask.len()
            )));
        }
        let avg = |v: &[f64]| v.iter().zip(mask).filter(|(_, &m)| m).map(|(x, _)| x).sum::<f64>() / count as f64;
        hbo2.push(avg(&f.hbo2));
        hb.push(avg(&f.hb));
    }
    let centered = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len().max(1) as f64;
        v.iter().map(|x| x - m).collect::<Vec<_>>()
    };
    Ok(RoiSeries {
        delta_hbo2: centered(&hbo2),
        delta_hb: centered(&hb),
        hbo2,
        hb,
    })
}
