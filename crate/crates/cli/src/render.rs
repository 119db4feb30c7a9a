//! False-color PNG rendering of map planes.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::{ImageBuffer, Rgb};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Colormap {
    Gray,
    Viridis,
    Hot,
}

impl FromStr for Colormap {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gray" | "grey" => Ok(Colormap::Gray),
            "viridis" => Ok(Colormap::Viridis),
            "hot" => Ok(Colormap::Hot),
            other => Err(format!("unknown colormap {other:?} (expected gray, viridis or hot)")),
        }
    }
}

impl fmt::Display for Colormap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Colormap::Gray => "gray",
            Colormap::Viridis => "viridis",
            Colormap::Hot => "hot",
        })
    }
}

// sampled at u = 0, 1/8, ..., 1
const VIRIDIS: [[f64; 3]; 9] = [
    [68.0, 1.0, 84.0],
    [71.0, 44.0, 122.0],
    [59.0, 81.0, 139.0],
    [44.0, 113.0, 142.0],
    [33.0, 144.0, 141.0],
    [39.0, 173.0, 129.0],
    [92.0, 200.0, 99.0],
    [170.0, 220.0, 50.0],
    [253.0, 231.0, 37.0],
];

impl Colormap {
    /// Color at `u` in `[0, 1]`.
    pub fn color(&self, u: f64) -> [u8; 3] {
        let u = if u.is_finite() { u.clamp(0.0, 1.0) } else { 0.0 };
        let rgb = match self {
            Colormap::Gray => [u * 255.0; 3],
            Colormap::Hot => [
                (3.0 * u).min(1.0) * 255.0,
                (3.0 * u - 1.0).clamp(0.0, 1.0) * 255.0,
                (3.0 * u - 2.0).clamp(0.0, 1.0) * 255.0,
            ],
            Colormap::Viridis => {
                let x = u * (VIRIDIS.len() - 1) as f64;
                let i = (x.floor() as usize).min(VIRIDIS.len() - 2);
                let t = x - i as f64;
                let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
                [0, 1, 2].map(|c| a[c] + t * (b[c] - a[c]))
            }
        };
        rgb.map(|v| v.round() as u8)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Colorbar {
    pub colormap: Colormap,
    pub lo: f64,
    pub hi: f64,
    pub rows: usize,
    pub cols: usize,
    /// Colors at evenly spaced values from `lo` to `hi`.
    pub ticks: Vec<(f64, [u8; 3])>,
}

pub fn colorbar_path(png: &Path) -> PathBuf {
    let mut s = png.as_os_str().to_owned();
    s.push(".colorbar.json");
    PathBuf::from(s)
}

/// Writes `plane` (row-major) as a PNG, mapping `[lo, hi]` linearly onto the
/// colormap and clamping outside values, plus a colorbar JSON sidecar.
pub fn render_map_png(
    plane: &[f64],
    rows: usize,
    cols: usize,
    colormap: Colormap,
    range: (f64, f64),
    path: &Path,
) -> spectracube::Result<Colorbar> {
    let (lo, hi) = range;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(spectracube::Error::InvalidArgument(format!("color range needs lo < hi, got ({lo}, {hi})")));
    }
    if plane.len() != rows * cols || rows == 0 {
        return Err(spectracube::Error::Dimension(format!(
            "plane of {} values for {rows}x{cols}",
            plane.len()
        )));
    }
    let img = ImageBuffer::from_fn(cols as u32, rows as u32, |x, y| {
        let v = plane[y as usize * cols + x as usize];
        Rgb(colormap.color((v - lo) / (hi - lo)))
    });
    img.save(path).map_err(|e| spectracube::Error::Image(e.to_string()))?;
    let bar = Colorbar {
        colormap,
        lo,
        hi,
        rows,
        cols,
        ticks: (0..=4)
            .map(|i| {
                let u = i as f64 / 4.0;
                (lo + u * (hi - lo), colormap.color(u))
            })
            .collect(),
    };
    let side = colorbar_path(path);
    let text = serde_json::to_string_pretty(&bar)?;
    std::fs::write(&side, text + "\n").map_err(|e| spectracube::Error::Io { path: side, source: e })?;
    Ok(bar)
}
