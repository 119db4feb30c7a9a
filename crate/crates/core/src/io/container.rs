use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cube::Hypercube;
use crate::error::{Error, Result};
use crate::grid::WavelengthGrid;

pub const DTYPE: &str = "f32le";
pub const ORDER: &str = "band-sequential";

/// The JSON line that precedes the raw payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeHeader {
    pub rows: usize,
    pub cols: usize,
    pub wl_start_nm: f64,
    pub wl_step_nm: f64,
    pub wl_count: usize,
    pub dtype: String,
    pub order: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planes: Option<Vec<String>>,
}

impl CubeHeader {
    fn payload_bytes(&self) -> usize {
        self.rows * self.cols * self.wl_count * 4
    }
}

/// Serializes a cube: header line, then f32 little-endian band-sequential payload.
///
/// Values are narrowed to f32; a value that overflows f32 is rejected.
pub fn encode_cube(cube: &Hypercube) -> Result<Vec<u8>> {
    let header = CubeHeader {
        rows: cube.rows(),
        cols: cube.cols(),
        wl_start_nm: cube.grid().start_nm(),
        wl_step_nm: cube.grid().step_nm(),
        wl_count: cube.bands(),
        dtype: DTYPE.into(),
        order: ORDER.into(),
        planes: cube.plane_names().map(|p| p.to_vec()),
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.reserve(header.payload_bytes());
    let k = cube.bands();
    let data = cube.data();
    let n = cube.rows() * cube.cols();
    for b in 0..k {
        for p in 0..n {
            let idx = p * k + b;
            let v = data[idx] as f32;
            if !v.is_finite() {
                return Err(Error::NonFinite { index: idx });
            }
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_cube(bytes: &[u8]) -> Result<Hypercube> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedHeader("missing header terminator".into()))?;
    let text = std::str::from_utf8(&bytes[..nl])
        .map_err(|e| Error::MalformedHeader(format!("header is not UTF-8: {e}")))?;
    let header: CubeHeader = serde_json::from_str(text)
        .map_err(|e| Error::MalformedHeader(format!("{e}")))?;
    if header.dtype != DTYPE {
        return Err(Error::MalformedHeader(format!("unsupported dtype {:?}", header.dtype)));
    }
    if header.order != ORDER {
        return Err(Error::MalformedHeader(format!("unsupported order {:?}", header.order)));
    }
    if header.rows == 0 || header.cols == 0 {
        return Err(Error::MalformedHeader("rows and cols must be positive".into()));
    }
    let grid = WavelengthGrid::new(header.wl_start_nm, header.wl_step_nm, header.wl_count)
        .map_err(|e| Error::MalformedHeader(e.to_string()))?;
    let payload = &bytes[nl + 1..];
    let expected = header.payload_bytes();
    if payload.len() != expected {
        return Err(Error::PayloadLength {
            expected,
            found: payload.len(),
        });
    }
    let k = header.wl_count;
    let n = header.rows * header.cols;
    let mut data = vec![0.0f64; n * k];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if !v.is_finite() {
            return Err(Error::NonFinite { index: i });
        }
        let (b, p) = (i / n, i % n);
        data[p * k + b] = v as f64;
    }
    let cube = Hypercube::new(header.rows, header.cols, grid, data)?;
    match header.planes {
        Some(names) => cube.with_plane_names(names),
        None => Ok(cube),
    }
}

pub fn write_cube(cube: &Hypercube, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_cube(cube)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_cube(path: impl AsRef<Path>) -> Result<Hypercube> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cube(&bytes)
}
