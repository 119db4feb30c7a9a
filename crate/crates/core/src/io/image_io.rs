//! RGB image ingestion and export.
//!
//! Integer images are normalized by `2^depth - 1`. Supported inputs are 8/16-bit
//! PNG, binary PPM (`P6`, any maxval up to 65535, e.g. 1023 for 10-bit data) and
//! 3-plane hypercube containers holding values already in `[0, 1]`.

use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Rgb};

use crate::cube::{Hypercube, RgbImage};
use crate::error::{Error, Result};
use crate::grid::WavelengthGrid;
use crate::io::container::{read_cube, write_cube};

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

pub fn read_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    match extension(path).as_str() {
        "png" => read_png(path),
        "ppm" | "pnm" => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            decode_ppm(&bytes)
        }
        "hsc" => {
            let cube = read_cube(path)?;
            if cube.bands() != 3 {
                return Err(Error::Dimension(format!(
                    "RGB container must have 3 planes, found {}",
                    cube.bands()
                )));
            }
            RgbImage::new(cube.rows(), cube.cols(), cube.data().to_vec())
        }
        other => Err(Error::Image(format!("unsupported image extension {other:?}"))),
    }
}

/// Writes an image. `bits` selects integer quantization: 8 or 16 give PNG,
/// other depths give PPM; `None` writes an f32 3-plane container (`.hsc`).
pub fn write_rgb(img: &RgbImage, path: impl AsRef<Path>, bits: Option<u8>) -> Result<()> {
    let path = path.as_ref();
    match bits {
        None => {
            let grid = WavelengthGrid::new(0.0, 1.0, 3)?;
            let cube = Hypercube::new(img.rows(), img.cols(), grid, img.data().to_vec())?
                .with_plane_names(vec!["r".into(), "g".into(), "b".into()])?;
            write_cube(&cube, path)
        }
        Some(b) if !(1..=16).contains(&b) => {
            Err(Error::InvalidArgument(format!("bit depth {b} not in 1..=16")))
        }
        Some(8) if extension(path) == "png" => {
            let raw: Vec<u8> = img.data().iter().map(|&v| quantize(v, 8) as u8).collect();
            let buf: ImageBuffer<Rgb<u8>, _> =
                ImageBuffer::from_raw(img.cols() as u32, img.rows() as u32, raw)
                    .ok_or_else(|| Error::Image("buffer size".into()))?;
            buf.save(path).map_err(|e| Error::Image(e.to_string()))
        }
        Some(16) if extension(path) == "png" => {
            let raw: Vec<u16> = img.data().iter().map(|&v| quantize(v, 16) as u16).collect();
            let buf: ImageBuffer<Rgb<u16>, _> =
                ImageBuffer::from_raw(img.cols() as u32, img.rows() as u32, raw)
                    .ok_or_else(|| Error::Image("buffer size".into()))?;
            buf.save(path).map_err(|e| Error::Image(e.to_string()))
        }
        Some(b) => {
            let bytes = encode_ppm(img, b);
            fs::write(path, bytes).map_err(|e| Error::io(path, e))
        }
    }
}

fn quantize(v: f64, bits: u8) -> u32 {
    let max = ((1u32 << bits) - 1) as f64;
    (v.clamp(0.0, 1.0) * max).round() as u32
}

fn read_png(path: &Path) -> Result<RgbImage> {
    let dynimg = image::open(path).map_err(|e| Error::Image(e.to_string()))?;
    let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
    let (data, bits): (Vec<f64>, u8) = match &dynimg {
        DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_)
        | DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_) => {
            let buf = dynimg.to_rgb16();
            (buf.as_raw().iter().map(|&v| v as f64 / 65535.0).collect(), 16)
        }
        _ => {
            let buf = dynimg.to_rgb8();
            (buf.as_raw().iter().map(|&v| v as f64 / 255.0).collect(), 8)
        }
    };
    Ok(RgbImage::new(h, w, data)?.with_bit_depth(bits))
}

fn encode_ppm(img: &RgbImage, bits: u8) -> Vec<u8> {
    let maxval = (1u32 << bits) - 1;
    let mut out = format!("P6\n{} {}\n{}\n", img.cols(), img.rows(), maxval).into_bytes();
    for &v in img.data() {
        let q = quantize(v, bits);
        if maxval < 256 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&(q as u16).to_be_bytes());
        }
    }
    out
}

fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Image("truncated PPM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    if fields[0] != "P6" {
        return Err(Error::Image(format!("unsupported PNM magic {:?}", fields[0])));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Image(format!("bad PPM header field {s:?}")))
    };
    let (w, h, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Image(format!("PPM maxval {maxval} out of range")));
    }
    let bpv = if maxval < 256 { 1 } else { 2 };
    let raster = bytes.get(pos..).unwrap_or(&[]);
    let expected = w * h * 3 * bpv;
    if raster.len() != expected {
        return Err(Error::PayloadLength {
            expected,
            found: raster.len(),
        });
    }
    let scale = maxval as f64;
    let data: Vec<f64> = if bpv == 1 {
        raster.iter().map(|&v| v as f64 / scale).collect()
    } else {
        raster
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / scale)
            .collect()
    };
    if data.iter().any(|&v| v > 1.0) {
        return Err(Error::Image("PPM sample exceeds maxval".into()));
    }
    let bits = (usize::BITS - maxval.leading_zeros()) as u8;
    Ok(RgbImage::new(h, w, data)?.with_bit_depth(bits))
}
