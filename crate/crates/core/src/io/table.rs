//! CSV tables keyed by wavelength, and sampled-line CSV files.

use std::path::Path;

use crate::cube::SampledLine;
use crate::error::{Error, Result};
use crate::grid::WavelengthGrid;

/// A `wavelength_nm,<col>...` table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub wavelengths: Vec<f64>,
    /// One vector per named column, aligned with `wavelengths`.
    pub values: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(&self.values[i])
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv(e.to_string())
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Csv(format!("cannot parse {what} value {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::Csv(format!("non-finite {what} value {s:?}")));
    }
    Ok(v)
}

pub fn read_table(path: impl AsRef<Path>) -> Result<Table> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_table(file, &path.display().to_string())
}

/// Parses a table from any reader; `name` labels error messages.
pub fn parse_table<R: std::io::Read>(reader: R, name: &str) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.get(0) != Some("wavelength_nm") || headers.len() < 2 {
        return Err(Error::Csv(format!(
            "{name}: header must start with wavelength_nm and name at least one column"
        )));
    }
    let columns: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut wavelengths = Vec::new();
    let mut values = vec![Vec::new(); columns.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        wavelengths.push(parse_f64(&rec[0], "wavelength_nm")?);
        for (j, col) in values.iter_mut().enumerate() {
            col.push(parse_f64(&rec[j + 1], &columns[j])?);
        }
    }
    if wavelengths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Csv(format!(
            "{name}: wavelengths must be strictly increasing"
        )));
    }
    Ok(Table {
        columns,
        wavelengths,
        values,
    })
}

pub fn write_table(table: &Table, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(csv_err)?;
    let mut header = vec!["wavelength_nm".to_string()];
    header.extend(table.columns.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (i, wl) in table.wavelengths.iter().enumerate() {
        let mut rec = vec![wl.to_string()];
        rec.extend(table.values.iter().map(|c| c[i].to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

/// Writes a sampled line as `row,col,r,g,b,<wavelength>...`; floats use the
/// shortest representation that round-trips.
pub fn write_line(line: &SampledLine, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(csv_err)?;
    let mut header: Vec<String> = ["row", "col", "r", "g", "b"].iter().map(|s| s.to_string()).collect();
    header.extend(line.grid().wavelengths().iter().map(|w| w.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..line.len() {
        let (r, c) = line.coords()[i];
        let mut rec = vec![r.to_string(), c.to_string()];
        rec.extend(line.rgb()[i].iter().map(|v| v.to_string()));
        rec.extend(line.spectrum_row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

pub fn read_line(path: impl AsRef<Path>) -> Result<SampledLine> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let fixed = ["row", "col", "r", "g", "b"];
    if headers.len() < 7 || headers.iter().take(5).ne(fixed.iter().copied()) {
        return Err(Error::Csv(format!(
            "{}: line header must be row,col,r,g,b followed by at least two wavelengths",
            path.display()
        )));
    }
    let wls: Vec<f64> = headers
        .iter()
        .skip(5)
        .map(|h| parse_f64(h, "wavelength header"))
        .collect::<Result<_>>()?;
    let step = wls[1] - wls[0];
    let grid = WavelengthGrid::new(wls[0], step, wls.len())?;
    if wls
        .iter()
        .enumerate()
        .any(|(i, w)| (w - grid.wavelength(i)).abs() > 1e-6 * step.abs().max(1.0))
    {
        return Err(Error::Csv("line wavelengths must be uniformly spaced".into()));
    }
    let mut coords = Vec::new();
    let mut rgb = Vec::new();
    let mut spectra = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let idx = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Csv(format!("bad pixel coordinate {s:?}")))
        };
        coords.push((idx(&rec[0])?, idx(&rec[1])?));
        rgb.push([
            parse_f64(&rec[2], "r")?,
            parse_f64(&rec[3], "g")?,
            parse_f64(&rec[4], "b")?,
        ]);
        for j in 0..wls.len() {
            spectra.push(parse_f64(&rec[5 + j], "spectral")?);
        }
    }
    SampledLine::new(grid, coords, rgb, spectra)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_round_trip_is_exact() {
        let grid = WavelengthGrid::new(400.0, 0.5, 3).unwrap();
        let line = SampledLine::new(
            grid,
            vec![(0, 5), (1, 5)],
            vec![[0.1, 0.2, 0.3], [1.0 / 3.0, 0.0, 1.0]],
            vec![0.1, 0.2, std::f64::consts::PI, -1e-300, 5.0, 6.0],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("line.csv");
        write_line(&line, &p).unwrap();
        assert_eq!(read_line(&p).unwrap(), line);
    }

    #[test]
    fn table_requires_wavelength_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "nm,a\n400,1\n").unwrap();
        assert!(read_table(&p).is_err());
        std::fs::write(&p, "wavelength_nm,a\n400,1\n401,nan\n").unwrap();
        assert!(read_table(&p).is_err());
        std::fs::write(&p, "# comment\nwavelength_nm,a,b\n400,1,2\n401,3,4\n").unwrap();
        let t = read_table(&p).unwrap();
        assert_eq!(t.column("b").unwrap(), &[2.0, 4.0]);
    }
}
