//! ESRI ASCII grid reading and writing.
//!
//! Header keys are matched case-insensitively. `xllcenter`/`yllcenter` are
//! accepted on input; output always uses `xllcorner`/`yllcorner`. Rasters with
//! non-square cells use the `dx`/`dy` pair in place of `cellsize`. Data rows run
//! north to south.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{is_nodata, BoolMask, GridError, GridSpec, ScalarGrid, NODATA};

/// NODATA value written to files, and assumed when a header omits it.
pub const FILE_NODATA: f64 = -9999.0;

#[derive(Debug, Error)]
pub enum AsciiError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad header: {0}")]
    Header(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Default)]
struct Header {
    ncols: Option<usize>,
    nrows: Option<usize>,
    xll: Option<(f64, bool)>,
    yll: Option<(f64, bool)>,
    cellsize: Option<f64>,
    dx: Option<f64>,
    dy: Option<f64>,
    nodata: Option<f64>,
}

const HEADER_KEYS: [&str; 10] = [
    "ncols",
    "nrows",
    "xllcorner",
    "yllcorner",
    "xllcenter",
    "yllcenter",
    "cellsize",
    "dx",
    "dy",
    "nodata_value",
];

fn snap(v: f64, limit: f64) -> f64 {
    if (v.abs() - limit).abs() <= 1e-9 {
        limit.copysign(v)
    } else {
        v
    }
}

impl Header {
    fn spec(&self) -> Result<GridSpec, AsciiError> {
        let missing = |k: &str| AsciiError::Header(format!("missing `{k}`"));
        let ncols = self.ncols.ok_or_else(|| missing("ncols"))?;
        let nrows = self.nrows.ok_or_else(|| missing("nrows"))?;
        let (dx, dy) = match (self.cellsize, self.dx, self.dy) {
            (Some(c), _, _) => (c, c),
            (None, Some(dx), Some(dy)) => (dx, dy),
            _ => return Err(missing("cellsize")),
        };
        let (x, x_center) = self.xll.ok_or_else(|| missing("xllcorner"))?;
        let (y, y_center) = self.yll.ok_or_else(|| missing("yllcorner"))?;
        let lon_min = if x_center { x - dx / 2.0 } else { x };
        let lat_min = if y_center { y - dy / 2.0 } else { y };
        let spec = GridSpec::new(
            snap(lat_min, 90.0),
            snap(lat_min + nrows as f64 * dy, 90.0),
            snap(lon_min, 180.0),
            snap(lon_min + ncols as f64 * dx, 180.0),
            dy,
            dx,
        )?;
        if spec.n_lat() != nrows || spec.n_lon() != ncols {
            return Err(AsciiError::Header(
                "cell counts do not match the declared extent".to_string(),
            ));
        }
        Ok(spec)
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T, AsciiError> {
    tok.parse::<T>().map_err(|_| AsciiError::Parse {
        line,
        msg: format!("cannot parse `{tok}`"),
    })
}

/// Reads an ESRI ASCII raster. Cells equal to the header NODATA value become
/// [`NODATA`].
pub fn read_grid<R: Read>(reader: R, unit: &str) -> Result<ScalarGrid, AsciiError> {
    let reader = BufReader::new(reader);
    let mut header = Header::default();
    let mut lines = reader.lines().enumerate();
    let mut pending: Option<(usize, String)> = None;

    for (n, line) in lines.by_ref() {
        let line = line?;
        let lineno = n + 1;
        let mut toks = line.split_whitespace();
        let Some(key) = toks.next() else { continue };
        let key_lc = key.to_ascii_lowercase();
        if !HEADER_KEYS.contains(&key_lc.as_str()) {
            pending = Some((lineno, line));
            break;
        }
        let val = toks.next().ok_or_else(|| AsciiError::Parse {
            line: lineno,
            msg: format!("`{key}` has no value"),
        })?;
        match key_lc.as_str() {
            "ncols" => header.ncols = Some(parse_num(val, lineno)?),
            "nrows" => header.nrows = Some(parse_num(val, lineno)?),
            "xllcorner" => header.xll = Some((parse_num(val, lineno)?, false)),
            "yllcorner" => header.yll = Some((parse_num(val, lineno)?, false)),
            "xllcenter" => header.xll = Some((parse_num(val, lineno)?, true)),
            "yllcenter" => header.yll = Some((parse_num(val, lineno)?, true)),
            "cellsize" => header.cellsize = Some(parse_num(val, lineno)?),
            "dx" => header.dx = Some(parse_num(val, lineno)?),
            "dy" => header.dy = Some(parse_num(val, lineno)?),
            _ => header.nodata = Some(parse_num(val, lineno)?),
        }
    }

    let spec = header.spec()?;
    let nodata = header.nodata.unwrap_or(FILE_NODATA);
    let (n_lat, n_lon) = (spec.n_lat(), spec.n_lon());
    let mut values = vec![NODATA; spec.len()];
    let mut count = 0usize;
    let mut last_line = 0;

    let body = pending
        .into_iter()
        .map(Ok)
        .chain(lines.map(|(n, l)| l.map(|l| (n + 1, l))));
    for item in body {
        let (lineno, line) = item?;
        last_line = lineno;
        for tok in line.split_whitespace() {
            if count >= values.len() {
                return Err(AsciiError::Parse {
                    line: lineno,
                    msg: format!("more than {} values", values.len()),
                });
            }
            let v: f64 = parse_num(tok, lineno)?;
            let file_row = count / n_lon;
            let col = count % n_lon;
            let i_lat = n_lat - 1 - file_row;
            values[i_lat * n_lon + col] = if v == nodata { NODATA } else { v };
            count += 1;
        }
    }
    if count != values.len() {
        return Err(AsciiError::Parse {
            line: last_line,
            msg: format!("expected {} values, found {count}", values.len()),
        });
    }
    Ok(ScalarGrid::new(spec, values, unit)?)
}

pub fn read_grid_file(path: impl AsRef<Path>, unit: &str) -> Result<ScalarGrid, AsciiError> {
    read_grid(File::open(path)?, unit)
}

/// Reads a mask raster: 1 = accepted, 0 = rejected, NODATA = rejected.
pub fn read_mask<R: Read>(reader: R) -> Result<BoolMask, AsciiError> {
    let grid = read_grid(reader, "flag")?;
    let mut accepted = Vec::with_capacity(grid.values().len());
    for (i, &v) in grid.values().iter().enumerate() {
        accepted.push(match v {
            v if is_nodata(v) || v == 0.0 => false,
            1.0 => true,
            other => {
                return Err(AsciiError::Header(format!(
                    "mask value {other} at flat index {i} is neither 0 nor 1"
                )))
            }
        });
    }
    Ok(BoolMask::new(*grid.spec(), accepted)?)
}

pub fn read_mask_file(path: impl AsRef<Path>) -> Result<BoolMask, AsciiError> {
    read_mask(File::open(path)?)
}

fn write_header(out: &mut String, spec: &GridSpec) {
    let _ = writeln!(out, "ncols {}", spec.n_lon());
    let _ = writeln!(out, "nrows {}", spec.n_lat());
    let _ = writeln!(out, "xllcorner {}", spec.lon_min);
    let _ = writeln!(out, "yllcorner {}", spec.lat_min);
    if spec.step_lat == spec.step_lon {
        let _ = writeln!(out, "cellsize {}", spec.step_lat);
    } else {
        let _ = writeln!(out, "dx {}", spec.step_lon);
        let _ = writeln!(out, "dy {}", spec.step_lat);
    }
    let _ = writeln!(out, "NODATA_value {}", FILE_NODATA);
}

fn write_rows<W: Write, F>(mut w: W, spec: &GridSpec, mut cell: F) -> io::Result<()>
where
    F: FnMut(usize, &mut String),
{
    let mut head = String::new();
    write_header(&mut head, spec);
    w.write_all(head.as_bytes())?;
    let (n_lat, n_lon) = (spec.n_lat(), spec.n_lon());
    let mut line = String::new();
    for i_lat in (0..n_lat).rev() {
        line.clear();
        for i_lon in 0..n_lon {
            if i_lon > 0 {
                line.push(' ');
            }
            cell(i_lat * n_lon + i_lon, &mut line);
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()
}

/// Writes values in shortest round-trip decimal form; NODATA as -9999.
pub fn write_grid<W: Write>(grid: &ScalarGrid, w: W) -> io::Result<()> {
    let values = grid.values();
    write_rows(w, grid.spec(), |flat, line| {
        let v = values[flat];
        if is_nodata(v) {
            let _ = write!(line, "{}", FILE_NODATA);
        } else {
            let _ = write!(line, "{}", v);
        }
    })
}

pub fn write_grid_file(grid: &ScalarGrid, path: impl AsRef<Path>) -> io::Result<()> {
    write_grid(grid, BufWriter::new(File::create(path)?))
}

pub fn write_mask<W: Write>(mask: &BoolMask, w: W) -> io::Result<()> {
    let accepted = mask.accepted();
    write_rows(w, mask.spec(), |flat, line| {
        line.push(if accepted[flat] { '1' } else { '0' });
    })
}

pub fn write_mask_file(mask: &BoolMask, path: impl AsRef<Path>) -> io::Result<()> {
    write_mask(mask, BufWriter::new(File::create(path)?))
}
