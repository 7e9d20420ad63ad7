//! Coordinate lattice shared by every criterion layer.
//!
//! A [`GridSpec`] fixes the bounds and step of a regular latitude/longitude
//! lattice. Cells are half-open boxes `[lat, lat + step) x [lon, lon + step)`
//! represented by their centers, stored row-major with the row index counted
//! northwards from `lat_min`. [`ScalarGrid`] and [`BoolMask`] carry one value
//! per cell on that layout.
//!
//! Missing values are stored as [`NODATA`] (a NaN) in memory; the ESRI ASCII
//! reader and writer translate it to and from the file sentinel.

pub mod ascii;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// In-memory missing-value marker. Test with [`is_nodata`], never with `==`.
pub const NODATA: f64 = f64::NAN;

/// Relative tolerance used when checking that a span is a whole number of steps.
const STEP_TOLERANCE: f64 = 1e-9;

#[inline]
pub fn is_nodata(v: f64) -> bool {
    v.is_nan()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("cell index ({i_lat}, {i_lon}) out of range for a {n_lat}x{n_lon} grid")]
    IndexOutOfRange {
        i_lat: usize,
        i_lon: usize,
        n_lat: usize,
        n_lon: usize,
    },
    #[error("coordinate ({lat}, {lon}) lies outside the grid bounds")]
    OutOfBounds { lat: f64, lon: f64 },
    #[error("grid specs do not match")]
    SpecMismatch,
    #[error("expected {expected} cell values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("non-finite value {value} at flat index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("{0}")]
    EmptyInput(&'static str),
}

/// Bounds and resolution of the planning lattice, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub step_lat: f64,
    pub step_lon: f64,
}

fn whole_steps(span: f64, step: f64) -> Option<usize> {
    let ratio = span / step;
    let n = ratio.round();
    if n >= 1.0 && (ratio - n).abs() <= STEP_TOLERANCE * ratio.max(1.0) {
        Some(n as usize)
    } else {
        None
    }
}

/// Maps a longitude into `[-180, 180)`.
pub fn wrap_lon(lon: f64) -> f64 {
    let w = (lon + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

impl GridSpec {
    pub fn new(
        lat_min: f64,
        lat_max: f64,
        lon_min: f64,
        lon_max: f64,
        step_lat: f64,
        step_lon: f64,
    ) -> Result<Self, GridError> {
        let spec = Self {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
            step_lat,
            step_lon,
        };
        let problems = spec.problems();
        if problems.is_empty() {
            Ok(spec)
        } else {
            Err(GridError::InvalidSpec(problems.join("; ")))
        }
    }

    /// Full-Earth lattice with square cells of `step` degrees.
    pub fn global(step: f64) -> Result<Self, GridError> {
        Self::new(-90.0, 90.0, -180.0, 180.0, step, step)
    }

    /// Every invariant violation of this spec, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let all = [
            self.lat_min,
            self.lat_max,
            self.lon_min,
            self.lon_max,
            self.step_lat,
            self.step_lon,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            out.push("all bounds and steps must be finite".to_string());
            return out;
        }
        if self.step_lat <= 0.0 {
            out.push(format!("step_lat must be > 0 (got {})", self.step_lat));
        }
        if self.step_lon <= 0.0 {
            out.push(format!("step_lon must be > 0 (got {})", self.step_lon));
        }
        if self.lat_min < -90.0 || self.lat_max > 90.0 {
            out.push("latitude bounds must lie within [-90, 90]".to_string());
        }
        if self.lon_min < -180.0 || self.lon_min >= 180.0 || self.lon_max > 180.0 {
            out.push("longitude bounds must lie within [-180, 180]".to_string());
        }
        if self.lat_min >= self.lat_max {
            out.push(format!(
                "lat_min ({}) must be below lat_max ({})",
                self.lat_min, self.lat_max
            ));
        }
        if self.lon_min >= self.lon_max {
            out.push(format!(
                "lon_min ({}) must be below lon_max ({})",
                self.lon_min, self.lon_max
            ));
        }
        if out.is_empty() {
            if whole_steps(self.lat_max - self.lat_min, self.step_lat).is_none() {
                out.push("latitude span is not a whole number of step_lat".to_string());
            }
            if whole_steps(self.lon_max - self.lon_min, self.step_lon).is_none() {
                out.push("longitude span is not a whole number of step_lon".to_string());
            }
        }
        out
    }

    pub fn n_lat(&self) -> usize {
        whole_steps(self.lat_max - self.lat_min, self.step_lat).unwrap_or(0)
    }

    pub fn n_lon(&self) -> usize {
        whole_steps(self.lon_max - self.lon_min, self.step_lon).unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.n_lat() * self.n_lon()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when the lattice spans all 360 degrees of longitude, so that the
    /// first and last columns are neighbours across the antimeridian.
    pub fn wraps_lon(&self) -> bool {
        ((self.lon_max - self.lon_min) - 360.0).abs() <= STEP_TOLERANCE * 360.0
    }

    pub fn flat(&self, idx: CellIndex) -> usize {
        idx.i_lat * self.n_lon() + idx.i_lon
    }

    pub fn unflat(&self, flat: usize) -> CellIndex {
        let n_lon = self.n_lon();
        CellIndex {
            i_lat: flat / n_lon,
            i_lon: flat % n_lon,
        }
    }

    pub fn check_index(&self, idx: CellIndex) -> Result<(), GridError> {
        let (n_lat, n_lon) = (self.n_lat(), self.n_lon());
        if idx.i_lat < n_lat && idx.i_lon < n_lon {
            Ok(())
        } else {
            Err(GridError::IndexOutOfRange {
                i_lat: idx.i_lat,
                i_lon: idx.i_lon,
                n_lat,
                n_lon,
            })
        }
    }

    /// Center of a cell as `(lat, lon)` in degrees.
    pub fn cell_center(&self, idx: CellIndex) -> Result<(f64, f64), GridError> {
        self.check_index(idx)?;
        Ok(self.center_unchecked(idx))
    }

    #[inline]
    pub(crate) fn center_unchecked(&self, idx: CellIndex) -> (f64, f64) {
        (
            self.lat_min + (idx.i_lat as f64 + 0.5) * self.step_lat,
            self.lon_min + (idx.i_lon as f64 + 0.5) * self.step_lon,
        )
    }

    #[inline]
    pub(crate) fn row_center_lat(&self, i_lat: usize) -> f64 {
        self.lat_min + (i_lat as f64 + 0.5) * self.step_lat
    }

    #[inline]
    pub(crate) fn col_center_lon(&self, i_lon: usize) -> f64 {
        self.lon_min + (i_lon as f64 + 0.5) * self.step_lon
    }

    /// Cell containing `(lat, lon)`, or `None` when the point is outside.
    ///
    /// Longitudes are wrapped into `[-180, 180)` first. The upper bound of each
    /// axis is treated as closed so that the poles and `lon_max` still map to
    /// the last row/column.
    pub fn locate(&self, lat: f64, lon: f64) -> Option<CellIndex> {
        if !lat.is_finite() || !lon.is_finite() {
            return None;
        }
        let lon = if self.wraps_lon() {
            let w = wrap_lon(lon);
            if w < self.lon_min {
                w + 360.0
            } else {
                w
            }
        } else if lon >= 180.0 && self.lon_min < 0.0 {
            wrap_lon(lon)
        } else {
            lon
        };
        let i_lat = axis_index(lat, self.lat_min, self.lat_max, self.step_lat, self.n_lat())?;
        let i_lon = axis_index(lon, self.lon_min, self.lon_max, self.step_lon, self.n_lon())?;
        Some(CellIndex { i_lat, i_lon })
    }

    /// Floor-based inverse of [`GridSpec::cell_center`].
    pub fn index_of(&self, lat: f64, lon: f64) -> Result<CellIndex, GridError> {
        self.locate(lat, lon)
            .ok_or(GridError::OutOfBounds { lat, lon })
    }

    /// Iterator over every cell index in flat (row-major) order.
    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        let n_lon = self.n_lon();
        (0..self.len()).map(move |f| CellIndex {
            i_lat: f / n_lon,
            i_lon: f % n_lon,
        })
    }
}

fn axis_index(v: f64, lo: f64, hi: f64, step: f64, n: usize) -> Option<usize> {
    if v < lo || v > hi {
        return None;
    }
    let i = ((v - lo) / step).floor();
    if i < 0.0 {
        return None;
    }
    Some((i as usize).min(n - 1))
}

/// Row/column address of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellIndex {
    pub i_lat: usize,
    pub i_lon: usize,
}

impl CellIndex {
    pub fn new(i_lat: usize, i_lon: usize) -> Self {
        Self { i_lat, i_lon }
    }
}

/// One real value per cell with a free-form unit tag.
#[derive(Debug, Clone)]
pub struct ScalarGrid {
    spec: GridSpec,
    values: Vec<f64>,
    unit: String,
}

// NODATA cells compare equal to each other.
impl PartialEq for ScalarGrid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
            && self.unit == other.unit
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a == b || (is_nodata(*a) && is_nodata(*b)))
    }
}

impl ScalarGrid {
    pub fn new(spec: GridSpec, values: Vec<f64>, unit: impl Into<String>) -> Result<Self, GridError> {
        if values.len() != spec.len() {
            return Err(GridError::LengthMismatch {
                expected: spec.len(),
                actual: values.len(),
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| v.is_infinite())
        {
            return Err(GridError::NonFinite { index, value });
        }
        Ok(Self {
            spec,
            values,
            unit: unit.into(),
        })
    }

    pub fn filled(spec: GridSpec, value: f64, unit: impl Into<String>) -> Self {
        Self {
            spec,
            values: vec![value; spec.len()],
            unit: unit.into(),
        }
    }

    /// Builds a grid by evaluating `f(idx, lat, lon)` at every cell center.
    /// Cells are evaluated in parallel; the result does not depend on the
    /// schedule because every cell is independent.
    pub fn from_fn<F>(spec: GridSpec, unit: impl Into<String>, f: F) -> Result<Self, GridError>
    where
        F: Fn(CellIndex, f64, f64) -> f64 + Sync,
    {
        let n_lon = spec.n_lon();
        let values: Vec<f64> = (0..spec.len())
            .into_par_iter()
            .map(|flat| {
                let idx = CellIndex {
                    i_lat: flat / n_lon,
                    i_lon: flat % n_lon,
                };
                let (lat, lon) = spec.center_unchecked(idx);
                f(idx, lat, lon)
            })
            .collect();
        Self::new(spec, values, unit)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn get(&self, idx: CellIndex) -> Result<f64, GridError> {
        self.spec.check_index(idx)?;
        Ok(self.values[self.spec.flat(idx)])
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    /// Largest value that is not NODATA.
    pub fn max_value(&self) -> Option<f64> {
        self.values
            .iter()
            .copied()
            .filter(|v| !is_nodata(*v))
            .fold(None, |acc, v| Some(acc.map_or(v, |m: f64| m.max(v))))
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Per-cell acceptance flags.
#[derive(Debug, Clone, PartialEq)]
pub struct BoolMask {
    spec: GridSpec,
    accepted: Vec<bool>,
}

impl BoolMask {
    pub fn new(spec: GridSpec, accepted: Vec<bool>) -> Result<Self, GridError> {
        if accepted.len() != spec.len() {
            return Err(GridError::LengthMismatch {
                expected: spec.len(),
                actual: accepted.len(),
            });
        }
        Ok(Self { spec, accepted })
    }

    pub fn filled(spec: GridSpec, value: bool) -> Self {
        Self {
            spec,
            accepted: vec![value; spec.len()],
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn accepted(&self) -> &[bool] {
        &self.accepted
    }

    pub fn get(&self, idx: CellIndex) -> Result<bool, GridError> {
        self.spec.check_index(idx)?;
        Ok(self.accepted[self.spec.flat(idx)])
    }

    pub fn count(&self) -> usize {
        self.accepted.iter().filter(|a| **a).count()
    }

    /// 1.0 for accepted cells and 0.0 otherwise.
    pub fn to_scalar(&self) -> ScalarGrid {
        ScalarGrid {
            spec: self.spec,
            values: self
                .accepted
                .iter()
                .map(|&a| if a { 1.0 } else { 0.0 })
                .collect(),
            unit: "flag".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    AtMost,
    AtLeast,
}

/// Accepts cells whose value satisfies the comparison. NODATA is always
/// rejected.
pub fn threshold(grid: &ScalarGrid, mode: ThresholdMode, value: f64) -> BoolMask {
    let accepted = grid
        .values
        .iter()
        .map(|&v| {
            !is_nodata(v)
                && match mode {
                    ThresholdMode::AtMost => v <= value,
                    ThresholdMode::AtLeast => v >= value,
                }
        })
        .collect();
    BoolMask {
        spec: grid.spec,
        accepted,
    }
}

/// Cell-wise logical AND of every mask.
pub fn intersect(masks: &[&BoolMask]) -> Result<BoolMask, GridError> {
    let (first, rest) = masks
        .split_first()
        .ok_or(GridError::EmptyInput("intersect needs at least one mask"))?;
    if rest.iter().any(|m| m.spec != first.spec) {
        return Err(GridError::SpecMismatch);
    }
    let mut accepted = first.accepted.clone();
    for m in rest {
        for (a, b) in accepted.iter_mut().zip(&m.accepted) {
            *a &= *b;
        }
    }
    Ok(BoolMask {
        spec: first.spec,
        accepted,
    })
}

/// Accepted cells over total cells. Cells are counted, not area-weighted.
pub fn selection_fraction(mask: &BoolMask) -> f64 {
    if mask.accepted.is_empty() {
        return 0.0;
    }
    mask.count() as f64 / mask.accepted.len() as f64
}

/// Samples `source` at every target cell center. Target cells whose center
/// falls outside the source become NODATA.
pub fn resample_nearest(source: &ScalarGrid, target: &GridSpec) -> ScalarGrid {
    if source.spec == *target {
        return source.clone();
    }
    let n_lon = target.n_lon();
    let values = (0..target.len())
        .into_par_iter()
        .map(|flat| {
            let (lat, lon) = target.center_unchecked(CellIndex {
                i_lat: flat / n_lon,
                i_lon: flat % n_lon,
            });
            match source.spec.locate(lat, lon) {
                Some(idx) => source.values[source.spec.flat(idx)],
                None => NODATA,
            }
        })
        .collect();
    ScalarGrid {
        spec: *target,
        values,
        unit: source.unit.clone(),
    }
}

/// Nearest-neighbour resample of a mask; uncovered target cells are rejected.
pub fn resample_mask(source: &BoolMask, target: &GridSpec) -> BoolMask {
    if source.spec == *target {
        return source.clone();
    }
    let accepted = target
        .cells()
        .map(|idx| {
            let (lat, lon) = target.center_unchecked(idx);
            source
                .spec
                .locate(lat, lon)
                .map(|s| source.accepted[source.spec.flat(s)])
                .unwrap_or(false)
        })
        .collect();
    BoolMask {
        spec: *target,
        accepted,
    }
}
