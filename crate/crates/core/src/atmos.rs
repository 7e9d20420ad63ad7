//! Rain attenuation criterion.
//!
//! Specific attenuation follows the `k R^alpha` power law with regression
//! coefficients read from a per-frequency table (ITU-R P.838 values). The slant
//! path attenuation exceeded for 0.01 % of an average year follows the
//! ITU-R P.618-13 procedure for elevations of 5 degrees and above.

use std::io::Read;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geogrid::{is_nodata, resample_nearest, GridError, GridSpec, ScalarGrid, NODATA};

/// Coefficient table shipped with the crate: 1 to 100 GHz.
pub const BUNDLED_COEFFICIENTS: &str = include_str!("../data/rain_coefficients.csv");

#[derive(Debug, Error)]
pub enum AtmosError {
    #[error("frequency {0} GHz is outside the coefficient table range [{1}, {2}] GHz")]
    FrequencyOutOfRange(f64, f64, f64),
    #[error("invalid coefficient table: {0}")]
    BadTable(String),
    #[error("negative rain rate {0} mm/h")]
    NegativeRainRate(f64),
    #[error("rain height {rain_km} km must exceed station height {station_km} km")]
    RainHeightBelowStation { rain_km: f64, station_km: f64 },
    #[error("elevation {0} deg is below 5 deg; only the high-elevation branch is implemented")]
    UnsupportedElevation(f64),
    #[error("invalid rain model input: {0}")]
    InvalidInput(String),
    #[error("intermediate `{name}` is non-positive ({value})")]
    NonPositiveIntermediate { name: &'static str, value: f64 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Power-law regression coefficients at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RainCoefficients {
    #[serde(rename = "freq_ghz")]
    pub frequency_ghz: f64,
    pub k_h: f64,
    pub k_v: f64,
    pub alpha_h: f64,
    pub alpha_v: f64,
}

/// Rows sorted by strictly increasing frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    rows: Vec<RainCoefficients>,
}

impl CoefficientTable {
    pub fn new(rows: Vec<RainCoefficients>) -> Result<Self, AtmosError> {
        if rows.is_empty() {
            return Err(AtmosError::BadTable("no rows".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            let vals = [r.frequency_ghz, r.k_h, r.k_v, r.alpha_h, r.alpha_v];
            if vals.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(AtmosError::BadTable(format!(
                    "row {} ({} GHz): all values must be positive",
                    i + 1,
                    r.frequency_ghz
                )));
            }
        }
        if rows.windows(2).any(|w| w[1].frequency_ghz <= w[0].frequency_ghz) {
            return Err(AtmosError::BadTable(
                "frequencies must be strictly increasing".into(),
            ));
        }
        Ok(Self { rows })
    }

    /// Parses `freq_ghz,k_h,k_v,alpha_h,alpha_v` CSV.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, AtmosError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["freq_ghz", "k_h", "k_v", "alpha_h", "alpha_v"];
        if headers.iter().ne(expected.iter().copied()) {
            return Err(AtmosError::BadTable(format!(
                "header must be `{}`",
                expected.join(",")
            )));
        }
        let rows = rdr
            .deserialize()
            .collect::<Result<Vec<RainCoefficients>, _>>()?;
        Self::new(rows)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, AtmosError> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    pub fn bundled() -> Self {
        Self::from_csv(BUNDLED_COEFFICIENTS.as_bytes()).expect("bundled table is valid")
    }

    pub fn rows(&self) -> &[RainCoefficients] {
        &self.rows
    }

    pub fn range_ghz(&self) -> (f64, f64) {
        (
            self.rows[0].frequency_ghz,
            self.rows[self.rows.len() - 1].frequency_ghz,
        )
    }

    pub fn contains(&self, f_ghz: f64) -> bool {
        let (lo, hi) = self.range_ghz();
        (lo..=hi).contains(&f_ghz)
    }
}

/// Coefficients at `f_ghz`: `log k` is linear in `log f`, and `alpha` is
/// linear in `log f`, between the bracketing rows. A matching row is
/// returned unchanged.
pub fn interpolate_coefficients(
    table: &CoefficientTable,
    f_ghz: f64,
) -> Result<RainCoefficients, AtmosError> {
    let (lo, hi) = table.range_ghz();
    if !(lo..=hi).contains(&f_ghz) {
        return Err(AtmosError::FrequencyOutOfRange(f_ghz, lo, hi));
    }
    let rows = table.rows();
    if let Some(r) = rows.iter().find(|r| r.frequency_ghz == f_ghz) {
        return Ok(*r);
    }
    let upper = rows.partition_point(|r| r.frequency_ghz < f_ghz);
    let (a, b) = (rows[upper - 1], rows[upper]);
    let w = (f_ghz.ln() - a.frequency_ghz.ln()) / (b.frequency_ghz.ln() - a.frequency_ghz.ln());
    let log_lerp = |x: f64, y: f64| (x.ln() + w * (y.ln() - x.ln())).exp();
    let lerp = |x: f64, y: f64| x + w * (y - x);
    Ok(RainCoefficients {
        frequency_ghz: f_ghz,
        k_h: log_lerp(a.k_h, b.k_h),
        k_v: log_lerp(a.k_v, b.k_v),
        alpha_h: lerp(a.alpha_h, b.alpha_h),
        alpha_v: lerp(a.alpha_v, b.alpha_v),
    })
}

/// Combines horizontal and vertical coefficients for a path elevation and a
/// polarization tilt (45 deg for circular).
pub fn effective_k_alpha(coeffs: &RainCoefficients, elevation_deg: f64, tilt_deg: f64) -> (f64, f64) {
    let c = elevation_deg.to_radians().cos().powi(2) * (2.0 * tilt_deg.to_radians()).cos();
    let k = (coeffs.k_h + coeffs.k_v + (coeffs.k_h - coeffs.k_v) * c) / 2.0;
    let kah = coeffs.k_h * coeffs.alpha_h;
    let kav = coeffs.k_v * coeffs.alpha_v;
    let alpha = (kah + kav + (kah - kav) * c) / (2.0 * k);
    (k, alpha)
}

/// `k R^alpha` in dB/km.
pub fn specific_attenuation(k: f64, alpha: f64, rain_rate_mm_h: f64) -> Result<f64, AtmosError> {
    if rain_rate_mm_h < 0.0 {
        return Err(AtmosError::NegativeRainRate(rain_rate_mm_h));
    }
    if rain_rate_mm_h == 0.0 {
        return Ok(0.0);
    }
    Ok(k * rain_rate_mm_h.powf(alpha))
}

/// Everything the slant-path procedure consumes for one site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RainModelInputs {
    pub frequency_ghz: f64,
    pub elevation_deg: f64,
    pub polarization_tilt_deg: f64,
    pub rain_rate_mm_h: f64,
    pub rain_height_km: f64,
    pub station_height_km: f64,
    pub latitude_deg: f64,
}

impl RainModelInputs {
    pub fn validate(&self) -> Result<(), AtmosError> {
        if !(1.0..=100.0).contains(&self.frequency_ghz) {
            return Err(AtmosError::InvalidInput(format!(
                "frequency {} GHz outside [1, 100]",
                self.frequency_ghz
            )));
        }
        if !(self.elevation_deg <= 90.0) {
            return Err(AtmosError::InvalidInput(format!(
                "elevation {} deg above 90",
                self.elevation_deg
            )));
        }
        if self.elevation_deg < 5.0 {
            return Err(AtmosError::UnsupportedElevation(self.elevation_deg));
        }
        if !(self.rain_rate_mm_h >= 0.0) {
            return Err(AtmosError::NegativeRainRate(self.rain_rate_mm_h));
        }
        if !(self.rain_height_km > self.station_height_km) {
            return Err(AtmosError::RainHeightBelowStation {
                rain_km: self.rain_height_km,
                station_km: self.station_height_km,
            });
        }
        if !(-90.0..=90.0).contains(&self.latitude_deg) {
            return Err(AtmosError::InvalidInput(format!(
                "latitude {} outside [-90, 90]",
                self.latitude_deg
            )));
        }
        Ok(())
    }
}

/// Every intermediate of the slant-path computation, for inspection.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RainPathTrace {
    pub k: f64,
    pub alpha: f64,
    /// Specific attenuation, dB/km.
    pub gamma_r: f64,
    /// Slant path length below the rain height, km.
    pub slant_km: f64,
    /// Horizontal projection of the slant path, km.
    pub horizontal_km: f64,
    /// Horizontal reduction factor for 0.01 % of the time.
    pub r001: f64,
    pub zeta_deg: f64,
    /// Adjusted rain path length, km.
    pub rain_path_km: f64,
    pub chi_deg: f64,
    /// Vertical adjustment factor for 0.01 % of the time.
    pub v001: f64,
    /// Effective path length, km.
    pub effective_km: f64,
    /// Attenuation exceeded for 0.01 % of an average year, dB.
    pub a001_db: f64,
}

fn positive(name: &'static str, value: f64) -> Result<f64, AtmosError> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(AtmosError::NonPositiveIntermediate { name, value })
    }
}

/// Slant-path chain for already combined `k` and `alpha`. Inputs must be
/// validated by the caller.
fn rain_path(inputs: &RainModelInputs, k: f64, alpha: f64) -> Result<RainPathTrace, AtmosError> {
    let gamma_r = specific_attenuation(k, alpha, inputs.rain_rate_mm_h)?;
    let mut trace = RainPathTrace {
        k,
        alpha,
        gamma_r,
        ..Default::default()
    };
    if gamma_r == 0.0 {
        return Ok(trace);
    }
    let theta = inputs.elevation_deg;
    let (sin_t, cos_t) = theta.to_radians().sin_cos();
    let f = inputs.frequency_ghz;
    let dh = inputs.rain_height_km - inputs.station_height_km;

    trace.slant_km = dh / sin_t;
    trace.horizontal_km = trace.slant_km * cos_t;
    let lg = trace.horizontal_km;

    trace.r001 = positive(
        "r001",
        1.0 / (1.0 + 0.78 * (lg * gamma_r / f).sqrt() - 0.38 * (1.0 - (-2.0 * lg).exp())),
    )?;
    trace.zeta_deg = (dh / (lg * trace.r001)).atan().to_degrees();
    trace.rain_path_km = if trace.zeta_deg > theta {
        lg * trace.r001 / cos_t
    } else {
        dh / sin_t
    };
    let lat = inputs.latitude_deg.abs();
    trace.chi_deg = if lat < 36.0 { 36.0 - lat } else { 0.0 };
    let growth = 31.0 * (1.0 - (-(theta / (1.0 + trace.chi_deg))).exp())
        * (trace.rain_path_km * gamma_r).sqrt()
        / (f * f);
    trace.v001 = positive("v001", 1.0 / (1.0 + sin_t.sqrt() * (growth - 0.45)))?;
    trace.effective_km = trace.rain_path_km * trace.v001;
    trace.a001_db = gamma_r * trace.effective_km;
    Ok(trace)
}

/// Full trace of the 0.01 % slant-path attenuation.
pub fn attenuation_trace(
    inputs: &RainModelInputs,
    table: &CoefficientTable,
) -> Result<RainPathTrace, AtmosError> {
    inputs.validate()?;
    let c = interpolate_coefficients(table, inputs.frequency_ghz)?;
    let (k, alpha) = effective_k_alpha(&c, inputs.elevation_deg, inputs.polarization_tilt_deg);
    rain_path(inputs, k, alpha)
}

/// Rain attenuation exceeded for 0.01 % of an average year, dB.
pub fn attenuation_001(inputs: &RainModelInputs, table: &CoefficientTable) -> Result<f64, AtmosError> {
    Ok(attenuation_trace(inputs, table)?.a001_db)
}

/// Rain rate exceeded 0.01 % of an average year, mm/h.
#[derive(Debug, Clone, PartialEq)]
pub struct RainRateMap {
    grid: ScalarGrid,
}

impl RainRateMap {
    pub fn new(grid: ScalarGrid) -> Result<Self, AtmosError> {
        if let Some(&v) = grid.values().iter().find(|v| **v < 0.0) {
            return Err(AtmosError::NegativeRainRate(v));
        }
        Ok(Self {
            grid: grid.with_unit("mm/h"),
        })
    }

    pub fn grid(&self) -> &ScalarGrid {
        &self.grid
    }
}

/// Per-run settings shared by every cell of a rain attenuation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RainGridParams {
    pub frequency_ghz: f64,
    pub elevation_deg: f64,
    pub polarization_tilt_deg: f64,
    pub rain_height_km: f64,
}

impl RainGridParams {
    fn inputs(&self, rain_rate_mm_h: f64, latitude_deg: f64) -> RainModelInputs {
        RainModelInputs {
            frequency_ghz: self.frequency_ghz,
            elevation_deg: self.elevation_deg,
            polarization_tilt_deg: self.polarization_tilt_deg,
            rain_rate_mm_h,
            rain_height_km: self.rain_height_km,
            station_height_km: 0.0,
            latitude_deg,
        }
    }
}

/// Applies [`attenuation_001`] at every cell center with station height 0.
/// NODATA rain cells stay NODATA.
pub fn rain_attenuation_grid(
    rain_map: &RainRateMap,
    spec: &GridSpec,
    params: &RainGridParams,
    table: &CoefficientTable,
) -> Result<ScalarGrid, AtmosError> {
    params.inputs(0.0, 0.0).validate()?;
    let c = interpolate_coefficients(table, params.frequency_ghz)?;
    let (k, alpha) = effective_k_alpha(&c, params.elevation_deg, params.polarization_tilt_deg);
    let rain = resample_nearest(rain_map.grid(), spec);
    let n_lon = spec.n_lon();
    let cells: Vec<Result<f64, AtmosError>> = rain
        .values()
        .par_iter()
        .enumerate()
        .map(|(flat, &r)| {
            if is_nodata(r) {
                return Ok(NODATA);
            }
            let lat = spec.row_center_lat(flat / n_lon);
            rain_path(&params.inputs(r, lat), k, alpha).map(|t| t.a001_db)
        })
        .collect();
    let values = cells.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(ScalarGrid::new(*spec, values, "dB")?)
}

/// Cell-wise maximum; NODATA wherever any input is NODATA.
pub fn worst_case_over_frequencies(grids: &[ScalarGrid]) -> Result<ScalarGrid, AtmosError> {
    let (first, rest) = grids
        .split_first()
        .ok_or(GridError::EmptyInput("need at least one grid"))?;
    if rest.iter().any(|g| g.spec() != first.spec()) {
        return Err(GridError::SpecMismatch.into());
    }
    let mut values = first.values().to_vec();
    for g in rest {
        for (acc, &v) in values.iter_mut().zip(g.values()) {
            *acc = if is_nodata(*acc) || is_nodata(v) {
                NODATA
            } else {
                acc.max(v)
            };
        }
    }
    Ok(ScalarGrid::new(*first.spec(), values, first.unit())?)
}
