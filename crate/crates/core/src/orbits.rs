//! Circular Walker constellations and ground visibility.
//!
//! Satellites move on circular Keplerian orbits around a spherical Earth and
//! are rotated into the Earth-fixed frame by the sidereal rate. Observers sit
//! on the sphere surface at every cell center of a grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geogrid::{GridSpec, ScalarGrid};

/// Mean equatorial radius used for the spherical Earth, meters.
pub const EARTH_RADIUS_M: f64 = 6_378_137.0;
/// Earth gravitational parameter, m^3/s^2.
pub const EARTH_MU: f64 = 3.986_004_418e14;
/// Earth rotation rate, rad/s.
pub const EARTH_ROTATION_RATE: f64 = 7.292_115_9e-5;

pub type Vec3 = [f64; 3];

#[inline]
fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),
    #[error("invalid visibility config: {0}")]
    InvalidVisibility(String),
}

/// Walker pattern of `n_planes x sats_per_plane` satellites on circular orbits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkerConstellation {
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub n_planes: u32,
    pub sats_per_plane: u32,
    pub phasing_factor: u32,
    pub raan_spread_deg: f64,
}

impl Default for WalkerConstellation {
    /// 53 deg Walker-delta shell of 8 planes x 8 satellites at 800 km.
    fn default() -> Self {
        Self {
            altitude_km: 800.0,
            inclination_deg: 53.0,
            n_planes: 8,
            sats_per_plane: 8,
            phasing_factor: 1,
            raan_spread_deg: 360.0,
        }
    }
}

impl WalkerConstellation {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.altitude_km > 0.0 && self.altitude_km.is_finite()) {
            out.push(format!("altitude_km must be > 0 (got {})", self.altitude_km));
        }
        if !(0.0..=180.0).contains(&self.inclination_deg) {
            out.push(format!(
                "inclination_deg must lie in [0, 180] (got {})",
                self.inclination_deg
            ));
        }
        if self.n_planes < 1 {
            out.push("planes must be >= 1".to_string());
        }
        if self.sats_per_plane < 1 {
            out.push("sats_per_plane must be >= 1".to_string());
        }
        if self.n_planes >= 1 && self.phasing_factor >= self.n_planes {
            out.push(format!(
                "phasing must lie in [0, planes) (got {} with {} planes)",
                self.phasing_factor, self.n_planes
            ));
        }
        if !(self.raan_spread_deg > 0.0 && self.raan_spread_deg <= 360.0) {
            out.push(format!(
                "raan_spread_deg must lie in (0, 360] (got {})",
                self.raan_spread_deg
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<(), OrbitError> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(OrbitError::InvalidConstellation(p.join("; ")))
        }
    }

    pub fn total(&self) -> usize {
        self.n_planes as usize * self.sats_per_plane as usize
    }

    pub fn semi_major_axis_m(&self) -> f64 {
        EARTH_RADIUS_M + self.altitude_km * 1e3
    }

    /// Mean motion in rad/s.
    pub fn mean_motion(&self) -> f64 {
        (EARTH_MU / self.semi_major_axis_m().powi(3)).sqrt()
    }

    pub fn period_s(&self) -> f64 {
        std::f64::consts::TAU / self.mean_motion()
    }

    /// Inertial positions at time `t`, indexed like [`propagate`].
    pub fn inertial_positions(&self, t: f64) -> Vec<Vec3> {
        let a = self.semi_major_axis_m();
        let n = self.mean_motion();
        let inc = self.inclination_deg.to_radians();
        let (planes, per_plane) = (self.n_planes as f64, self.sats_per_plane as f64);
        let total = planes * per_plane;
        let mut out = Vec::with_capacity(self.total());
        for p in 0..self.n_planes {
            let raan = (p as f64 * self.raan_spread_deg / planes).to_radians();
            let (sin_raan, cos_raan) = raan.sin_cos();
            for s in 0..self.sats_per_plane {
                let u0 = s as f64 * 360.0 / per_plane
                    + p as f64 * self.phasing_factor as f64 * 360.0 / total;
                let u = u0.to_radians() + n * t;
                let (sin_u, cos_u) = u.sin_cos();
                out.push([
                    a * (cos_raan * cos_u - sin_raan * sin_u * inc.cos()),
                    a * (sin_raan * cos_u + cos_raan * sin_u * inc.cos()),
                    a * (sin_u * inc.sin()),
                ]);
            }
        }
        out
    }
}

/// Earth-fixed satellite position at one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatState {
    pub sat_id: u32,
    pub position_ecef: Vec3,
    pub epoch_s: f64,
}

/// Rotates an inertial vector into the Earth-fixed frame at time `t`.
pub fn inertial_to_ecef(r: Vec3, t: f64) -> Vec3 {
    let (s, c) = (EARTH_ROTATION_RATE * t).sin_cos();
    [c * r[0] + s * r[1], -s * r[0] + c * r[1], r[2]]
}

pub fn ecef_to_inertial(r: Vec3, t: f64) -> Vec3 {
    let (s, c) = (EARTH_ROTATION_RATE * t).sin_cos();
    [c * r[0] - s * r[1], s * r[0] + c * r[1], r[2]]
}

/// Propagates every satellite to time `t` (seconds since simulation start).
///
/// Plane `p` has RAAN `p * raan_spread / P`; satellite `s` in that plane starts
/// at argument of latitude `s * 360 / S + p * F * 360 / (P * S)`. Satellite ids
/// run plane-major: `p * S + s`.
pub fn propagate(constellation: &WalkerConstellation, t: f64) -> Vec<SatState> {
    constellation
        .inertial_positions(t)
        .into_iter()
        .enumerate()
        .map(|(i, r)| SatState {
            sat_id: i as u32,
            position_ecef: inertial_to_ecef(r, t),
            epoch_s: t,
        })
        .collect()
}

/// Point on or above the spherical Earth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticPoint {
    pub lat: f64,
    pub lon: f64,
    pub alt_m: f64,
}

impl GeodeticPoint {
    pub fn surface(lat: f64, lon: f64) -> Self {
        Self { lat, lon, alt_m: 0.0 }
    }

    pub fn to_ecef(&self) -> Vec3 {
        let r = EARTH_RADIUS_M + self.alt_m;
        let (slat, clat) = self.lat.to_radians().sin_cos();
        let (slon, clon) = self.lon.to_radians().sin_cos();
        [r * clat * clon, r * clat * slon, r * slat]
    }

    pub fn from_ecef(r: Vec3) -> Self {
        let rho = norm(r);
        let lat = (r[2] / rho).clamp(-1.0, 1.0).asin().to_degrees();
        let lon = crate::geogrid::wrap_lon(r[1].atan2(r[0]).to_degrees());
        Self {
            lat,
            lon,
            alt_m: rho - EARTH_RADIUS_M,
        }
    }
}

fn elevation_from(obs: Vec3, up: Vec3, sat: Vec3) -> f64 {
    let los = [sat[0] - obs[0], sat[1] - obs[1], sat[2] - obs[2]];
    let range = norm(los);
    if range == 0.0 {
        return 90.0;
    }
    (dot(los, up) / range).clamp(-1.0, 1.0).asin().to_degrees()
}

/// Angle between the observer's local horizontal plane and the line of sight,
/// in degrees within [-90, 90].
pub fn elevation_angle(observer: &GeodeticPoint, sat: &SatState) -> f64 {
    let obs = observer.to_ecef();
    let r = norm(obs);
    let up = [obs[0] / r, obs[1] / r, obs[2] / r];
    elevation_from(obs, up, sat.position_ecef)
}

/// Time sampling and elevation mask for the visibility layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityConfig {
    pub min_elevation_deg: f64,
    pub window_s: f64,
    pub step_s: f64,
}

impl VisibilityConfig {
    /// One orbital period sampled every 30 s above 10 degrees.
    pub fn for_constellation(c: &WalkerConstellation) -> Self {
        Self {
            min_elevation_deg: 10.0,
            window_s: c.period_s(),
            step_s: 30.0,
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(0.0..90.0).contains(&self.min_elevation_deg) {
            out.push(format!(
                "min_elevation_deg must lie in [0, 90) (got {})",
                self.min_elevation_deg
            ));
        }
        if !(self.window_s > 0.0 && self.window_s.is_finite()) {
            out.push(format!("window_s must be > 0 (got {})", self.window_s));
        }
        if !(self.step_s > 0.0 && self.step_s <= self.window_s) {
            out.push(format!(
                "step_s must lie in (0, window_s] (got {})",
                self.step_s
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<(), OrbitError> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(OrbitError::InvalidVisibility(p.join("; ")))
        }
    }

    /// Sample epochs `0, step, 2 step, ...` not exceeding the window.
    pub fn sample_times(&self) -> Vec<f64> {
        let n = (self.window_s / self.step_s + 1e-9).floor() as usize + 1;
        (0..n).map(|k| k as f64 * self.step_s).collect()
    }
}

/// Anything that yields Earth-fixed satellite positions over time.
pub trait SatelliteSource: Sync {
    fn states_at(&self, t: f64) -> Vec<SatState>;
}

impl SatelliteSource for WalkerConstellation {
    fn states_at(&self, t: f64) -> Vec<SatState> {
        propagate(self, t)
    }
}

/// Fixed Earth-fixed positions that do not move with time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Snapshot(pub Vec<SatState>);

impl SatelliteSource for Snapshot {
    fn states_at(&self, _t: f64) -> Vec<SatState> {
        self.0.clone()
    }
}

/// Per-cell visibility tallies over all time samples.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityCounts {
    pub spec: GridSpec,
    pub n_samples: usize,
    /// Sum over samples of the number of satellites above the mask.
    pub sat_samples: Vec<u32>,
    /// Number of samples with at least one satellite above the mask.
    pub covered_samples: Vec<u32>,
}

impl VisibilityCounts {
    pub fn avg_visible(&self) -> ScalarGrid {
        let n = self.n_samples as f64;
        let v = self.sat_samples.iter().map(|&c| c as f64 / n).collect();
        ScalarGrid::new(self.spec, v, "count").expect("length matches spec")
    }

    pub fn fraction(&self) -> ScalarGrid {
        let n = self.n_samples as f64;
        let v = self.covered_samples.iter().map(|&c| c as f64 / n).collect();
        ScalarGrid::new(self.spec, v, "fraction").expect("length matches spec")
    }
}

struct SubPoint {
    pos: Vec3,
    lat: f64,
    sin_lat: f64,
    cos_lat: f64,
    lon: f64,
    /// Earth central angle bounding the visible cap, padded, radians.
    cap: f64,
}

/// Central angle beyond which a satellite at radius `r_sat` cannot clear
/// `min_elevation_deg`. Used only to prune candidate cells; the decision for
/// each candidate is made by [`elevation_angle`] geometry.
fn cap_angle(r_sat: f64, min_elevation_deg: f64) -> f64 {
    let eps = min_elevation_deg.to_radians();
    let ratio = (EARTH_RADIUS_M / r_sat).min(1.0);
    (ratio * eps.cos()).acos() - eps
}

/// Tallies visibility from every cell center (altitude 0) of `spec`.
///
/// Each satellite and epoch only touches the cells inside its coverage cap,
/// padded by a small margin, and every touched cell is tested with the exact
/// elevation geometry. Counting is exact integer arithmetic, so the result is
/// independent of the thread schedule.
pub fn visibility_counts<S: SatelliteSource + ?Sized>(
    source: &S,
    spec: &GridSpec,
    cfg: &VisibilityConfig,
) -> Result<VisibilityCounts, OrbitError> {
    cfg.validate()?;
    let times = cfg.sample_times();
    let n_lon = spec.n_lon();
    const PAD: f64 = 1e-6;

    let samples: Vec<Vec<SubPoint>> = times
        .iter()
        .map(|&t| {
            source
                .states_at(t)
                .into_iter()
                .map(|s| {
                    let g = GeodeticPoint::from_ecef(s.position_ecef);
                    let lat = g.lat.to_radians();
                    let r = norm(s.position_ecef);
                    SubPoint {
                        pos: s.position_ecef,
                        lat,
                        sin_lat: lat.sin(),
                        cos_lat: lat.cos(),
                        lon: g.lon,
                        cap: cap_angle(r, cfg.min_elevation_deg) + PAD,
                    }
                })
                .collect()
        })
        .collect();

    let sin_min_el = cfg.min_elevation_deg.to_radians().sin();
    let wraps = spec.wraps_lon();
    let col_trig: Vec<(f64, f64)> = (0..n_lon)
        .map(|c| spec.col_center_lon(c).to_radians().sin_cos())
        .collect();
    let mut sat_samples = vec![0u32; spec.len()];
    let mut covered_samples = vec![0u32; spec.len()];

    sat_samples
        .par_chunks_mut(n_lon)
        .zip(covered_samples.par_chunks_mut(n_lon))
        .enumerate()
        .for_each(|(i_lat, (sat_row, cov_row))| {
            let lat = spec.row_center_lat(i_lat).to_radians();
            let (sin_lat, cos_lat) = lat.sin_cos();
            let mut last_seen = vec![usize::MAX; n_lon];
            let mut cols = Vec::new();
            for (k, subs) in samples.iter().enumerate() {
                for sp in subs {
                    if (lat - sp.lat).abs() > sp.cap {
                        continue;
                    }
                    candidate_columns(spec, wraps, sin_lat, cos_lat, sp, &mut cols);
                    for &i_lon in &cols {
                        let (sin_lon, cos_lon) = col_trig[i_lon];
                        let up = [cos_lat * cos_lon, cos_lat * sin_lon, sin_lat];
                        let los = [
                            sp.pos[0] - EARTH_RADIUS_M * up[0],
                            sp.pos[1] - EARTH_RADIUS_M * up[1],
                            sp.pos[2] - EARTH_RADIUS_M * up[2],
                        ];
                        // sin(elevation) >= sin(mask), without the asin
                        if dot(los, up) >= sin_min_el * norm(los) {
                            sat_row[i_lon] += 1;
                            if last_seen[i_lon] != k {
                                last_seen[i_lon] = k;
                                cov_row[i_lon] += 1;
                            }
                        }
                    }
                }
            }
        });

    Ok(VisibilityCounts {
        spec: *spec,
        n_samples: times.len(),
        sat_samples,
        covered_samples,
    })
}

/// Columns of one row whose centers may fall inside the satellite's cap.
fn candidate_columns(
    spec: &GridSpec,
    wraps: bool,
    sin_lat: f64,
    cos_lat: f64,
    sp: &SubPoint,
    out: &mut Vec<usize>,
) {
    out.clear();
    let n_lon = spec.n_lon();
    let denom = cos_lat * sp.cos_lat;
    let half_width = if denom <= 1e-12 {
        180.0
    } else {
        let x = (sp.cap.cos() - sin_lat * sp.sin_lat) / denom;
        if x > 1.0 {
            return;
        } else if x <= -1.0 {
            180.0
        } else {
            x.acos().to_degrees()
        }
    };
    if half_width >= 180.0 || (wraps && 2.0 * half_width + 2.0 * spec.step_lon >= 360.0) {
        out.extend(0..n_lon);
        return;
    }
    let to_col = |lon: f64| (lon - spec.lon_min) / spec.step_lon - 0.5;
    let n = n_lon as i64;
    if wraps {
        let mut centre = crate::geogrid::wrap_lon(sp.lon);
        if centre < spec.lon_min {
            centre += 360.0;
        }
        let lo = to_col(centre - half_width).floor() as i64 - 1;
        let hi = to_col(centre + half_width).ceil() as i64 + 1;
        out.extend((lo..=hi).map(|c| c.rem_euclid(n) as usize));
    } else {
        // a regional grid may sit on either side of the antimeridian
        for shift in [-360.0, 0.0, 360.0] {
            let centre = sp.lon + shift;
            let lo = (to_col(centre - half_width).floor() as i64 - 1).max(0);
            let hi = (to_col(centre + half_width).ceil() as i64 + 1).min(n - 1);
            if lo <= hi {
                out.extend(lo as usize..=hi as usize);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
}

/// Time-averaged number of satellites above the elevation mask per cell.
pub fn avg_visible_grid<S: SatelliteSource + ?Sized>(
    source: &S,
    spec: &GridSpec,
    cfg: &VisibilityConfig,
) -> Result<ScalarGrid, OrbitError> {
    Ok(visibility_counts(source, spec, cfg)?.avg_visible())
}

/// Fraction of time samples with at least one satellite above the mask.
pub fn visibility_fraction_grid<S: SatelliteSource + ?Sized>(
    source: &S,
    spec: &GridSpec,
    cfg: &VisibilityConfig,
) -> Result<ScalarGrid, OrbitError> {
    Ok(visibility_counts(source, spec, cfg)?.fraction())
}

/// Writes `sat_id,epoch_s,x_m,y_m,z_m` rows for each epoch.
pub fn write_snapshot_csv<W: std::io::Write>(
    w: W,
    states: &[SatState],
) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["sat_id", "epoch_s", "x_m", "y_m", "z_m"])?;
    for s in states {
        wtr.write_record([
            s.sat_id.to_string(),
            s.epoch_s.to_string(),
            s.position_ecef[0].to_string(),
            s.position_ecef[1].to_string(),
            s.position_ecef[2].to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
