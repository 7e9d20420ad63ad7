//! Seeded synthetic input rasters.
//!
//! Real rain, population and terrain datasets are large and licensed
//! separately. These stand-ins keep the same units and rough global structure
//! (continents, a tropical rain belt, dense cities) so the whole pipeline can
//! run offline. All values come from counter-based draws, so a seed and a grid
//! spec fully determine the output.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::geogrid::ascii::write_grid_file;
use crate::geogrid::{GridSpec, ScalarGrid, NODATA};
use crate::masks::cell_draw;

/// Shelf depth below which sea cells become NODATA.
const SHELF_DEPTH_M: f64 = -300.0;

struct Draws {
    seed: u64,
    next: u64,
}

impl Draws {
    fn new(seed: u64, stream: u64) -> Self {
        Self {
            seed: seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15),
            next: 0,
        }
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = cell_draw(self.seed, self.next);
        self.next += 1;
        lo + (hi - lo) * u
    }
}

fn unit(lat: f64, lon: f64) -> [f64; 3] {
    let (la, lo) = (lat.to_radians(), lon.to_radians());
    [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
}

/// Central angle in degrees between a unit vector and a cell center.
fn angle_deg(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0).acos().to_degrees()
}

struct Bump {
    center: [f64; 3],
    lat: f64,
    lon: f64,
    radius_deg: f64,
    amplitude: f64,
}

fn continents(seed: u64) -> Vec<Bump> {
    let mut d = Draws::new(seed, 1);
    (0..9)
        .map(|_| {
            let lat = d.uniform(-50.0, 65.0);
            let lon = d.uniform(-180.0, 180.0);
            Bump {
                center: unit(lat, lon),
                lat,
                lon,
                radius_deg: d.uniform(12.0, 28.0),
                amplitude: d.uniform(700.0, 2500.0),
            }
        })
        .collect()
}

fn cities(seed: u64, land: &[Bump]) -> Vec<Bump> {
    let mut d = Draws::new(seed, 2);
    (0..48)
        .map(|i| {
            let c = &land[i % land.len()];
            let lat = (c.lat + d.uniform(-0.6, 0.6) * c.radius_deg).clamp(-80.0, 80.0);
            let lon = c.lon + d.uniform(-0.6, 0.6) * c.radius_deg;
            Bump {
                center: unit(lat, lon),
                lat,
                lon,
                radius_deg: d.uniform(0.6, 3.0),
                amplitude: d.uniform(1500.0, 9000.0),
            }
        })
        .collect()
}

fn elevation(lat: f64, lon: f64, p: &[f64; 3], land: &[Bump], phase: f64) -> f64 {
    let relief: f64 = land
        .iter()
        .map(|b| {
            let x = angle_deg(&b.center, p) / b.radius_deg;
            b.amplitude * (-x * x).exp()
        })
        .sum();
    relief - 450.0 + 120.0 * (3.0 * lat.to_radians()).sin() * (5.0 * lon.to_radians() + phase).cos()
}

/// Terrain elevation in meters; NODATA beyond the continental shelf.
pub fn terrain(spec: &GridSpec, seed: u64) -> ScalarGrid {
    let land = continents(seed);
    let phase = Draws::new(seed, 3).uniform(0.0, std::f64::consts::TAU);
    ScalarGrid::from_fn(*spec, "m", |_, lat, lon| {
        let h = elevation(lat, lon, &unit(lat, lon), &land, phase).round();
        if h < SHELF_DEPTH_M {
            NODATA
        } else {
            h
        }
    })
    .expect("finite values")
}

/// Rain rate exceeded 0.01% of an average year, mm/h.
pub fn rain_rate(spec: &GridSpec, seed: u64) -> ScalarGrid {
    let mut d = Draws::new(seed, 4);
    let (phase, itcz) = (d.uniform(0.0, std::f64::consts::TAU), d.uniform(-4.0, 8.0));
    ScalarGrid::from_fn(*spec, "mm/h", |_, lat, lon| {
        let tropics = (-((lat - itcz) / 16.0).powi(2)).exp() * (0.75 + 0.25 * (2.0 * lon.to_radians() + phase).sin());
        let storm_tracks = (-((lat.abs() - 40.0) / 10.0).powi(2)).exp();
        (100.0 * (6.0 + 90.0 * tropics + 14.0 * storm_tracks)).round() / 100.0
    })
    .expect("finite values")
}

/// Population density in persons/km2; zero at sea.
pub fn population(spec: &GridSpec, seed: u64) -> ScalarGrid {
    let land = continents(seed);
    let towns = cities(seed, &land);
    let phase = Draws::new(seed, 3).uniform(0.0, std::f64::consts::TAU);
    ScalarGrid::from_fn(*spec, "persons/km2", |_, lat, lon| {
        let p = unit(lat, lon);
        if elevation(lat, lon, &p, &land, phase).round() <= 0.0 {
            return 0.0;
        }
        let urban: f64 = towns
            .iter()
            .map(|c| {
                let x = angle_deg(&c.center, &p) / c.radius_deg;
                if x > 6.0 {
                    0.0
                } else {
                    c.amplitude * (-x * x).exp()
                }
            })
            .sum();
        (10.0 * (15.0 + urban)).round() / 10.0
    })
    .expect("finite values")
}

/// File names written by [`write_case_study`].
pub const RAIN_FILE: &str = "rain_r001.asc";
pub const POPULATION_FILE: &str = "population.asc";
pub const TERRAIN_FILE: &str = "terrain.asc";
pub const CONFIG_FILE: &str = "case_study.toml";

/// Writes the three rasters on `spec` plus a config that runs the planner on
/// them with default thresholds. Returns the config path.
pub fn write_case_study(dir: &Path, spec: &GridSpec, seed: u64) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    write_grid_file(&rain_rate(spec, seed), dir.join(RAIN_FILE))?;
    write_grid_file(&population(spec, seed), dir.join(POPULATION_FILE))?;
    write_grid_file(&terrain(spec, seed), dir.join(TERRAIN_FILE))?;
    let config = format!(
        "[grid]\n\
         lat_min = {}\nlat_max = {}\nlon_min = {}\nlon_max = {}\nstep_lat = {}\nstep_lon = {}\n\n\
         [weather]\nrain_map = \"{RAIN_FILE}\"\n\n\
         [traffic]\npopulation = \"{POPULATION_FILE}\"\n\n\
         [masks]\nterrain = \"{TERRAIN_FILE}\"\n\n\
         [masks.geopolitical]\nmode = \"random\"\nseed = {seed}\nblocked_fraction = 0.1\n",
        fmt(spec.lat_min),
        fmt(spec.lat_max),
        fmt(spec.lon_min),
        fmt(spec.lon_max),
        fmt(spec.step_lat),
        fmt(spec.step_lon),
    );
    let path = dir.join(CONFIG_FILE);
    fs::write(&path, config)?;
    Ok(path)
}

// TOML floats need a decimal point
fn fmt(v: f64) -> String {
    let s = v.to_string();
    if s.contains('.') || s.contains('e') {
        s
    } else {
        format!("{s}.0")
    }
}
