//! Run configuration.
//!
//! The on-disk form is TOML with one table per concern (`grid`,
//! `constellation`, `visibility`, `weather`, `traffic`, `masks`, `output`).
//! Every key except the three input raster paths has a default. Relative paths
//! resolve against the directory holding the config file.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atmos::CoefficientTable;
use crate::demand::TrafficParams;
use crate::geogrid::GridSpec;
use crate::masks::GeoPoliticalSource;
use crate::orbits::{VisibilityConfig, WalkerConstellation};

pub const CASE_STUDY_FREQUENCIES_GHZ: [f64; 4] = [19.7, 30.0, 40.5, 47.2];
pub const DEFAULT_CLASS_EDGES: [f64; 4] = [1.0, 10.0, 33.0, 100.0];
pub const DEFAULT_GEO_SEED: u64 = 2023;

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigIssue {
    MissingKey(String),
    Invalid { key: String, message: String },
    FileNotFound { layer: String, path: PathBuf },
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissingKey(k) => write!(f, "missing required key `{k}`"),
            Self::Invalid { key, message } => write!(f, "`{key}`: {message}"),
            Self::FileNotFound { layer, path } => {
                write!(f, "{layer} layer: file not found: {}", path.display())
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config syntax error: {0}")]
    Parse(String),
    #[error("invalid config:\n{}", render_issues(.0))]
    Invalid(Vec<ConfigIssue>),
}

fn render_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  - {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl ConfigError {
    pub fn issues(&self) -> &[ConfigIssue] {
        match self {
            Self::Invalid(v) => v,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RainThresholdScope {
    /// One threshold from the worst case over all frequencies.
    Combined,
    /// One threshold per frequency grid; a cell must pass all of them.
    PerFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisibilitySettings {
    pub min_elevation_deg: f64,
    pub window_s: f64,
    pub step_s: f64,
    pub min_visible_sats: f64,
    /// Optional extra criterion on the visibility-over-time grid.
    pub min_visibility_fraction: Option<f64>,
}

impl VisibilitySettings {
    pub fn sampling(&self) -> VisibilityConfig {
        VisibilityConfig {
            min_elevation_deg: self.min_elevation_deg,
            window_s: self.window_s,
            step_s: self.step_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeatherSettings {
    pub frequencies_ghz: Vec<f64>,
    pub polarization_tilt_deg: f64,
    pub rain_height_km: f64,
    pub elevation_deg: f64,
    pub rain_map: String,
    pub coefficients: Option<String>,
    pub rain_max_fraction: f64,
    pub threshold_scope: RainThresholdScope,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrafficSettings {
    pub population: String,
    #[serde(flatten)]
    pub params: TrafficParams,
    pub traffic_min_mbps_km2: f64,
    pub class_edges: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskSettings {
    pub terrain: String,
    pub require_land: bool,
    pub require_geo_allowed: bool,
    pub altitude_max_m: Option<f64>,
    pub geopolitical: GeoPoliticalSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Artifact {
    Report,
    Csv,
    Geojson,
    Masks,
    Grids,
}

impl Artifact {
    pub const ALL: [Artifact; 5] = [Self::Report, Self::Csv, Self::Geojson, Self::Masks, Self::Grids];

    pub fn name(self) -> &'static str {
        match self {
            Self::Report => "report",
            Self::Csv => "csv",
            Self::Geojson => "geojson",
            Self::Masks => "masks",
            Self::Grids => "grids",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSettings {
    pub directory: PathBuf,
    pub emit: Vec<Artifact>,
}

/// Thresholds applied to the criterion layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdConfig {
    pub rain_max_fraction: f64,
    pub min_visible_sats: f64,
    pub traffic_min_mbps_km2: f64,
    pub require_land: bool,
    pub require_geo_allowed: bool,
    pub altitude_max_m: Option<f64>,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            rain_max_fraction: 0.25,
            min_visible_sats: 3.0,
            traffic_min_mbps_km2: 33.0,
            require_land: true,
            require_geo_allowed: true,
            altitude_max_m: None,
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub constellation: WalkerConstellation,
    pub visibility: VisibilitySettings,
    pub weather: WeatherSettings,
    pub traffic: TrafficSettings,
    pub masks: MaskSettings,
    #[serde(skip)]
    pub output: OutputSettings,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    /// Defaults everywhere, with the three raster paths supplied.
    pub fn with_inputs(rain_map: &str, population: &str, terrain: &str) -> Self {
        let constellation = WalkerConstellation::default();
        let t = ThresholdConfig::default();
        Self {
            grid: GridSpec::global(0.1).expect("valid"),
            constellation,
            visibility: VisibilitySettings {
                min_elevation_deg: 10.0,
                window_s: constellation.period_s(),
                step_s: 30.0,
                min_visible_sats: t.min_visible_sats,
                min_visibility_fraction: None,
            },
            weather: WeatherSettings {
                frequencies_ghz: CASE_STUDY_FREQUENCIES_GHZ.to_vec(),
                polarization_tilt_deg: 45.0,
                rain_height_km: 5.0,
                elevation_deg: 10.0,
                rain_map: rain_map.to_string(),
                coefficients: None,
                rain_max_fraction: t.rain_max_fraction,
                threshold_scope: RainThresholdScope::Combined,
            },
            traffic: TrafficSettings {
                population: population.to_string(),
                params: TrafficParams::default(),
                traffic_min_mbps_km2: t.traffic_min_mbps_km2,
                class_edges: DEFAULT_CLASS_EDGES,
            },
            masks: MaskSettings {
                terrain: terrain.to_string(),
                require_land: t.require_land,
                require_geo_allowed: t.require_geo_allowed,
                altitude_max_m: t.altitude_max_m,
                geopolitical: GeoPoliticalSource::Random {
                    seed: DEFAULT_GEO_SEED,
                    blocked_fraction: 0.1,
                },
            },
            output: OutputSettings {
                directory: PathBuf::from("out"),
                emit: vec![Artifact::Report, Artifact::Csv, Artifact::Geojson],
            },
            base_dir: PathBuf::from("."),
        }
    }

    pub fn thresholds(&self) -> ThresholdConfig {
        ThresholdConfig {
            rain_max_fraction: self.weather.rain_max_fraction,
            min_visible_sats: self.visibility.min_visible_sats,
            traffic_min_mbps_km2: self.traffic.traffic_min_mbps_km2,
            require_land: self.masks.require_land,
            require_geo_allowed: self.masks.require_geo_allowed,
            altitude_max_m: self.masks.altitude_max_m,
        }
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// The coefficient table named by the config, or the bundled one.
    pub fn coefficient_table(&self) -> Result<CoefficientTable, crate::atmos::AtmosError> {
        match &self.weather.coefficients {
            Some(p) => CoefficientTable::from_path(self.resolve(p)),
            None => Ok(CoefficientTable::bundled()),
        }
    }

    /// Every invariant violation, including missing input files.
    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let mut bad = |key: &str, message: String| {
            out.push(ConfigIssue::Invalid {
                key: key.to_string(),
                message,
            })
        };
        for p in self.grid.problems() {
            bad("grid", p);
        }
        for p in self.constellation.problems() {
            bad("constellation", p);
        }
        for p in self.visibility.sampling().problems() {
            bad("visibility", p);
        }
        if !(self.visibility.min_visible_sats >= 0.0 && self.visibility.min_visible_sats.is_finite()) {
            bad(
                "visibility.min_visible_sats",
                format!("must be >= 0 (got {})", self.visibility.min_visible_sats),
            );
        }
        if let Some(f) = self.visibility.min_visibility_fraction {
            if !(f > 0.0 && f <= 1.0) {
                bad("visibility.min_visibility_fraction", format!("must lie in (0, 1] (got {f})"));
            }
        }

        let w = &self.weather;
        if w.frequencies_ghz.is_empty() {
            bad("weather.frequencies_ghz", "must list at least one frequency".into());
        }
        if !(w.rain_height_km > 0.0 && w.rain_height_km.is_finite()) {
            bad("weather.rain_height_km", format!("must be > 0 (got {})", w.rain_height_km));
        }
        if !(5.0..=90.0).contains(&w.elevation_deg) {
            bad(
                "weather.elevation_deg",
                format!("must lie in [5, 90] (got {})", w.elevation_deg),
            );
        }
        if !(0.0..=90.0).contains(&w.polarization_tilt_deg) {
            bad(
                "weather.polarization_tilt_deg",
                format!("must lie in [0, 90] (got {})", w.polarization_tilt_deg),
            );
        }
        if !(w.rain_max_fraction > 0.0 && w.rain_max_fraction <= 1.0) {
            bad(
                "weather.rain_max_fraction",
                format!("must lie in (0, 1] (got {})", w.rain_max_fraction),
            );
        }
        let coeff_missing = w
            .coefficients
            .as_deref()
            .map(|p| self.resolve(p))
            .filter(|p| !p.is_file());
        match coeff_missing {
            Some(path) => out.push(ConfigIssue::FileNotFound {
                layer: "coefficients".into(),
                path,
            }),
            None => match self.coefficient_table() {
                Ok(table) => {
                    let (lo, hi) = table.range_ghz();
                    for f in &w.frequencies_ghz {
                        if !table.contains(*f) || !(1.0..=100.0).contains(f) {
                            out.push(ConfigIssue::Invalid {
                                key: "weather.frequencies_ghz".into(),
                                message: format!("{f} GHz outside the coefficient table range [{lo}, {hi}]"),
                            });
                        }
                    }
                }
                Err(e) => out.push(ConfigIssue::Invalid {
                    key: "weather.coefficients".into(),
                    message: e.to_string(),
                }),
            },
        }

        let t = &self.traffic;
        for p in t.params.problems() {
            out.push(ConfigIssue::Invalid {
                key: "traffic".into(),
                message: p,
            });
        }
        if !t.traffic_min_mbps_km2.is_finite() {
            out.push(ConfigIssue::Invalid {
                key: "traffic.traffic_min_mbps_km2".into(),
                message: "must be finite".into(),
            });
        }
        if t.class_edges.windows(2).any(|e| !(e[0] < e[1])) {
            out.push(ConfigIssue::Invalid {
                key: "traffic.class_edges".into(),
                message: "must be strictly ascending".into(),
            });
        }

        if let Some(a) = self.masks.altitude_max_m {
            if !a.is_finite() {
                out.push(ConfigIssue::Invalid {
                    key: "masks.altitude_max_m".into(),
                    message: "must be finite".into(),
                });
            }
        }
        match &self.masks.geopolitical {
            GeoPoliticalSource::Random { blocked_fraction, .. } => {
                if !(0.0..=1.0).contains(blocked_fraction) {
                    out.push(ConfigIssue::Invalid {
                        key: "masks.geopolitical.blocked_fraction".into(),
                        message: format!("must lie in [0, 1] (got {blocked_fraction})"),
                    });
                }
            }
            GeoPoliticalSource::File { path } => {
                self.check_file("geopolitical", path, &mut out);
            }
        }
        self.check_file("rain", &self.weather.rain_map, &mut out);
        self.check_file("traffic", &self.traffic.population, &mut out);
        self.check_file("terrain", &self.masks.terrain, &mut out);
        out
    }

    fn check_file(&self, layer: &str, path: &str, out: &mut Vec<ConfigIssue>) {
        let p = self.resolve(path);
        if !p.is_file() {
            out.push(ConfigIssue::FileNotFound {
                layer: layer.to_string(),
                path: p,
            });
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(issues))
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    grid: Option<RawGrid>,
    constellation: Option<RawConstellation>,
    visibility: Option<RawVisibility>,
    weather: Option<RawWeather>,
    traffic: Option<RawTraffic>,
    masks: Option<RawMasks>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    lat_min: Option<f64>,
    lat_max: Option<f64>,
    lon_min: Option<f64>,
    lon_max: Option<f64>,
    step_lat: Option<f64>,
    step_lon: Option<f64>,
    /// Sets both steps at once.
    step: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstellation {
    altitude_km: Option<f64>,
    inclination_deg: Option<f64>,
    planes: Option<u32>,
    sats_per_plane: Option<u32>,
    phasing: Option<u32>,
    raan_spread_deg: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVisibility {
    min_elevation_deg: Option<f64>,
    window_s: Option<f64>,
    step_s: Option<f64>,
    min_visible_sats: Option<f64>,
    min_visibility_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeather {
    frequencies_ghz: Option<Vec<f64>>,
    polarization_tilt_deg: Option<f64>,
    rain_height_km: Option<f64>,
    elevation_deg: Option<f64>,
    rain_map: Option<String>,
    coefficients: Option<String>,
    rain_max_fraction: Option<f64>,
    threshold_scope: Option<RainThresholdScope>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTraffic {
    population: Option<String>,
    throughput_per_user_mbps: Option<f64>,
    penetration_rate: Option<f64>,
    concurrency_rate: Option<f64>,
    traffic_min_mbps_km2: Option<f64>,
    class_edges: Option<[f64; 4]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMasks {
    terrain: Option<String>,
    require_land: Option<bool>,
    require_geo_allowed: Option<bool>,
    altitude_max_m: Option<f64>,
    geopolitical: Option<RawGeo>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeo {
    mode: Option<String>,
    seed: Option<u64>,
    blocked_fraction: Option<f64>,
    path: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Option<String>,
    emit: Option<Vec<String>>,
}

/// Parses config text. `base_dir` anchors relative paths.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut issues = Vec::new();

    let weather = raw.weather.unwrap_or_default();
    let traffic = raw.traffic.unwrap_or_default();
    let masks = raw.masks.unwrap_or_default();
    let mut required = |v: Option<String>, key: &str| {
        v.unwrap_or_else(|| {
            issues.push(ConfigIssue::MissingKey(key.to_string()));
            String::new()
        })
    };
    let rain_map = required(weather.rain_map.clone(), "weather.rain_map");
    let population = required(traffic.population.clone(), "traffic.population");
    let terrain = required(masks.terrain.clone(), "masks.terrain");

    let mut cfg = RunConfig::with_inputs(&rain_map, &population, &terrain);
    cfg.base_dir = base_dir.to_path_buf();

    let g = raw.grid.unwrap_or_default();
    let d = cfg.grid;
    cfg.grid = GridSpec {
        lat_min: g.lat_min.unwrap_or(d.lat_min),
        lat_max: g.lat_max.unwrap_or(d.lat_max),
        lon_min: g.lon_min.unwrap_or(d.lon_min),
        lon_max: g.lon_max.unwrap_or(d.lon_max),
        step_lat: g.step_lat.or(g.step).unwrap_or(d.step_lat),
        step_lon: g.step_lon.or(g.step).unwrap_or(d.step_lon),
    };

    let c = raw.constellation.unwrap_or_default();
    let d = cfg.constellation;
    cfg.constellation = WalkerConstellation {
        altitude_km: c.altitude_km.unwrap_or(d.altitude_km),
        inclination_deg: c.inclination_deg.unwrap_or(d.inclination_deg),
        n_planes: c.planes.unwrap_or(d.n_planes),
        sats_per_plane: c.sats_per_plane.unwrap_or(d.sats_per_plane),
        phasing_factor: c.phasing.unwrap_or(d.phasing_factor),
        raan_spread_deg: c.raan_spread_deg.unwrap_or(d.raan_spread_deg),
    };

    let v = raw.visibility.unwrap_or_default();
    let min_el = v.min_elevation_deg.unwrap_or(cfg.visibility.min_elevation_deg);
    cfg.visibility = VisibilitySettings {
        min_elevation_deg: min_el,
        window_s: v.window_s.unwrap_or_else(|| {
            if cfg.constellation.problems().is_empty() {
                cfg.constellation.period_s()
            } else {
                cfg.visibility.window_s
            }
        }),
        step_s: v.step_s.unwrap_or(cfg.visibility.step_s),
        min_visible_sats: v.min_visible_sats.unwrap_or(cfg.visibility.min_visible_sats),
        min_visibility_fraction: v.min_visibility_fraction,
    };

    let w = &mut cfg.weather;
    if let Some(f) = weather.frequencies_ghz {
        w.frequencies_ghz = f;
    }
    w.polarization_tilt_deg = weather.polarization_tilt_deg.unwrap_or(w.polarization_tilt_deg);
    w.rain_height_km = weather.rain_height_km.unwrap_or(w.rain_height_km);
    w.elevation_deg = weather.elevation_deg.unwrap_or(min_el);
    w.coefficients = weather.coefficients;
    w.rain_max_fraction = weather.rain_max_fraction.unwrap_or(w.rain_max_fraction);
    w.threshold_scope = weather.threshold_scope.unwrap_or(w.threshold_scope);

    let t = &mut cfg.traffic;
    let p = &mut t.params;
    p.throughput_per_user_mbps = traffic.throughput_per_user_mbps.unwrap_or(p.throughput_per_user_mbps);
    p.penetration_rate = traffic.penetration_rate.unwrap_or(p.penetration_rate);
    p.concurrency_rate = traffic.concurrency_rate.unwrap_or(p.concurrency_rate);
    t.traffic_min_mbps_km2 = traffic.traffic_min_mbps_km2.unwrap_or(t.traffic_min_mbps_km2);
    t.class_edges = traffic.class_edges.unwrap_or(t.class_edges);

    let m = &mut cfg.masks;
    m.require_land = masks.require_land.unwrap_or(m.require_land);
    m.require_geo_allowed = masks.require_geo_allowed.unwrap_or(m.require_geo_allowed);
    m.altitude_max_m = masks.altitude_max_m;
    if let Some(geo) = masks.geopolitical {
        match geo.mode.as_deref().unwrap_or("random") {
            "random" => {
                m.geopolitical = GeoPoliticalSource::Random {
                    seed: geo.seed.unwrap_or(DEFAULT_GEO_SEED),
                    blocked_fraction: geo.blocked_fraction.unwrap_or(0.1),
                }
            }
            "file" => match geo.path {
                Some(path) => m.geopolitical = GeoPoliticalSource::File { path },
                None => issues.push(ConfigIssue::MissingKey("masks.geopolitical.path".into())),
            },
            other => issues.push(ConfigIssue::Invalid {
                key: "masks.geopolitical.mode".into(),
                message: format!("expected `random` or `file`, got `{other}`"),
            }),
        }
    }

    if let Some(o) = raw.output {
        if let Some(dir) = o.directory {
            cfg.output.directory = PathBuf::from(dir);
        }
        if let Some(emit) = o.emit {
            cfg.output.emit = parse_emit(&emit).unwrap_or_else(|bad| {
                issues.push(ConfigIssue::Invalid {
                    key: "output.emit".into(),
                    message: format!("unknown artifact `{bad}`"),
                });
                Vec::new()
            });
        }
    }

    let missing: Vec<_> = issues.clone();
    let mut all = missing;
    // file checks for keys that are absent would only repeat the missing-key issue
    all.extend(cfg.issues().into_iter().filter(|i| match i {
        ConfigIssue::FileNotFound { path, .. } => path != &cfg.base_dir.join(""),
        _ => true,
    }));
    if all.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(all))
    }
}

/// Parses artifact names, returning the first unknown one on failure.
pub fn parse_emit<S: AsRef<str>>(names: &[S]) -> Result<Vec<Artifact>, String> {
    let mut out = Vec::new();
    for n in names {
        for part in n.as_ref().split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let a = Artifact::parse(part).ok_or_else(|| part.to_string())?;
            if !out.contains(&a) {
                out.push(a);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Reads and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let base = if base.as_os_str().is_empty() {
        PathBuf::from(".")
    } else {
        base
    };
    parse_config(&text, &base)
}
