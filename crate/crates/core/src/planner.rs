//! Criterion evaluation, mask intersection, region clustering and site
//! selection.

use std::collections::{BTreeMap, VecDeque};
use std::error::Error as StdError;
use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use crate::atmos::{
    rain_attenuation_grid, worst_case_over_frequencies, CoefficientTable, RainGridParams, RainRateMap,
};
use crate::config::{RainThresholdScope, RunConfig};
use crate::demand::{classify_density, traffic_density_grid, PopulationGrid};
use crate::geogrid::ascii::{read_grid_file, read_mask_file, AsciiError};
use crate::geogrid::{
    intersect, is_nodata, resample_mask, selection_fraction, threshold, BoolMask, CellIndex, GridError, GridSpec,
    ScalarGrid, ThresholdMode,
};
use crate::masks::{altitude_grid, gen_geopolitical_mask, land_mask, GeoPoliticalSource, TerrainGrid};
use crate::orbits::visibility_counts;

type BoxError = Box<dyn StdError + Send + Sync>;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("{layer} layer: cannot load {}: {source}", path.display())]
    Input {
        layer: String,
        path: PathBuf,
        source: AsciiError,
    },
    #[error("{layer} layer: {source}")]
    Layer { layer: String, source: BoxError },
    #[error("{0} layer: grid holds no data")]
    EmptyData(String),
    #[error("duplicate criterion name `{0}`")]
    DuplicateLayer(String),
    #[error("unknown layer `{name}`; available layers: {}", available.join(", "))]
    UnknownLayer { name: String, available: Vec<String> },
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl PlanError {
    fn layer(layer: &str, source: impl Into<BoxError>) -> Self {
        Self::Layer {
            layer: layer.to_string(),
            source: source.into(),
        }
    }
}

/// How a scalar layer turns into an accept/reject mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum Rule {
    AtMost(f64),
    AtLeast(f64),
    /// At most this fraction of the layer's own maximum.
    AtMostFractionOfMax(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerData {
    Scalar { grid: ScalarGrid, rule: Rule },
    /// A precomputed mask. `values` is what sites report for this criterion;
    /// without it they report 1.
    Mask {
        mask: BoolMask,
        values: Option<ScalarGrid>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionLayer {
    pub name: String,
    pub data: LayerData,
}

impl CriterionLayer {
    pub fn scalar(name: &str, grid: ScalarGrid, rule: Rule) -> Self {
        Self {
            name: name.to_string(),
            data: LayerData::Scalar { grid, rule },
        }
    }

    pub fn mask(name: &str, mask: BoolMask) -> Self {
        Self {
            name: name.to_string(),
            data: LayerData::Mask { mask, values: None },
        }
    }

    fn spec(&self) -> &GridSpec {
        match &self.data {
            LayerData::Scalar { grid, .. } => grid.spec(),
            LayerData::Mask { mask, .. } => mask.spec(),
        }
    }

    fn value_at(&self, flat: usize) -> f64 {
        match &self.data {
            LayerData::Scalar { grid, .. } | LayerData::Mask { values: Some(grid), .. } => grid.values()[flat],
            LayerData::Mask { mask, values: None } => f64::from(u8::from(mask.accepted()[flat])),
        }
    }
}

/// `fraction × max` over the non-NODATA cells.
pub fn resolve_rain_threshold(rain_grid: &ScalarGrid, fraction: f64) -> Result<f64, PlanError> {
    rain_grid
        .max_value()
        .map(|m| fraction * m)
        .ok_or_else(|| PlanError::EmptyData("rain".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedLayer {
    pub name: String,
    pub mask: BoolMask,
    /// The numeric threshold actually applied, when the layer has one.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub layers: Vec<EvaluatedLayer>,
    pub combined: BoolMask,
}

/// Thresholds each layer on its own, then intersects.
pub fn evaluate_layers(layers: &[CriterionLayer]) -> Result<Evaluation, PlanError> {
    let first = layers
        .first()
        .ok_or(GridError::EmptyInput("at least one criterion layer is required"))?;
    for (i, l) in layers.iter().enumerate() {
        if layers[..i].iter().any(|o| o.name == l.name) {
            return Err(PlanError::DuplicateLayer(l.name.clone()));
        }
        if l.spec() != first.spec() {
            return Err(GridError::SpecMismatch.into());
        }
    }
    let evaluated = layers
        .iter()
        .map(|l| {
            Ok(match &l.data {
                LayerData::Mask { mask, .. } => EvaluatedLayer {
                    name: l.name.clone(),
                    mask: mask.clone(),
                    threshold: None,
                },
                LayerData::Scalar { grid, rule } => {
                    let (mode, t) = match *rule {
                        Rule::AtMost(v) => (ThresholdMode::AtMost, v),
                        Rule::AtLeast(v) => (ThresholdMode::AtLeast, v),
                        Rule::AtMostFractionOfMax(f) => (
                            ThresholdMode::AtMost,
                            grid.max_value()
                                .map(|m| f * m)
                                .ok_or_else(|| PlanError::EmptyData(l.name.clone()))?,
                        ),
                    };
                    EvaluatedLayer {
                        name: l.name.clone(),
                        mask: threshold(grid, mode, t),
                        threshold: Some(t),
                    }
                }
            })
        })
        .collect::<Result<Vec<_>, PlanError>>()?;
    let refs: Vec<&BoolMask> = evaluated.iter().map(|e| &e.mask).collect();
    let combined = intersect(&refs)?;
    Ok(Evaluation {
        layers: evaluated,
        combined,
    })
}

/// A connected set of accepted cells, sorted by flat index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub region_id: usize,
    pub cells: Vec<CellIndex>,
}

/// Connected components under the 8-neighbourhood. Columns 0 and `n_lon - 1`
/// are neighbours when the grid spans the full circle of longitude.
pub fn cluster_regions(mask: &BoolMask) -> Vec<Region> {
    let spec = mask.spec();
    let (n_lat, n_lon) = (spec.n_lat(), spec.n_lon());
    let wrap = spec.wraps_lon();
    let acc = mask.accepted();
    let mut label = vec![usize::MAX; acc.len()];
    let mut regions = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..acc.len() {
        if !acc[start] || label[start] != usize::MAX {
            continue;
        }
        let id = regions.len();
        let mut cells = Vec::new();
        label[start] = id;
        queue.push_back(start);
        while let Some(f) = queue.pop_front() {
            cells.push(f);
            let (r, c) = ((f / n_lon) as isize, (f % n_lon) as isize);
            for dr in -1..=1isize {
                let rr = r + dr;
                if rr < 0 || rr >= n_lat as isize {
                    continue;
                }
                for dc in -1..=1isize {
                    let mut cc = c + dc;
                    if cc < 0 || cc >= n_lon as isize {
                        if !wrap {
                            continue;
                        }
                        cc = cc.rem_euclid(n_lon as isize);
                    }
                    let g = rr as usize * n_lon + cc as usize;
                    if acc[g] && label[g] == usize::MAX {
                        label[g] = id;
                        queue.push_back(g);
                    }
                }
            }
        }
        cells.sort_unstable();
        regions.push(Region {
            region_id: id,
            cells: cells.into_iter().map(|f| spec.unflat(f)).collect(),
        });
    }
    regions
}

fn unit_vector(lat_deg: f64, lon_deg: f64) -> [f64; 3] {
    let (lat, lon) = (lat_deg.to_radians(), lon_deg.to_radians());
    [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
}

/// Great-circle angle between two points, radians.
pub fn central_angle(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (u, v) = (unit_vector(a.0, a.1), unit_vector(b.0, b.1));
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt().atan2(dot)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Centroid {
    pub lat: f64,
    pub lon: f64,
    /// The unit vectors cancelled out; the first cell's center stands in.
    pub degenerate: bool,
}

/// Spherical centroid: mean of unit vectors, projected back to the sphere.
pub fn region_centroid(cells: &[CellIndex], spec: &GridSpec) -> Result<Centroid, GridError> {
    let first = *cells.first().ok_or(GridError::EmptyInput("region has no cells"))?;
    let mut sum = [0.0; 3];
    for &c in cells {
        let (lat, lon) = spec.cell_center(c)?;
        let u = unit_vector(lat, lon);
        for k in 0..3 {
            sum[k] += u[k];
        }
    }
    let n = cells.len() as f64;
    let mean = sum.map(|s| s / n);
    let norm = (mean[0] * mean[0] + mean[1] * mean[1] + mean[2] * mean[2]).sqrt();
    if norm < 1e-12 {
        let (lat, lon) = spec.cell_center(first)?;
        return Ok(Centroid {
            lat,
            lon,
            degenerate: true,
        });
    }
    let lat = mean[2].atan2(mean[0].hypot(mean[1])).to_degrees();
    let lon = mean[1].atan2(mean[0]).to_degrees();
    Ok(Centroid {
        lat,
        lon,
        degenerate: false,
    })
}

/// Angles closer than this are ties.
pub const TIE_TOLERANCE_RAD: f64 = 1e-12;

/// Region cell nearest the centroid; ties go to the smaller flat index.
pub fn select_site(cells: &[CellIndex], centroid: &Centroid, spec: &GridSpec) -> Result<CellIndex, GridError> {
    let mut best: Option<(f64, usize, CellIndex)> = None;
    for &c in cells {
        let d = central_angle(spec.cell_center(c)?, (centroid.lat, centroid.lon));
        let flat = spec.flat(c);
        best = match best {
            Some((bd, bf, bc)) if d > bd + TIE_TOLERANCE_RAD || (d >= bd - TIE_TOLERANCE_RAD && flat > bf) => {
                Some((bd, bf, bc))
            }
            _ => Some((d, flat, c)),
        };
    }
    best.map(|(_, _, c)| c)
        .ok_or(GridError::EmptyInput("region has no cells"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRegion {
    pub region_id: usize,
    pub cells: Vec<CellIndex>,
    pub centroid: Centroid,
    pub selected_cell: CellIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GatewaySite {
    pub gw_id: usize,
    pub lat: f64,
    pub lon: f64,
    pub region_id: usize,
    pub region_cells: usize,
    pub criterion_values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionStat {
    pub name: String,
    pub fraction: f64,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairStat {
    pub a: String,
    pub b: String,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RainThreshold {
    /// `None` for the worst case over all frequencies.
    pub frequency_ghz: Option<f64>,
    pub threshold_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionSummary {
    pub region_id: usize,
    pub n_cells: usize,
    pub centroid_lat: f64,
    pub centroid_lon: f64,
    pub degenerate_centroid: bool,
    pub selected_i_lat: usize,
    pub selected_i_lon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanReport {
    pub grid: GridSpec,
    pub n_cells: usize,
    pub per_criterion: Vec<CriterionStat>,
    pub pairwise: Vec<PairStat>,
    pub all_criteria_fraction: f64,
    pub rain_thresholds: Vec<RainThreshold>,
    pub n_regions: usize,
    pub regions: Vec<RegionSummary>,
    pub sites: Vec<GatewaySite>,
    pub config: Option<serde_json::Value>,
}

impl PlanReport {
    /// `criteria,fraction` rows: singles, pairs as `a+b`, then `all`.
    pub fn stats_rows(&self) -> Vec<(String, f64)> {
        let mut rows: Vec<(String, f64)> = self.per_criterion.iter().map(|c| (c.name.clone(), c.fraction)).collect();
        rows.extend(self.pairwise.iter().map(|p| (format!("{}+{}", p.a, p.b), p.fraction)));
        rows.push(("all".into(), self.all_criteria_fraction));
        rows
    }

    pub fn criterion_names(&self) -> Vec<&str> {
        self.per_criterion.iter().map(|c| c.name.as_str()).collect()
    }
}

/// Everything a run produces; the report plus the rasters behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub report: PlanReport,
    pub evaluation: Evaluation,
    pub regions: Vec<CandidateRegion>,
    pub layers: Vec<CriterionLayer>,
}

impl PlanOutcome {
    /// Violations of the report's structural invariants; empty when sound.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let r = &self.report;
        let single: BTreeMap<&str, f64> = r.per_criterion.iter().map(|c| (c.name.as_str(), c.fraction)).collect();
        for p in &r.pairwise {
            if r.all_criteria_fraction > p.fraction {
                out.push(format!("all > {}+{}", p.a, p.b));
            }
            if p.fraction > single[p.a.as_str()] || p.fraction > single[p.b.as_str()] {
                out.push(format!("{}+{} exceeds a single fraction", p.a, p.b));
            }
        }
        let spec = self.evaluation.combined.spec();
        let mut seen = vec![false; spec.len()];
        for reg in &self.regions {
            for c in &reg.cells {
                let f = spec.flat(*c);
                if seen[f] {
                    out.push(format!("cell {f} in two regions"));
                }
                seen[f] = true;
            }
            if !reg.cells.contains(&reg.selected_cell) {
                out.push(format!("region {} selects a foreign cell", reg.region_id));
            }
        }
        if seen != self.evaluation.combined.accepted() {
            out.push("regions do not partition the accepted cells".into());
        }
        for reg in &self.regions {
            let f = spec.flat(reg.selected_cell);
            for l in &self.evaluation.layers {
                if !l.mask.accepted()[f] {
                    out.push(format!("site of region {} rejected by {}", reg.region_id, l.name));
                }
            }
        }
        out
    }
}

/// Statistics, clustering and site selection over prepared layers.
pub fn plan_from_layers(layers: Vec<CriterionLayer>) -> Result<PlanOutcome, PlanError> {
    let evaluation = evaluate_layers(&layers)?;
    let spec = *evaluation.combined.spec();
    let per_criterion = evaluation
        .layers
        .iter()
        .map(|l| CriterionStat {
            name: l.name.clone(),
            fraction: selection_fraction(&l.mask),
            threshold: l.threshold,
        })
        .collect();
    let mut pairwise = Vec::new();
    for (i, a) in evaluation.layers.iter().enumerate() {
        for b in &evaluation.layers[i + 1..] {
            pairwise.push(PairStat {
                a: a.name.clone(),
                b: b.name.clone(),
                fraction: selection_fraction(&intersect(&[&a.mask, &b.mask])?),
            });
        }
    }

    let mut regions = Vec::new();
    for reg in cluster_regions(&evaluation.combined) {
        let centroid = region_centroid(&reg.cells, &spec)?;
        let selected_cell = select_site(&reg.cells, &centroid, &spec)?;
        regions.push(CandidateRegion {
            region_id: reg.region_id,
            cells: reg.cells,
            centroid,
            selected_cell,
        });
    }
    let sites = regions
        .iter()
        .map(|reg| {
            let (lat, lon) = spec.cell_center(reg.selected_cell)?;
            let flat = spec.flat(reg.selected_cell);
            Ok(GatewaySite {
                gw_id: reg.region_id,
                lat,
                lon,
                region_id: reg.region_id,
                region_cells: reg.cells.len(),
                criterion_values: layers.iter().map(|l| (l.name.clone(), l.value_at(flat))).collect(),
            })
        })
        .collect::<Result<Vec<_>, GridError>>()?;
    let summaries = regions
        .iter()
        .map(|reg| RegionSummary {
            region_id: reg.region_id,
            n_cells: reg.cells.len(),
            centroid_lat: reg.centroid.lat,
            centroid_lon: reg.centroid.lon,
            degenerate_centroid: reg.centroid.degenerate,
            selected_i_lat: reg.selected_cell.i_lat,
            selected_i_lon: reg.selected_cell.i_lon,
        })
        .collect();

    let report = PlanReport {
        grid: spec,
        n_cells: spec.len(),
        per_criterion,
        pairwise,
        all_criteria_fraction: selection_fraction(&evaluation.combined),
        rain_thresholds: Vec::new(),
        n_regions: regions.len(),
        regions: summaries,
        sites,
        config: None,
    };
    Ok(PlanOutcome {
        report,
        evaluation,
        regions,
        layers,
    })
}

/// Input rasters in memory. Absent entries are only an error for layers
/// that need them.
#[derive(Debug, Clone, Default)]
pub struct PlanInputs {
    pub rain_map: Option<RainRateMap>,
    pub population: Option<PopulationGrid>,
    pub terrain: Option<TerrainGrid>,
    /// Externally supplied admissibility mask, any lattice.
    pub geopolitical: Option<BoolMask>,
    pub coefficients: Option<CoefficientTable>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Rain,
    Population,
    Terrain,
    Geopolitical,
}

impl InputKind {
    pub const ALL: [InputKind; 4] = [Self::Rain, Self::Population, Self::Terrain, Self::Geopolitical];
}

impl PlanInputs {
    fn rain(&self) -> Result<&RainRateMap, PlanError> {
        self.rain_map.as_ref().ok_or_else(|| missing("rain"))
    }

    fn population(&self) -> Result<&PopulationGrid, PlanError> {
        self.population.as_ref().ok_or_else(|| missing("traffic"))
    }

    fn terrain(&self) -> Result<&TerrainGrid, PlanError> {
        self.terrain.as_ref().ok_or_else(|| missing("terrain"))
    }
}

fn missing(layer: &str) -> PlanError {
    PlanError::layer(layer, "input raster not loaded")
}

/// Reads the rasters named by the config. Only the requested kinds are read.
pub fn load_inputs(config: &RunConfig, kinds: &[InputKind]) -> Result<PlanInputs, PlanError> {
    let read = |layer: &str, rel: &str, unit: &str| {
        let path = config.resolve(rel);
        read_grid_file(&path, unit).map_err(|source| PlanError::Input {
            layer: layer.to_string(),
            path,
            source,
        })
    };
    let mut inputs = PlanInputs {
        coefficients: Some(config.coefficient_table().map_err(|e| PlanError::layer("rain", e))?),
        ..Default::default()
    };
    for kind in kinds {
        match kind {
            InputKind::Rain => {
                let g = read("rain", &config.weather.rain_map, "mm/h")?;
                inputs.rain_map = Some(RainRateMap::new(g).map_err(|e| PlanError::layer("rain", e))?);
            }
            InputKind::Population => {
                let g = read("traffic", &config.traffic.population, "persons/km2")?;
                inputs.population = Some(PopulationGrid::new(g).map_err(|e| PlanError::layer("traffic", e))?);
            }
            InputKind::Terrain => {
                inputs.terrain = Some(TerrainGrid::new(read("terrain", &config.masks.terrain, "m")?));
            }
            InputKind::Geopolitical => {
                if let GeoPoliticalSource::File { path } = &config.masks.geopolitical {
                    let path = config.resolve(path);
                    let m = read_mask_file(&path).map_err(|source| PlanError::Input {
                        layer: "geopolitical".into(),
                        path,
                        source,
                    })?;
                    inputs.geopolitical = Some(m);
                }
            }
        }
    }
    Ok(inputs)
}

fn coefficients(inputs: &PlanInputs) -> CoefficientTable {
    inputs.coefficients.clone().unwrap_or_else(CoefficientTable::bundled)
}

fn rain_grids(config: &RunConfig, inputs: &PlanInputs) -> Result<Vec<ScalarGrid>, PlanError> {
    let table = coefficients(inputs);
    let rain = inputs.rain()?;
    let w = &config.weather;
    w.frequencies_ghz
        .iter()
        .map(|&f| {
            let params = RainGridParams {
                frequency_ghz: f,
                elevation_deg: w.elevation_deg,
                polarization_tilt_deg: w.polarization_tilt_deg,
                rain_height_km: w.rain_height_km,
            };
            rain_attenuation_grid(rain, &config.grid, &params, &table).map_err(|e| PlanError::layer("rain", e))
        })
        .collect()
}

fn rain_layer(config: &RunConfig, inputs: &PlanInputs) -> Result<(CriterionLayer, Vec<RainThreshold>), PlanError> {
    let grids = rain_grids(config, inputs)?;
    let worst = worst_case_over_frequencies(&grids).map_err(|e| PlanError::layer("rain", e))?;
    let frac = config.weather.rain_max_fraction;
    match config.weather.threshold_scope {
        RainThresholdScope::Combined => {
            let t = resolve_rain_threshold(&worst, frac)?;
            let layer = CriterionLayer::scalar("rain", worst, Rule::AtMost(t));
            Ok((
                layer,
                vec![RainThreshold {
                    frequency_ghz: None,
                    threshold_db: t,
                }],
            ))
        }
        RainThresholdScope::PerFrequency => {
            let mut masks = Vec::new();
            let mut thresholds = Vec::new();
            for (g, &f) in grids.iter().zip(&config.weather.frequencies_ghz) {
                let t = resolve_rain_threshold(g, frac)?;
                masks.push(threshold(g, ThresholdMode::AtMost, t));
                thresholds.push(RainThreshold {
                    frequency_ghz: Some(f),
                    threshold_db: t,
                });
            }
            let refs: Vec<&BoolMask> = masks.iter().collect();
            let layer = CriterionLayer {
                name: "rain".into(),
                data: LayerData::Mask {
                    mask: intersect(&refs)?,
                    values: Some(worst),
                },
            };
            Ok((layer, thresholds))
        }
    }
}

fn visibility_grids(config: &RunConfig) -> Result<(ScalarGrid, ScalarGrid), PlanError> {
    let counts = visibility_counts(&config.constellation, &config.grid, &config.visibility.sampling())
        .map_err(|e| PlanError::layer("visibility", e))?;
    Ok((counts.avg_visible(), counts.fraction()))
}

fn traffic_grid(config: &RunConfig, inputs: &PlanInputs) -> Result<ScalarGrid, PlanError> {
    traffic_density_grid(inputs.population()?, &config.traffic.params, &config.grid)
        .map_err(|e| PlanError::layer("traffic", e))
}

fn geo_mask(config: &RunConfig, inputs: &PlanInputs) -> Result<BoolMask, PlanError> {
    match (&config.masks.geopolitical, &inputs.geopolitical) {
        (GeoPoliticalSource::Random { seed, blocked_fraction }, _) => {
            Ok(gen_geopolitical_mask(&config.grid, *seed, *blocked_fraction).mask)
        }
        (GeoPoliticalSource::File { .. }, Some(m)) => Ok(resample_mask(m, &config.grid)),
        (GeoPoliticalSource::File { .. }, None) => Err(missing("geopolitical")),
    }
}

/// Criterion layers in registry order, plus the resolved rain thresholds.
pub fn build_layers(
    config: &RunConfig,
    inputs: &PlanInputs,
) -> Result<(Vec<CriterionLayer>, Vec<RainThreshold>), PlanError> {
    let t = config.thresholds();
    let spec = config.grid;
    // the visibility sweep dominates the run time; overlap it with the rest
    let (vis, rest) = rayon::join(
        || visibility_grids(config),
        || -> Result<_, PlanError> {
            let rain = rain_layer(config, inputs)?;
            let traffic = traffic_grid(config, inputs)?;
            let altitude = if t.require_land || t.altitude_max_m.is_some() {
                Some(altitude_grid(inputs.terrain()?, &spec))
            } else {
                None
            };
            let geo = if t.require_geo_allowed {
                Some(geo_mask(config, inputs)?)
            } else {
                None
            };
            Ok((rain, traffic, altitude, geo))
        },
    );
    let (count, fraction) = vis?;
    let ((rain, thresholds), traffic, altitude, geo) = rest?;

    let mut layers = vec![
        rain,
        CriterionLayer::scalar("visibility", count, Rule::AtLeast(t.min_visible_sats)),
    ];
    if let Some(f) = config.visibility.min_visibility_fraction {
        layers.push(CriterionLayer::scalar("visibility_time", fraction, Rule::AtLeast(f)));
    }
    layers.push(CriterionLayer::scalar("traffic", traffic, Rule::AtLeast(t.traffic_min_mbps_km2)));
    if let Some(alt) = &altitude {
        if t.require_land {
            layers.push(CriterionLayer {
                name: "land".into(),
                data: LayerData::Mask {
                    mask: land_mask(&TerrainGrid::new(alt.clone())),
                    values: Some(alt.clone()),
                },
            });
        }
        if let Some(max) = t.altitude_max_m {
            layers.push(CriterionLayer::scalar("altitude", alt.clone(), Rule::AtMost(max)));
        }
    }
    if let Some(g) = geo {
        layers.push(CriterionLayer::mask("geopolitical", g));
    }
    Ok((layers, thresholds))
}

/// The full decision flow for one configuration.
pub fn run_plan(config: &RunConfig, inputs: &PlanInputs) -> Result<PlanOutcome, PlanError> {
    let (layers, thresholds) = build_layers(config, inputs)?;
    let mut outcome = plan_from_layers(layers)?;
    outcome.report.rain_thresholds = thresholds;
    outcome.report.config = Some(serde_json::to_value(config).map_err(|e| PlanError::layer("config", e))?);
    Ok(outcome)
}

/// A single inspectable raster.
#[derive(Debug, Clone, PartialEq)]
pub enum NamedLayer {
    Scalar(ScalarGrid),
    Mask(BoolMask),
}

fn freq_label(f: f64) -> String {
    format!("rain_{f}ghz")
}

/// Names accepted by [`build_named_layer`].
pub fn layer_names(config: &RunConfig) -> Vec<String> {
    let mut names = vec!["rain".to_string()];
    names.extend(config.weather.frequencies_ghz.iter().map(|&f| freq_label(f)));
    names.extend(
        [
            "visibility_count",
            "visibility_fraction",
            "traffic",
            "traffic_class",
            "altitude",
            "land",
            "geopolitical",
        ]
        .map(String::from),
    );
    names
}

/// Inputs a named layer reads, so callers can skip the rest.
pub fn inputs_for_layer(name: &str) -> Vec<InputKind> {
    match name {
        n if n.starts_with("rain") => vec![InputKind::Rain],
        "traffic" | "traffic_class" => vec![InputKind::Population],
        "altitude" | "land" => vec![InputKind::Terrain],
        "geopolitical" => vec![InputKind::Geopolitical],
        _ => Vec::new(),
    }
}

/// Builds one raster by name without running the plan.
pub fn build_named_layer(config: &RunConfig, inputs: &PlanInputs, name: &str) -> Result<NamedLayer, PlanError> {
    let names = layer_names(config);
    if !names.iter().any(|n| n == name) {
        return Err(PlanError::UnknownLayer {
            name: name.to_string(),
            available: names,
        });
    }
    let spec = config.grid;
    Ok(match name {
        "rain" => NamedLayer::Scalar(
            worst_case_over_frequencies(&rain_grids(config, inputs)?).map_err(|e| PlanError::layer("rain", e))?,
        ),
        "visibility_count" => NamedLayer::Scalar(visibility_grids(config)?.0),
        "visibility_fraction" => NamedLayer::Scalar(visibility_grids(config)?.1),
        "traffic" => NamedLayer::Scalar(traffic_grid(config, inputs)?),
        "traffic_class" => NamedLayer::Scalar(
            classify_density(&traffic_grid(config, inputs)?, &config.traffic.class_edges)
                .map_err(|e| PlanError::layer("traffic", e))?,
        ),
        "altitude" => NamedLayer::Scalar(altitude_grid(inputs.terrain()?, &spec)),
        "land" => NamedLayer::Mask(land_mask(&TerrainGrid::new(altitude_grid(inputs.terrain()?, &spec)))),
        "geopolitical" => NamedLayer::Mask(geo_mask(config, inputs)?),
        _ => {
            let i = config
                .weather
                .frequencies_ghz
                .iter()
                .position(|&f| freq_label(f) == name)
                .expect("registered name");
            NamedLayer::Scalar(rain_grids(config, inputs)?.swap_remove(i))
        }
    })
}

/// True where the value is present; used when reporting NODATA shares.
pub fn has_data(grid: &ScalarGrid) -> BoolMask {
    BoolMask::new(*grid.spec(), grid.values().iter().map(|v| !is_nodata(*v)).collect()).expect("same spec")
}
