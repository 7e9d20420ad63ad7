//! Traffic demand criterion from population density.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geogrid::{is_nodata, resample_nearest, GridSpec, ScalarGrid, NODATA};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DemandError {
    #[error("invalid traffic parameters: {0}")]
    InvalidParams(String),
    #[error("class edges must be strictly ascending")]
    UnsortedEdges,
    #[error("negative population density {0}")]
    NegativeDensity(f64),
}

/// Service parameters multiplied with population density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficParams {
    pub throughput_per_user_mbps: f64,
    pub penetration_rate: f64,
    pub concurrency_rate: f64,
}

impl Default for TrafficParams {
    fn default() -> Self {
        Self {
            throughput_per_user_mbps: 10.0,
            penetration_rate: 0.01,
            concurrency_rate: 0.33,
        }
    }
}

impl TrafficParams {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.throughput_per_user_mbps > 0.0 && self.throughput_per_user_mbps.is_finite()) {
            out.push(format!(
                "throughput_per_user_mbps must be > 0 (got {})",
                self.throughput_per_user_mbps
            ));
        }
        if !(0.0..=1.0).contains(&self.penetration_rate) {
            out.push(format!(
                "penetration_rate must lie in [0, 1] (got {})",
                self.penetration_rate
            ));
        }
        if !(0.0..=1.0).contains(&self.concurrency_rate) {
            out.push(format!(
                "concurrency_rate must lie in [0, 1] (got {})",
                self.concurrency_rate
            ));
        }
        out
    }
}

/// Population density in persons/km2.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationGrid {
    grid: ScalarGrid,
}

impl PopulationGrid {
    pub fn new(grid: ScalarGrid) -> Result<Self, DemandError> {
        if let Some(&v) = grid.values().iter().find(|v| **v < 0.0) {
            return Err(DemandError::NegativeDensity(v));
        }
        Ok(Self {
            grid: grid.with_unit("persons/km2"),
        })
    }

    pub fn grid(&self) -> &ScalarGrid {
        &self.grid
    }
}

/// Throughput density in Mbps/km2: the product of per-user throughput,
/// population density, penetration and concurrency.
pub fn traffic_density_grid(
    pop: &PopulationGrid,
    params: &TrafficParams,
    spec: &GridSpec,
) -> Result<ScalarGrid, DemandError> {
    let problems = params.problems();
    if !problems.is_empty() {
        return Err(DemandError::InvalidParams(problems.join("; ")));
    }
    let factor = params.throughput_per_user_mbps * params.penetration_rate * params.concurrency_rate;
    let density = resample_nearest(pop.grid(), spec);
    let values = density
        .values()
        .iter()
        .map(|&d| if is_nodata(d) { NODATA } else { d * factor })
        .collect();
    Ok(ScalarGrid::new(*spec, values, "Mbps/km2").expect("resampled to spec"))
}

/// Reporting classes 0..=4: the number of edges at or below each value.
pub fn classify_density(grid: &ScalarGrid, class_edges: &[f64; 4]) -> Result<ScalarGrid, DemandError> {
    if class_edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(DemandError::UnsortedEdges);
    }
    let values = grid
        .values()
        .iter()
        .map(|&v| {
            if is_nodata(v) {
                NODATA
            } else {
                class_edges.iter().filter(|e| **e <= v).count() as f64
            }
        })
        .collect();
    Ok(ScalarGrid::new(*grid.spec(), values, "class").expect("same spec"))
}
