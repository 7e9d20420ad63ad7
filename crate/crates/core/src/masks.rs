//! Terrain, altitude and geopolitical admissibility layers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geogrid::{is_nodata, resample_nearest, BoolMask, GridSpec, ScalarGrid};

/// Terrain elevation above sea level in meters; NODATA over open water.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainGrid {
    grid: ScalarGrid,
}

impl TerrainGrid {
    pub fn new(grid: ScalarGrid) -> Self {
        Self {
            grid: grid.with_unit("m"),
        }
    }

    pub fn grid(&self) -> &ScalarGrid {
        &self.grid
    }
}

/// Land iff the elevation is present and strictly above 0 m.
pub fn land_mask(terrain: &TerrainGrid) -> BoolMask {
    let accepted = terrain
        .grid
        .values()
        .iter()
        .map(|&v| !is_nodata(v) && v > 0.0)
        .collect();
    BoolMask::new(*terrain.grid.spec(), accepted).expect("same spec")
}

/// Terrain elevation sampled onto the planner lattice.
pub fn altitude_grid(terrain: &TerrainGrid, spec: &GridSpec) -> ScalarGrid {
    resample_nearest(&terrain.grid, spec)
}

/// The splitmix64 output function.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based draw in `[0, 1)` for the cell with flat index `flat`.
#[inline]
pub fn cell_draw(seed: u64, flat: u64) -> f64 {
    splitmix64(seed ^ flat) as f64 / 18_446_744_073_709_551_616.0
}

/// Placement admissibility, `true` = allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoPoliticalMask {
    pub mask: BoolMask,
    pub seed: u64,
    pub blocked_fraction: Option<f64>,
}

impl GeoPoliticalMask {
    /// Wraps an externally curated mask.
    pub fn from_mask(mask: BoolMask) -> Self {
        Self {
            mask,
            seed: 0,
            blocked_fraction: None,
        }
    }
}

/// Randomly blocked positions: cell `i` is blocked iff
/// `splitmix64(seed ^ i) / 2^64 < blocked_fraction`. Every cell is drawn
/// independently of the others, so the mask is identical for any schedule.
pub fn gen_geopolitical_mask(spec: &GridSpec, seed: u64, blocked_fraction: f64) -> GeoPoliticalMask {
    let fraction = blocked_fraction.clamp(0.0, 1.0);
    let accepted = (0..spec.len() as u64)
        .into_par_iter()
        .map(|i| !(fraction >= 1.0 || cell_draw(seed, i) < fraction))
        .collect();
    GeoPoliticalMask {
        mask: BoolMask::new(*spec, accepted).expect("length matches spec"),
        seed,
        blocked_fraction: Some(blocked_fraction),
    }
}

/// How the geopolitical layer is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GeoPoliticalSource {
    Random { seed: u64, blocked_fraction: f64 },
    File { path: String },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geogrid::{selection_fraction, CellIndex, NODATA};

    #[test]
    fn land_rule() {
        let spec = GridSpec::new(0.0, 1.0, 0.0, 4.0, 1.0, 1.0).unwrap();
        let t = TerrainGrid::new(ScalarGrid::new(spec, vec![500.0, -10.0, NODATA, 0.0], "m").unwrap());
        assert_eq!(land_mask(&t).accepted(), &[true, false, false, false]);
        let all = TerrainGrid::new(ScalarGrid::filled(spec, 0.5, "m"));
        assert_eq!(land_mask(&all).count(), 4);
    }

    #[test]
    fn altitude_resampling() {
        let spec = GridSpec::global(10.0).unwrap();
        let t = TerrainGrid::new(ScalarGrid::filled(spec, 100.0, "m"));
        assert_eq!(altitude_grid(&t, &spec), *t.grid());
        let fine = altitude_grid(&t, &GridSpec::global(5.0).unwrap());
        assert!(fine.values().iter().all(|v| *v == 100.0));
        let mixed = TerrainGrid::new(
            ScalarGrid::from_fn(spec, "m", |i, _, _| if i.i_lon % 2 == 0 { NODATA } else { 3.0 }).unwrap(),
        );
        let out = altitude_grid(&mixed, &GridSpec::global(5.0).unwrap());
        assert!(is_nodata(out.get(CellIndex::new(0, 0)).unwrap()));
        assert_eq!(out.get(CellIndex::new(0, 2)).unwrap(), 3.0);
    }

    #[test]
    fn splitmix_reference_values() {
        // independently computed splitmix64(0x5EED2023 ^ i), i = 0, 1, 63
        assert_eq!(splitmix64(0x5EED_2023), 0x405b_ef01_265f_64c8);
        assert_eq!(splitmix64(0x5EED_2023 ^ 1), 0xb8cf_8a2d_5c50_abb8);
        assert_eq!(splitmix64(0x5EED_2023 ^ 63), 0xe831_03f1_3ffe_d100);
    }

    #[test]
    fn extreme_fractions() {
        let spec = GridSpec::global(5.0).unwrap();
        assert_eq!(gen_geopolitical_mask(&spec, 7, 0.0).mask.count(), spec.len());
        assert_eq!(gen_geopolitical_mask(&spec, 7, 1.0).mask.count(), 0);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let spec = GridSpec::global(2.0).unwrap();
        let a = gen_geopolitical_mask(&spec, 11, 0.3);
        assert_eq!(a, gen_geopolitical_mask(&spec, 11, 0.3));
        assert_ne!(a.mask, gen_geopolitical_mask(&spec, 12, 0.3).mask);
        let share = 1.0 - selection_fraction(&a.mask);
        assert!((share - 0.3).abs() < 0.02);
    }

    #[test]
    fn subrectangle_consistency() {
        let full = GridSpec::new(0.0, 20.0, 0.0, 30.0, 1.0, 1.0).unwrap();
        let m = gen_geopolitical_mask(&full, 99, 0.4).mask;
        // same cells addressed by their flat index in the full grid
        for idx in full.cells().filter(|c| (5..12).contains(&c.i_lat) && (3..17).contains(&c.i_lon)) {
            let flat = full.flat(idx) as u64;
            assert_eq!(m.get(idx).unwrap(), cell_draw(99, flat) >= 0.4);
        }
    }
}
