//! Gateway site planning for non-geostationary satellite constellations.
//!
//! Each criterion (rain fade, satellite visibility, traffic demand, land,
//! geopolitical admissibility) is evaluated on a common lat/lon lattice, the
//! accepted masks are intersected, connected regions are clustered and one
//! gateway site is chosen per region.

// `!(x < y)` is how range checks reject NaN here.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atmos;
pub mod config;
pub mod demand;
pub mod geogrid;
pub mod masks;
pub mod orbits;
pub mod planner;
pub mod output;
pub mod synthetic;
