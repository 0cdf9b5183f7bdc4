//! Geospatial trial blocking.
//!
//! The pipeline turns a projected DEM, soil map-unit polygons and harvester
//! yield points into a per-cell table, then groups cells by terrain or soil
//! features and tests yield differences between the groups with one-way
//! ANOVA and Tukey HSD. The groups become candidate blocks for on-farm
//! experiments.
//!
//! ```text
//! dem.asc ──► raster ──► terrain ──┐
//! soil.geojson ──► soil ───────────┼──► fusion::FusedCellTable ──► report::run_analysis
//! yield.csv ──► interpolation ─────┘                                   │
//!                                                        AnalysisReport + BlockMap
//! ```

// `!(a < b)` style guards reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fusion;
pub mod interpolation;
pub mod pipeline;
pub mod raster;
pub mod report;
pub mod sda;
pub mod soil;
pub mod stats;
pub mod synthetic;
pub mod terrain;

pub use error::{Error, Result};
pub use raster::{CellIndex, Grid, GridGeometry};

/// Semantic version of this crate, echoed into report provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
