use thiserror::Error;

use crate::fusion::FusionError;
use crate::interpolation::InterpolationError;
use crate::raster::GridError;
use crate::report::ReportError;
use crate::soil::SoilError;
use crate::stats::StatsError;
use crate::terrain::TerrainError;

/// Any failure surfaced by the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid: {0}")]
    Grid(#[from] GridError),
    #[error("terrain: {0}")]
    Terrain(#[from] TerrainError),
    #[error("soil: {0}")]
    Soil(#[from] SoilError),
    #[error("interpolation: {0}")]
    Interpolation(#[from] InterpolationError),
    #[error("stats: {0}")]
    Stats(#[from] StatsError),
    #[error("fusion: {0}")]
    Fusion(#[from] FusionError),
    #[error("report: {0}")]
    Report(#[from] ReportError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
