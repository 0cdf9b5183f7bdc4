//! The fuse stage from raw input bytes, shared by the CLI and the service.

use crate::error::Result;
use crate::fusion::{build_fused_table, FusedCellTable, FusionError, SeasonYield};
use crate::interpolation::{default_season_label, interpolate_grid, parse_yield_csv};
use crate::raster::{parse_ascii_grid, Grid};
use crate::soil::{assign_soil_attributes, parse_boundary, parse_soil_layer, AttributeSchema};
use crate::terrain::{derive_at_resolution, TerrainDerivatives};

/// A named yield file. Rows without a season take the file stem of `name`.
#[derive(Debug, Clone, Copy)]
pub struct YieldSource<'a> {
    pub name: &'a str,
    pub bytes: &'a [u8],
}

#[derive(Debug, Clone)]
pub struct FuseInputs<'a> {
    pub dem: &'a [u8],
    pub soil: &'a [u8],
    pub boundary: &'a [u8],
    pub yields: Vec<YieldSource<'a>>,
    pub schema: AttributeSchema,
    pub resolution_factor: usize,
}

#[derive(Debug, Clone)]
pub struct FuseOutput {
    pub table: FusedCellTable,
    /// The DEM at analysis resolution.
    pub dem: Grid,
    pub derivatives: TerrainDerivatives,
    pub yields: Vec<SeasonYield>,
}

pub fn fuse(inputs: &FuseInputs<'_>) -> Result<FuseOutput> {
    let dem = parse_ascii_grid(inputs.dem)?;
    let (dem, derivatives) = derive_at_resolution(&dem, inputs.resolution_factor)?;
    let layer = parse_soil_layer(inputs.soil, &inputs.schema)?;
    let boundary = parse_boundary(inputs.boundary)?;
    let soil = assign_soil_attributes(dem.geometry(), &layer);
    let mut yields: Vec<SeasonYield> = Vec::new();
    for source in &inputs.yields {
        for set in parse_yield_csv(source.bytes, &default_season_label(source.name))? {
            if yields.iter().any(|y| y.season == set.season) {
                return Err(FusionError::DuplicateSeason(set.season).into());
            }
            let grid = interpolate_grid(&set, dem.geometry())?;
            yields.push(SeasonYield {
                season: set.season,
                grid,
            });
        }
    }
    let table = build_fused_table(&dem, &derivatives, &soil, &layer, &yields, &boundary)?;
    Ok(FuseOutput {
        table,
        dem,
        derivatives,
        yields,
    })
}
