//! Generated test fields with a known soil effect on yield.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;

use crate::raster::{write_ascii_grid, Grid, GridGeometry, DEFAULT_NODATA};

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub size: usize,
    pub cell_size: f64,
    pub x_origin: f64,
    pub y_origin: f64,
    /// Mean and standard deviation of yield west and east of the soil split.
    pub west: (f64, f64),
    pub east: (f64, f64),
    /// Spacing of harvester passes and of samples along a pass.
    pub pass_spacing: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            size: 100,
            cell_size: 1.0,
            x_origin: 448_000.0,
            y_origin: 4_650_000.0,
            west: (40.0, 2.0),
            east: (60.0, 2.0),
            pass_spacing: 2.0,
            seed: 57,
        }
    }
}

/// Input files of a synthetic field, as bytes.
#[derive(Debug, Clone)]
pub struct SyntheticField {
    pub dem_asc: Vec<u8>,
    pub soil_geojson: Vec<u8>,
    pub boundary_geojson: Vec<u8>,
    pub yield_csv: Vec<u8>,
    /// x coordinate of the boundary between the two soil polygons.
    pub split_x: f64,
}

impl SyntheticField {
    /// Writes `dem.asc`, `soil.geojson`, `boundary.geojson` and `2017.csv`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("dem.asc"), &self.dem_asc)?;
        std::fs::write(dir.join("soil.geojson"), &self.soil_geojson)?;
        std::fs::write(dir.join("boundary.geojson"), &self.boundary_geojson)?;
        std::fs::write(dir.join("2017.csv"), &self.yield_csv)
    }
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> serde_json::Value {
    json!({"type": "Polygon", "coordinates": [[[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]]})
}

/// A square field on a gentle hill, split into two soil map units at its
/// midline. Yield samples are normal with the west or east parameters
/// according to the side they fall on.
pub fn synthetic_field(spec: &SyntheticSpec) -> SyntheticField {
    let n = spec.size;
    let cs = spec.cell_size;
    let extent = n as f64 * cs;
    let (x0, y0) = (spec.x_origin, spec.y_origin);
    let geometry = GridGeometry::new(n, n, x0, y0, cs).expect("valid synthetic geometry");
    let values = geometry
        .cells()
        .map(|c| {
            let (x, y) = geometry.cell_center(c).expect("in bounds");
            let (u, v) = ((x - x0) / extent - 0.5, (y - y0) / extent - 0.5);
            210.0 + 4.0 * (-(u * u + v * v) * 8.0).exp() + 1.5 * u - 0.8 * v
        })
        .collect();
    let dem = Grid::new(geometry, DEFAULT_NODATA, values).expect("finite elevations");

    let split_x = x0 + extent / 2.0;
    let margin = 5.0 * cs;
    let soil = json!({
        "type": "FeatureCollection",
        "features": [
            {"type": "Feature", "geometry": rect(x0 - margin, y0 - margin, split_x, y0 + extent + margin),
             "properties": {"mukey": "1001", "compname": "Chalmers", "texdesc": "Silty clay loam",
                            "drainagecl": "Poorly drained", "pmgroupname": "Loess over till", "claytotal_r": 31.0}},
            {"type": "Feature", "geometry": rect(split_x, y0 - margin, x0 + extent + margin, y0 + extent + margin),
             "properties": {"mukey": "1002", "compname": "Pella", "texdesc": "Silt loam",
                            "drainagecl": "Well drained", "pmgroupname": "Lacustrine deposits", "claytotal_r": 22.0}}
        ]
    });
    let boundary = rect(x0, y0, x0 + extent, y0 + extent);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let west = Normal::new(spec.west.0, spec.west.1).expect("valid normal");
    let east = Normal::new(spec.east.0, spec.east.1).expect("valid normal");
    let mut csv = String::from("x,y,yield\n");
    let step = spec.pass_spacing;
    let passes = (extent / step).ceil() as usize + 2;
    for i in 0..=passes {
        for j in 0..=passes {
            // samples start one step outside the field so the hull covers every cell
            let x = x0 - step / 2.0 + i as f64 * step + rng.random_range(-0.2..0.2) * step;
            let y = y0 - step / 2.0 + j as f64 * step + rng.random_range(-0.2..0.2) * step;
            let dist = if x < split_x { &west } else { &east };
            let yield_value: f64 = dist.sample(&mut rng);
            csv.push_str(&format!("{x},{y},{}\n", yield_value.max(0.0)));
        }
    }
    SyntheticField {
        dem_asc: write_ascii_grid(&dem),
        soil_geojson: serde_json::to_vec(&soil).expect("json"),
        boundary_geojson: serde_json::to_vec(&boundary).expect("json"),
        yield_csv: csv.into_bytes(),
        split_x,
    }
}
