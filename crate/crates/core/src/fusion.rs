//! The fused per-cell table joining terrain, soil and interpolated yield.
//!
//! CSV layout (one header row, fixed order):
//!
//! ```text
//! row,col,x,y,cell_size,elevation,slope,aspect,<soil columns...>,yield_<season>...
//! ```
//!
//! Soil columns follow the attribute schema order (categorical keys, then
//! numeric keys). Missing values are empty fields. Numbers use the shortest
//! representation that parses back to the same `f64`.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::raster::{ensure_congruent, CellIndex, Grid, GridError, GridGeometry};
use crate::soil::{CellSoil, MultiPolygon, SoilAttributeLayer};
use crate::terrain::TerrainDerivatives;

pub const FIXED_COLUMNS: [&str; 8] = [
    "row",
    "col",
    "x",
    "y",
    "cell_size",
    "elevation",
    "slope",
    "aspect",
];
pub const YIELD_PREFIX: &str = "yield_";

#[derive(Debug, Error)]
pub enum FusionError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("duplicate season '{0}'")]
    DuplicateSeason(String),
    #[error("fused table has no rows")]
    Empty,
}

fn csv_err(line: usize, message: impl Into<String>) -> FusionError {
    FusionError::Csv {
        line,
        message: message.into(),
    }
}

/// An interpolated yield grid for one season.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonYield {
    pub season: String,
    pub grid: Grid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedRow {
    pub cell: CellIndex,
    pub x: f64,
    pub y: f64,
    pub elevation: Option<f64>,
    pub slope: Option<f64>,
    pub aspect: Option<f64>,
    /// Aligned with [`FusedCellTable::soil_columns`].
    pub soil: Vec<Option<String>>,
    /// Aligned with [`FusedCellTable::seasons`].
    pub yields: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedCellTable {
    pub cell_size: f64,
    pub soil_columns: Vec<String>,
    pub seasons: Vec<String>,
    pub rows: Vec<FusedRow>,
}

/// Joins every layer by cell index for the cells whose centers fall inside
/// `boundary`.
pub fn build_fused_table(
    dem: &Grid,
    deriv: &TerrainDerivatives,
    soil: &CellSoil,
    layer: &SoilAttributeLayer,
    yields: &[SeasonYield],
    boundary: &MultiPolygon,
) -> Result<FusedCellTable, FusionError> {
    let geometry = dem.geometry();
    for g in [&deriv.slope, &deriv.aspect, &deriv.grad_x, &deriv.grad_y] {
        ensure_congruent(geometry, g.geometry())?;
    }
    ensure_congruent(geometry, &soil.geometry)?;
    for y in yields {
        ensure_congruent(geometry, y.grid.geometry())?;
    }
    let mut seasons: Vec<String> = Vec::with_capacity(yields.len());
    for y in yields {
        if seasons.contains(&y.season) {
            return Err(FusionError::DuplicateSeason(y.season.clone()));
        }
        seasons.push(y.season.clone());
    }
    let soil_columns: Vec<String> = layer.schema.columns().map(str::to_string).collect();

    let mut rows = Vec::new();
    for offset in 0..geometry.len() {
        let cell = geometry.index_of(offset);
        let (x, y) = geometry.center_unchecked(cell);
        if !boundary.contains((x, y)) {
            continue;
        }
        let attrs = soil.attributes(layer, offset);
        rows.push(FusedRow {
            cell,
            x,
            y,
            elevation: dem.at(cell),
            slope: deriv.slope.at(cell),
            aspect: deriv.aspect.at(cell),
            soil: soil_columns
                .iter()
                .map(|k| attrs.and_then(|a| a.get(k)).map(ToString::to_string))
                .collect(),
            yields: yields.iter().map(|s| s.grid.at(cell)).collect(),
        });
    }
    Ok(FusedCellTable {
        cell_size: geometry.cell_size,
        soil_columns,
        seasons,
        rows,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl FusedCellTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn header(&self) -> Vec<String> {
        FIXED_COLUMNS
            .iter()
            .map(|c| c.to_string())
            .chain(self.soil_columns.iter().cloned())
            .chain(self.seasons.iter().map(|s| format!("{YIELD_PREFIX}{s}")))
            .collect()
    }

    pub fn soil_column(&self, key: &str) -> Option<usize> {
        self.soil_columns.iter().position(|c| c == key)
    }

    pub fn season_column(&self, season: &str) -> Option<usize> {
        self.seasons.iter().position(|s| s == season)
    }

    /// Grid placement implied by the rows. Rows carry their own centers, so
    /// the origin is recovered from the first row.
    pub fn geometry(&self) -> Result<GridGeometry, FusionError> {
        let first = self.rows.first().ok_or(FusionError::Empty)?;
        let ncols = self.rows.iter().map(|r| r.cell.col).max().unwrap_or(0) + 1;
        let nrows = self.rows.iter().map(|r| r.cell.row).max().unwrap_or(0) + 1;
        let x_origin = first.x - (first.cell.col as f64 + 0.5) * self.cell_size;
        let y_origin = first.y - (first.cell.row as f64 + 0.5) * self.cell_size;
        Ok(GridGeometry::new(ncols, nrows, x_origin, y_origin, self.cell_size)?)
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        // writing to a Vec cannot fail
        w.write_record(self.header()).expect("in-memory csv write");
        for r in &self.rows {
            let mut rec = vec![
                r.cell.row.to_string(),
                r.cell.col.to_string(),
                r.x.to_string(),
                r.y.to_string(),
                self.cell_size.to_string(),
                fmt_opt(r.elevation),
                fmt_opt(r.slope),
                fmt_opt(r.aspect),
            ];
            rec.extend(r.soil.iter().map(|s| s.clone().unwrap_or_default()));
            rec.extend(r.yields.iter().map(|&y| fmt_opt(y)));
            w.write_record(&rec).expect("in-memory csv write");
        }
        w.into_inner().expect("in-memory csv flush")
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self, FusionError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(bytes);
        let header = reader
            .headers()
            .map_err(|e| csv_err(1, e.to_string()))?
            .clone();
        let names: Vec<&str> = header.iter().collect();
        if names.len() < FIXED_COLUMNS.len() || names[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
            return Err(csv_err(
                1,
                format!("expected header to start with {}", FIXED_COLUMNS.join(",")),
            ));
        }
        let rest = &names[FIXED_COLUMNS.len()..];
        let first_yield = rest
            .iter()
            .position(|c| c.starts_with(YIELD_PREFIX))
            .unwrap_or(rest.len());
        let soil_columns: Vec<String> = rest[..first_yield].iter().map(|s| s.to_string()).collect();
        let mut seasons = Vec::new();
        for c in &rest[first_yield..] {
            let season = c
                .strip_prefix(YIELD_PREFIX)
                .ok_or_else(|| csv_err(1, format!("column '{c}' after yield columns")))?;
            if seasons.iter().any(|s| s == season) {
                return Err(FusionError::DuplicateSeason(season.to_string()));
            }
            seasons.push(season.to_string());
        }

        let mut rows = Vec::new();
        let mut cell_size = None;
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| csv_err(line, e.to_string()))?;
            if record.len() != names.len() {
                return Err(csv_err(
                    line,
                    format!("expected {} fields, found {}", names.len(), record.len()),
                ));
            }
            let num = |j: usize| -> Result<f64, FusionError> {
                record[j]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| csv_err(line, format!("invalid number '{}' in {}", &record[j], names[j])))
            };
            let opt = |j: usize| -> Result<Option<f64>, FusionError> {
                if record[j].is_empty() {
                    Ok(None)
                } else {
                    num(j).map(Some)
                }
            };
            let idx = |j: usize| -> Result<usize, FusionError> {
                record[j]
                    .parse::<usize>()
                    .map_err(|_| csv_err(line, format!("invalid index '{}' in {}", &record[j], names[j])))
            };
            let cs = num(4)?;
            match cell_size {
                None if cs > 0.0 => cell_size = Some(cs),
                None => return Err(csv_err(line, "cell_size must be positive")),
                Some(prev) if prev != cs => return Err(csv_err(line, "cell_size differs between rows")),
                Some(_) => {}
            }
            let n_fixed = FIXED_COLUMNS.len();
            rows.push(FusedRow {
                cell: CellIndex::new(idx(0)?, idx(1)?),
                x: num(2)?,
                y: num(3)?,
                elevation: opt(5)?,
                slope: opt(6)?,
                aspect: opt(7)?,
                soil: (0..soil_columns.len())
                    .map(|k| {
                        let v = &record[n_fixed + k];
                        (!v.is_empty()).then(|| v.to_string())
                    })
                    .collect(),
                yields: (0..seasons.len())
                    .map(|k| opt(n_fixed + soil_columns.len() + k))
                    .collect::<Result<_, _>>()?,
            });
        }
        Ok(Self {
            cell_size: cell_size.ok_or(FusionError::Empty)?,
            soil_columns,
            seasons,
            rows,
        })
    }

    /// SHA-256 of the canonical CSV serialization.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv()))
    }
}
