//! Raster grids: the ESRI ASCII reader/writer, block-mean resampling and cell
//! geometry.
//!
//! Rows are stored south to north (row 0 is the southernmost row) so that `y`
//! grows with the row index. The ASCII format lists the northernmost row
//! first; the flip happens only in [`parse_ascii_grid`] and
//! [`write_ascii_grid`].

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Nodata value used when an ASCII grid does not declare one.
pub const DEFAULT_NODATA: f64 = -9999.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid grid: {0}")]
    Invalid(String),
    #[error("cell ({row}, {col}) is outside a {nrows}x{ncols} grid")]
    OutOfBounds {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("resample factor must be at least 1, got {0}")]
    InvalidFactor(usize),
    #[error("grids are not congruent: {0}")]
    Incongruent(String),
}

fn parse_err(line: usize, message: impl Into<String>) -> GridError {
    GridError::Parse {
        line,
        message: message.into(),
    }
}

/// Position of a cell. Row 0 is the southern edge, column 0 the western edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub row: usize,
    pub col: usize,
}

impl CellIndex {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Shape and placement of a grid, without its values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub ncols: usize,
    pub nrows: usize,
    /// Easting of the lower-left corner of the lower-left cell.
    pub x_origin: f64,
    /// Northing of the lower-left corner of the lower-left cell.
    pub y_origin: f64,
    pub cell_size: f64,
}

impl GridGeometry {
    pub fn new(
        ncols: usize,
        nrows: usize,
        x_origin: f64,
        y_origin: f64,
        cell_size: f64,
    ) -> Result<Self, GridError> {
        let geometry = Self {
            ncols,
            nrows,
            x_origin,
            y_origin,
            cell_size,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    fn validate(&self) -> Result<(), GridError> {
        if self.ncols == 0 || self.nrows == 0 {
            return Err(GridError::Invalid(format!(
                "dimensions must be positive, got {}x{}",
                self.nrows, self.ncols
            )));
        }
        if !(self.cell_size.is_finite() && self.cell_size > 0.0) {
            return Err(GridError::Invalid(format!(
                "cell size must be a positive finite number, got {}",
                self.cell_size
            )));
        }
        if !(self.x_origin.is_finite() && self.y_origin.is_finite()) {
            return Err(GridError::Invalid("origin must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, idx: CellIndex) -> bool {
        idx.row < self.nrows && idx.col < self.ncols
    }

    pub fn offset(&self, idx: CellIndex) -> usize {
        idx.row * self.ncols + idx.col
    }

    pub fn index_of(&self, offset: usize) -> CellIndex {
        CellIndex::new(offset / self.ncols, offset % self.ncols)
    }

    /// Center of a cell in projected coordinates.
    pub fn cell_center(&self, idx: CellIndex) -> Result<(f64, f64), GridError> {
        if !self.contains(idx) {
            return Err(GridError::OutOfBounds {
                row: idx.row,
                col: idx.col,
                nrows: self.nrows,
                ncols: self.ncols,
            });
        }
        Ok(self.center_unchecked(idx))
    }

    pub(crate) fn center_unchecked(&self, idx: CellIndex) -> (f64, f64) {
        (
            self.x_origin + (idx.col as f64 + 0.5) * self.cell_size,
            self.y_origin + (idx.row as f64 + 0.5) * self.cell_size,
        )
    }

    /// `(xmin, ymin, xmax, ymax)` of the grid footprint.
    pub fn extent(&self) -> [f64; 4] {
        [
            self.x_origin,
            self.y_origin,
            self.x_origin + self.ncols as f64 * self.cell_size,
            self.y_origin + self.nrows as f64 * self.cell_size,
        ]
    }

    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.len()).map(|i| self.index_of(i))
    }
}

/// A rectangular raster of `f64` values with a nodata sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    geometry: GridGeometry,
    nodata: f64,
    values: Vec<f64>,
}

impl Grid {
    /// Builds a grid from south-first row-major values.
    pub fn new(geometry: GridGeometry, nodata: f64, values: Vec<f64>) -> Result<Self, GridError> {
        geometry.validate()?;
        if !nodata.is_finite() {
            return Err(GridError::Invalid("nodata value must be finite".into()));
        }
        if values.len() != geometry.len() {
            return Err(GridError::Invalid(format!(
                "expected {} values for a {}x{} grid, got {}",
                geometry.len(),
                geometry.nrows,
                geometry.ncols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::Invalid(format!(
                "non-finite value at offset {pos}"
            )));
        }
        Ok(Self {
            geometry,
            nodata,
            values,
        })
    }

    /// Builds a grid from optional values, `None` becoming `nodata`.
    pub fn from_options(
        geometry: GridGeometry,
        nodata: f64,
        values: impl IntoIterator<Item = Option<f64>>,
    ) -> Result<Self, GridError> {
        let values = values.into_iter().map(|v| v.unwrap_or(nodata)).collect();
        Self::new(geometry, nodata, values)
    }

    pub fn filled(geometry: GridGeometry, nodata: f64, value: f64) -> Result<Self, GridError> {
        Self::new(geometry, nodata, vec![value; geometry.len()])
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn ncols(&self) -> usize {
        self.geometry.ncols
    }

    pub fn nrows(&self) -> usize {
        self.geometry.nrows
    }

    pub fn cell_size(&self) -> f64 {
        self.geometry.cell_size
    }

    pub fn nodata(&self) -> f64 {
        self.nodata
    }

    /// Raw values including nodata sentinels, south-first row-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_nodata(&self, v: f64) -> bool {
        v == self.nodata
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        if row >= self.nrows() || col >= self.ncols() {
            return None;
        }
        let v = self.values[row * self.ncols() + col];
        (v != self.nodata).then_some(v)
    }

    pub fn at(&self, idx: CellIndex) -> Option<f64> {
        self.get(idx.row, idx.col)
    }

    /// Values as options, south-first row-major.
    pub fn iter_options(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        self.values
            .iter()
            .map(move |&v| (v != self.nodata).then_some(v))
    }

    pub fn valid_count(&self) -> usize {
        self.iter_options().flatten().count()
    }

    pub fn cell_center(&self, idx: CellIndex) -> Result<(f64, f64), GridError> {
        self.geometry.cell_center(idx)
    }

    /// Errors unless `other` has the same dimensions, origin and cell size.
    pub fn ensure_congruent(&self, other: &GridGeometry) -> Result<(), GridError> {
        ensure_congruent(&self.geometry, other)
    }
}

pub(crate) fn ensure_congruent(a: &GridGeometry, b: &GridGeometry) -> Result<(), GridError> {
    if a != b {
        return Err(GridError::Incongruent(format!(
            "{}x{} @ ({}, {}) cell {} vs {}x{} @ ({}, {}) cell {}",
            a.nrows, a.ncols, a.x_origin, a.y_origin, a.cell_size, b.nrows, b.ncols, b.x_origin,
            b.y_origin, b.cell_size
        )));
    }
    Ok(())
}

/// Parses an ESRI ASCII grid.
///
/// Header keys are case-insensitive. `xllcenter`/`yllcenter` are accepted and
/// converted to the corner convention. A missing `NODATA_value` defaults to
/// [`DEFAULT_NODATA`].
pub fn parse_ascii_grid(bytes: &[u8]) -> Result<Grid, GridError> {
    let text = std::str::from_utf8(bytes).map_err(|e| parse_err(1, format!("not UTF-8: {e}")))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();

    let mut ncols = None;
    let mut nrows = None;
    let mut xll = None;
    let mut yll = None;
    let mut x_center = false;
    let mut y_center = false;
    let mut cellsize = None;
    let mut nodata = None;

    while let Some(&(lineno, line)) = lines.peek() {
        let mut tokens = line.split_whitespace();
        let Some(key) = tokens.next() else {
            lines.next();
            continue;
        };
        if key.parse::<f64>().is_ok() || key.eq_ignore_ascii_case("nan") {
            break;
        }
        lines.next();
        let value = tokens
            .next()
            .ok_or_else(|| parse_err(lineno, format!("header key '{key}' has no value")))?;
        if tokens.next().is_some() {
            return Err(parse_err(lineno, format!("header key '{key}' has extra tokens")));
        }
        let number = |v: &str| -> Result<f64, GridError> {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| parse_err(lineno, format!("invalid value '{v}' for '{key}'")))
        };
        let count = |v: &str| -> Result<usize, GridError> {
            v.parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| parse_err(lineno, format!("invalid count '{v}' for '{key}'")))
        };
        match key.to_ascii_lowercase().as_str() {
            "ncols" => ncols = Some(count(value)?),
            "nrows" => nrows = Some(count(value)?),
            "xllcorner" => xll = Some(number(value)?),
            "yllcorner" => yll = Some(number(value)?),
            "xllcenter" => {
                xll = Some(number(value)?);
                x_center = true;
            }
            "yllcenter" => {
                yll = Some(number(value)?);
                y_center = true;
            }
            "cellsize" => cellsize = Some(number(value)?),
            "nodata_value" => nodata = Some(number(value)?),
            _ => return Err(parse_err(lineno, format!("malformed header key '{key}'"))),
        }
    }

    let header_line = lines.peek().map_or(text.lines().count() + 1, |&(n, _)| n);
    let missing = |name: &str| parse_err(header_line, format!("missing header key '{name}'"));
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let cell_size = cellsize.ok_or_else(|| missing("cellsize"))?;
    let mut x_origin = xll.ok_or_else(|| missing("xllcorner"))?;
    let mut y_origin = yll.ok_or_else(|| missing("yllcorner"))?;
    if cell_size <= 0.0 {
        return Err(parse_err(header_line, "cellsize must be positive"));
    }
    if x_center {
        x_origin -= cell_size / 2.0;
    }
    if y_center {
        y_origin -= cell_size / 2.0;
    }
    let nodata = nodata.unwrap_or(DEFAULT_NODATA);

    let mut north_first: Vec<f64> = Vec::with_capacity(ncols * nrows);
    let mut rows_read = 0usize;
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if rows_read == nrows {
            return Err(parse_err(
                lineno,
                format!("row count mismatch: header declares {nrows} rows but more data follows"),
            ));
        }
        let start = north_first.len();
        for token in line.split_whitespace() {
            let v = token
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(lineno, format!("non-numeric token '{token}'")))?;
            north_first.push(v);
        }
        let got = north_first.len() - start;
        if got != ncols {
            return Err(parse_err(
                lineno,
                format!("row length mismatch: expected {ncols} values, found {got}"),
            ));
        }
        rows_read += 1;
    }
    if rows_read != nrows {
        return Err(parse_err(
            text.lines().count().max(1),
            format!("row count mismatch: header declares {nrows} rows, found {rows_read}"),
        ));
    }

    let mut values = Vec::with_capacity(north_first.len());
    for chunk in north_first.chunks(ncols).rev() {
        values.extend_from_slice(chunk);
    }
    let geometry = GridGeometry::new(ncols, nrows, x_origin, y_origin, cell_size)?;
    Grid::new(geometry, nodata, values)
}

/// Serializes a grid in the ESRI ASCII layout, northernmost row first.
///
/// Numbers use the shortest representation that parses back to the same
/// `f64`.
pub fn write_ascii_grid(grid: &Grid) -> Vec<u8> {
    let g = grid.geometry();
    let mut out = String::with_capacity(g.len() * 8 + 128);
    let _ = writeln!(out, "ncols {}", g.ncols);
    let _ = writeln!(out, "nrows {}", g.nrows);
    let _ = writeln!(out, "xllcorner {}", g.x_origin);
    let _ = writeln!(out, "yllcorner {}", g.y_origin);
    let _ = writeln!(out, "cellsize {}", g.cell_size);
    let _ = writeln!(out, "NODATA_value {}", grid.nodata());
    for row in grid.values().chunks(g.ncols).rev() {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out.into_bytes()
}

/// Aggregates `factor x factor` blocks into their mean.
///
/// Blocks are anchored at the lower-left corner; partial blocks along the
/// northern and eastern edges average whatever cells they cover. Nodata cells
/// are ignored and an all-nodata block is nodata.
pub fn resample_block_mean(grid: &Grid, factor: usize) -> Result<Grid, GridError> {
    if factor == 0 {
        return Err(GridError::InvalidFactor(factor));
    }
    if factor == 1 {
        return Ok(grid.clone());
    }
    let g = grid.geometry();
    let out_cols = g.ncols.div_ceil(factor);
    let out_rows = g.nrows.div_ceil(factor);
    let geometry = GridGeometry::new(
        out_cols,
        out_rows,
        g.x_origin,
        g.y_origin,
        g.cell_size * factor as f64,
    )?;
    let nodata = grid.nodata();
    let mut values = vec![nodata; geometry.len()];
    values
        .par_chunks_mut(out_cols)
        .enumerate()
        .for_each(|(orow, out)| {
            let r0 = orow * factor;
            let r1 = (r0 + factor).min(g.nrows);
            for (ocol, slot) in out.iter_mut().enumerate() {
                let c0 = ocol * factor;
                let c1 = (c0 + factor).min(g.ncols);
                let mut sum = 0.0;
                let mut n = 0usize;
                for r in r0..r1 {
                    for c in c0..c1 {
                        if let Some(v) = grid.get(r, c) {
                            sum += v;
                            n += 1;
                        }
                    }
                }
                if n > 0 {
                    *slot = sum / n as f64;
                }
            }
        });
    Grid::new(geometry, nodata, values)
}

/// Center of cell `idx`.
pub fn cell_center(grid: &Grid, idx: CellIndex) -> Result<(f64, f64), GridError> {
    grid.cell_center(idx)
}

/// Grid JSON exchanged with web clients: metadata plus south-first row-major
/// values, `null` marking nodata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridJson {
    pub meta: GridJsonMeta,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridJsonMeta {
    pub ncols: usize,
    pub nrows: usize,
    pub x_origin: f64,
    pub y_origin: f64,
    pub cell_size: f64,
    pub nodata: f64,
    pub row_order: String,
}

impl From<&Grid> for GridJson {
    fn from(grid: &Grid) -> Self {
        let g = grid.geometry();
        Self {
            meta: GridJsonMeta {
                ncols: g.ncols,
                nrows: g.nrows,
                x_origin: g.x_origin,
                y_origin: g.y_origin,
                cell_size: g.cell_size,
                nodata: grid.nodata(),
                row_order: "south_to_north".into(),
            },
            values: grid.iter_options().collect(),
        }
    }
}

impl TryFrom<GridJson> for Grid {
    type Error = GridError;

    fn try_from(json: GridJson) -> Result<Self, Self::Error> {
        let m = json.meta;
        let geometry = GridGeometry::new(m.ncols, m.nrows, m.x_origin, m.y_origin, m.cell_size)?;
        Grid::from_options(geometry, m.nodata, json.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom(ncols: usize, nrows: usize) -> GridGeometry {
        GridGeometry::new(ncols, nrows, 0.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn parses_single_cell() {
        let g = parse_ascii_grid(b"ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n5.0\n")
            .unwrap();
        assert_eq!(g.ncols(), 1);
        assert_eq!(g.nrows(), 1);
        assert_eq!(g.values(), &[5.0]);
        assert_eq!(g.nodata(), DEFAULT_NODATA);
    }

    #[test]
    fn flips_north_first_rows() {
        let text = "NCOLS 2\nNROWS 2\nXLLCORNER 10\nYLLCORNER 20\nCELLSIZE 5\nNODATA_VALUE -1\n1 2\n3 -1\n";
        let g = parse_ascii_grid(text.as_bytes()).unwrap();
        // first data line is the north row, so it becomes row 1
        assert_eq!(g.get(1, 0), Some(1.0));
        assert_eq!(g.get(0, 0), Some(3.0));
        assert_eq!(g.get(0, 1), None);
        assert_eq!(g.geometry().x_origin, 10.0);
    }

    #[test]
    fn center_keys_shift_origin() {
        let text = "ncols 1\nnrows 1\nxllcenter 0.5\nyllcenter 0.5\ncellsize 1\n7\n";
        let g = parse_ascii_grid(text.as_bytes()).unwrap();
        assert_eq!(g.geometry().x_origin, 0.0);
        assert_eq!(g.geometry().y_origin, 0.0);
    }

    #[test]
    fn reports_row_length_mismatch_with_line() {
        let text = "ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n4 5\n";
        let err = parse_ascii_grid(text.as_bytes()).unwrap_err();
        match err {
            GridError::Parse { line, message } => {
                assert_eq!(line, 7);
                assert!(message.contains("row length mismatch"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_header_and_tokens() {
        let bad_key = "ncols 1\nnrowz 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1\n";
        assert!(matches!(
            parse_ascii_grid(bad_key.as_bytes()),
            Err(GridError::Parse { line: 2, .. })
        ));
        let bad_token = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 x\n";
        let err = parse_ascii_grid(bad_token.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 6"), "{err}");
        assert!(err.to_string().contains("non-numeric"), "{err}");
        let short = "ncols 1\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1\n";
        assert!(parse_ascii_grid(short.as_bytes())
            .unwrap_err()
            .to_string()
            .contains("row count mismatch"));
        let nan = "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNaN\n";
        assert!(parse_ascii_grid(nan.as_bytes()).is_err());
    }

    #[test]
    fn writes_compact_tokens() {
        let g = Grid::new(geom(1, 1), DEFAULT_NODATA, vec![5.0]).unwrap();
        let text = String::from_utf8(write_ascii_grid(&g)).unwrap();
        assert!(text.contains("ncols 1"));
        let data: Vec<&str> = text.lines().last().unwrap().split_whitespace().collect();
        assert_eq!(data, vec!["5"]);
    }

    #[test]
    fn nodata_serializes_as_declared_token() {
        let g = Grid::new(geom(2, 1), -32768.0, vec![-32768.0, 1.5]).unwrap();
        let text = String::from_utf8(write_ascii_grid(&g)).unwrap();
        assert!(text.contains("NODATA_value -32768"));
        assert_eq!(text.lines().last().unwrap(), "-32768 1.5");
    }

    #[test]
    fn resample_two_by_two_mean() {
        let g = Grid::new(geom(2, 2), DEFAULT_NODATA, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let r = resample_block_mean(&g, 2).unwrap();
        assert_eq!(r.ncols(), 1);
        assert_eq!(r.nrows(), 1);
        assert_eq!(r.values(), &[2.5]);
        assert_eq!(r.cell_size(), 2.0);
    }

    #[test]
    fn resample_constant_and_identity() {
        let g = Grid::filled(geom(7, 5), DEFAULT_NODATA, 3.25).unwrap();
        for factor in [1, 2, 3, 10] {
            let r = resample_block_mean(&g, factor).unwrap();
            assert!(r.values().iter().all(|&v| v == 3.25));
        }
        assert_eq!(resample_block_mean(&g, 1).unwrap(), g);
        assert_eq!(
            resample_block_mean(&g, 0).unwrap_err(),
            GridError::InvalidFactor(0)
        );
    }

    #[test]
    fn resample_partial_blocks_and_nodata() {
        let nd = DEFAULT_NODATA;
        // 3x3, south row first
        let values = vec![1.0, 2.0, 10.0, 3.0, nd, 20.0, nd, nd, nd];
        let g = Grid::new(geom(3, 3), nd, values).unwrap();
        let r = resample_block_mean(&g, 2).unwrap();
        assert_eq!(r.ncols(), 2);
        assert_eq!(r.nrows(), 2);
        assert_eq!(r.get(0, 0), Some(2.0));
        assert_eq!(r.get(0, 1), Some(15.0));
        assert_eq!(r.get(1, 0), None);
        assert_eq!(r.get(1, 1), None);
    }

    #[test]
    fn cell_center_formula() {
        let g = geom(4, 4);
        assert_eq!(g.cell_center(CellIndex::new(0, 0)).unwrap(), (0.5, 0.5));
        let g = GridGeometry::new(5, 5, 100.0, 200.0, 5.0).unwrap();
        assert_eq!(g.cell_center(CellIndex::new(2, 3)).unwrap(), (117.5, 212.5));
        assert!(matches!(
            g.cell_center(CellIndex::new(5, 0)),
            Err(GridError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn grid_json_round_trips() {
        let nd = DEFAULT_NODATA;
        let g = Grid::new(geom(3, 1), nd, vec![0.1 + 0.2, nd, 1e-300]).unwrap();
        let json = serde_json::to_string(&GridJson::from(&g)).unwrap();
        assert!(json.contains("null"));
        let back: GridJson = serde_json::from_str(&json).unwrap();
        assert_eq!(Grid::try_from(back).unwrap(), g);
    }

    fn arb_grid() -> impl Strategy<Value = Grid> {
        (1usize..8, 1usize..8, -1e6f64..1e6, -1e6f64..1e6, 0.01f64..100.0).prop_flat_map(
            |(nc, nr, x, y, cs)| {
                let len = nc * nr;
                proptest::collection::vec(
                    prop_oneof![
                        1 => Just(None),
                        6 => (-1e5f64..1e5).prop_map(Some),
                    ],
                    len,
                )
                .prop_map(move |vals| {
                    let geometry = GridGeometry::new(nc, nr, x, y, cs).unwrap();
                    Grid::from_options(geometry, DEFAULT_NODATA, vals).unwrap()
                })
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn ascii_round_trip(g in arb_grid()) {
            let back = parse_ascii_grid(&write_ascii_grid(&g)).unwrap();
            prop_assert_eq!(back, g);
        }

        #[test]
        fn resample_preserves_grand_mean(
            nc in 1usize..4, nr in 1usize..4, factor in 1usize..4,
            seed in proptest::collection::vec(-1e3f64..1e3, 144)
        ) {
            let geometry = geom(nc * factor, nr * factor);
            let values: Vec<f64> = seed.into_iter().take(geometry.len()).collect();
            prop_assume!(values.len() == geometry.len());
            let g = Grid::new(geometry, DEFAULT_NODATA, values.clone()).unwrap();
            let r = resample_block_mean(&g, factor).unwrap();
            let fine = values.iter().sum::<f64>() / values.len() as f64;
            let coarse = r.values().iter().sum::<f64>() / r.values().len() as f64;
            prop_assert!((fine - coarse).abs() <= 1e-12 * fine.abs().max(1.0));
        }

        #[test]
        fn resample_ignores_nodata(g in arb_grid(), factor in 1usize..4) {
            let r = resample_block_mean(&g, factor).unwrap();
            for row in 0..r.nrows() {
                for col in 0..r.ncols() {
                    let mut vals = Vec::new();
                    for rr in row * factor..((row + 1) * factor).min(g.nrows()) {
                        for cc in col * factor..((col + 1) * factor).min(g.ncols()) {
                            vals.extend(g.get(rr, cc));
                        }
                    }
                    match r.get(row, col) {
                        None => prop_assert!(vals.is_empty()),
                        Some(m) => {
                            let expect = vals.iter().sum::<f64>() / vals.len() as f64;
                            prop_assert!((m - expect).abs() <= 1e-9 * expect.abs().max(1.0));
                        }
                    }
                }
            }
        }
    }
}
