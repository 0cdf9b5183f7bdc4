//! Linear interpolation of scattered yield points onto grid cell centers.

pub mod delaunay;
pub mod predicates;

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::raster::{CellIndex, Grid, GridGeometry, DEFAULT_NODATA};
pub use delaunay::{Delaunay, Location, Triangle};
pub use predicates::Point;

#[derive(Debug, Error)]
pub enum InterpolationError {
    #[error("need at least 3 unique points, found {0}")]
    TooFewPoints(usize),
    #[error("all points are collinear")]
    Collinear,
    #[error("degenerate triangle (zero area)")]
    DegenerateTriangle,
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YieldPoint {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct YieldPointSet {
    pub season: String,
    pub points: Vec<YieldPoint>,
}

/// Season label for a yield file without a season column: the file stem.
pub fn default_season_label(name: &str) -> String {
    Path::new(name)
        .file_stem()
        .and_then(|s| s.to_str())
        .filter(|s| !s.is_empty())
        .unwrap_or("default")
        .to_string()
}

fn csv_err(line: usize, message: impl Into<String>) -> InterpolationError {
    InterpolationError::Csv {
        line,
        message: message.into(),
    }
}

/// Parses a yield CSV with header `x,y,yield` and an optional `season`
/// column. Sets are returned in order of first appearance.
pub fn parse_yield_csv(bytes: &[u8], default_season: &str) -> Result<Vec<YieldPointSet>, InterpolationError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header = reader.headers().map_err(|e| csv_err(1, e.to_string()))?.clone();
    let find = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(ix), Some(iy), Some(iv)) = (find("x"), find("y"), find("yield")) else {
        return Err(csv_err(1, "expected header x,y,yield"));
    };
    let is = find("season");

    let mut sets: Vec<YieldPointSet> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| csv_err(line, e.to_string()))?;
        let num = |j: usize, what: &str| -> Result<f64, InterpolationError> {
            let raw = record.get(j).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| csv_err(line, format!("invalid {what} '{raw}'")))
        };
        let point = YieldPoint {
            x: num(ix, "x")?,
            y: num(iy, "y")?,
            value: num(iv, "yield")?,
        };
        if point.value < 0.0 {
            return Err(csv_err(line, format!("negative yield {}", point.value)));
        }
        let season = match is.and_then(|j| record.get(j)) {
            Some(s) if !s.is_empty() => s,
            _ => default_season,
        };
        match sets.iter_mut().find(|s| s.season == season) {
            Some(set) => set.points.push(point),
            None => sets.push(YieldPointSet {
                season: season.to_string(),
                points: vec![point],
            }),
        }
    }
    Ok(sets)
}

/// Merges points with identical coordinates, averaging their yields.
/// First-occurrence order is kept.
pub fn dedup_points(points: &[YieldPoint]) -> Vec<YieldPoint> {
    let key = |p: &YieldPoint| ((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits());
    let mut slots: HashMap<(u64, u64), usize> = HashMap::new();
    let mut merged: Vec<(YieldPoint, f64, usize)> = Vec::new();
    for p in points {
        match slots.get(&key(p)) {
            Some(&i) => {
                merged[i].1 += p.value;
                merged[i].2 += 1;
            }
            None => {
                slots.insert(key(p), merged.len());
                merged.push((*p, p.value, 1));
            }
        }
    }
    merged
        .into_iter()
        .map(|(p, sum, n)| YieldPoint {
            value: if n == 1 { p.value } else { sum / n as f64 },
            ..p
        })
        .collect()
}

/// Barycentric coordinates of `q` in the triangle `(v1, v2, v3)`.
pub fn barycentric_weights(tri: [Point; 3], q: Point) -> Result<(f64, f64, f64), InterpolationError> {
    let [(x1, y1), (x2, y2), (x3, y3)] = tri;
    let denom = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3);
    if denom == 0.0 || !denom.is_finite() {
        return Err(InterpolationError::DegenerateTriangle);
    }
    let l1 = ((y2 - y3) * (q.0 - x3) + (x3 - x2) * (q.1 - y3)) / denom;
    let l2 = ((y3 - y1) * (q.0 - x3) + (x1 - x3) * (q.1 - y3)) / denom;
    Ok((l1, l2, 1.0 - l1 - l2))
}

/// A Delaunay triangulation carrying one yield value per vertex.
#[derive(Debug, Clone)]
pub struct Triangulation {
    mesh: Delaunay,
    values: Vec<f64>,
}

impl Triangulation {
    pub fn new(points: &[YieldPoint]) -> Result<Self, InterpolationError> {
        let unique = dedup_points(points);
        let coords = unique.iter().map(|p| (p.x, p.y)).collect();
        let mesh = Delaunay::new(coords)?;
        Ok(Self {
            mesh,
            values: unique.iter().map(|p| p.value).collect(),
        })
    }

    pub fn mesh(&self) -> &Delaunay {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Containing triangle of `q`, or `None` outside the hull.
    pub fn locate(&self, q: Point, hint: usize) -> Option<usize> {
        match self.mesh.locate(q, hint) {
            Location::Inside(t) | Location::OnEdge(t, _) | Location::Vertex(t, _) => Some(t),
            Location::Outside(..) => None,
        }
    }

    /// Interpolated value and the triangle used.
    pub fn interpolate_with_hint(&self, q: Point, hint: usize) -> Option<(f64, usize)> {
        let t = self.locate(q, hint)?;
        let tri = self.mesh.triangles()[t];
        let (l1, l2, l3) = barycentric_weights(self.mesh.vertices(t), q).ok()?;
        let [z1, z2, z3] = tri.v.map(|i| self.values[i]);
        let lo = z1.min(z2).min(z3);
        let hi = z1.max(z2).max(z3);
        // rounding can push a convex combination a few ulps past its inputs
        Some(((l1 * z1 + l2 * z2 + l3 * z3).clamp(lo, hi), t))
    }

    pub fn interpolate_at(&self, q: Point) -> Option<f64> {
        self.interpolate_with_hint(q, 0).map(|(v, _)| v)
    }
}

/// Interpolates onto every cell center; cells outside the hull are nodata.
pub fn interpolate_grid(points: &YieldPointSet, target: &GridGeometry) -> Result<Grid, InterpolationError> {
    let tri = Triangulation::new(&points.points)?;
    Ok(interpolate_onto(&tri, target))
}

pub fn interpolate_onto(tri: &Triangulation, target: &GridGeometry) -> Grid {
    let ncols = target.ncols;
    let mut values = vec![DEFAULT_NODATA; target.len()];
    values.par_chunks_mut(ncols).enumerate().for_each(|(row, out)| {
        let mut hint = 0;
        for (col, slot) in out.iter_mut().enumerate() {
            let q = target.center_unchecked(CellIndex::new(row, col));
            if let Some((v, t)) = tri.interpolate_with_hint(q, hint) {
                *slot = v;
                hint = t;
            }
        }
    });
    Grid::new(*target, DEFAULT_NODATA, values).expect("interpolated values are finite")
}
