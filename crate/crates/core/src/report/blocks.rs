//! Block maps: per-feature cell labels dissolved into rectilinear polygons.

use std::collections::{BTreeMap, HashSet};

use serde_json::{json, Value};

use super::canonical::canonical_json;
use super::GroupingFeature;
use crate::raster::{CellIndex, GridGeometry};
use crate::stats::BinSpec;

/// Label for cells without a feature value or outside every bin.
pub const UNASSIGNED: &str = "unassigned";

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlocks {
    pub feature: GroupingFeature,
    /// `None` when no bins could be formed; every cell is then unassigned.
    pub bins: Option<BinSpec>,
    /// Aligned with [`BlockMap::cells`].
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockMap {
    pub geometry: Option<GridGeometry>,
    pub cells: Vec<CellIndex>,
    pub features: Vec<FeatureBlocks>,
}

/// Lattice vertex `(col, row)`: the lower-left corner of cell `(row, col)`.
type Vertex = (i64, i64);
pub type LatticeRing = Vec<Vertex>;
/// Exterior ring first, then holes.
pub type LatticePolygon = Vec<LatticeRing>;

fn components(cells: &[CellIndex]) -> Vec<Vec<CellIndex>> {
    let set: HashSet<(usize, usize)> = cells.iter().map(|c| (c.row, c.col)).collect();
    let mut sorted: Vec<(usize, usize)> = set.iter().copied().collect();
    sorted.sort_unstable();
    let mut seen = HashSet::with_capacity(set.len());
    let mut out = Vec::new();
    for start in sorted {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![start];
        while let Some((r, c)) = stack.pop() {
            comp.push(CellIndex::new(r, c));
            let mut neighbors = vec![(r + 1, c), (r, c + 1)];
            if r > 0 {
                neighbors.push((r - 1, c));
            }
            if c > 0 {
                neighbors.push((r, c - 1));
            }
            for n in neighbors {
                if set.contains(&n) && seen.insert(n) {
                    stack.push(n);
                }
            }
        }
        comp.sort_unstable_by_key(|c| (c.row, c.col));
        out.push(comp);
    }
    out
}

fn twice_area(ring: &[Vertex]) -> i64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum()
}

fn drop_collinear(ring: Vec<Vertex>) -> Vec<Vertex> {
    let n = ring.len();
    let keep = |i: usize| {
        let (p, v, q) = (ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]);
        (v.0 - p.0) * (q.1 - v.1) - (v.1 - p.1) * (q.0 - v.0) != 0
    };
    (0..n).filter(|&i| keep(i)).map(|i| ring[i]).collect()
}

/// Boundary rings of one 4-connected component, interior on the left.
/// At a vertex shared by two diagonal cells the path turns right, keeping the
/// cells joined. Rings are then simple and may touch only at single vertices.
fn trace_component(cells: &[CellIndex]) -> LatticePolygon {
    let set: HashSet<(i64, i64)> = cells.iter().map(|c| (c.row as i64, c.col as i64)).collect();
    let occupied = |r: i64, c: i64| set.contains(&(r, c));
    let mut outgoing: BTreeMap<Vertex, Vec<Vertex>> = BTreeMap::new();
    let mut add = |a: Vertex, b: Vertex| outgoing.entry(a).or_default().push(b);
    for cell in cells {
        let (r, c) = (cell.row as i64, cell.col as i64);
        if !occupied(r - 1, c) {
            add((c, r), (c + 1, r));
        }
        if !occupied(r, c + 1) {
            add((c + 1, r), (c + 1, r + 1));
        }
        if !occupied(r + 1, c) {
            add((c + 1, r + 1), (c, r + 1));
        }
        if !occupied(r, c - 1) {
            add((c, r + 1), (c, r));
        }
    }
    let successor = |from: Vertex, at: Vertex| -> Vertex {
        let options = &outgoing[&at];
        if options.len() == 1 {
            return options[0];
        }
        let d = (at.0 - from.0, at.1 - from.1);
        let right = (d.1, -d.0);
        *options
            .iter()
            .find(|o| (o.0 - at.0, o.1 - at.1) == right)
            .expect("pinch vertices offer a right turn")
    };
    let mut used: HashSet<(Vertex, Vertex)> = HashSet::new();
    let mut rings = Vec::new();
    for (&start, ends) in &outgoing {
        for &first in ends {
            if used.contains(&(start, first)) {
                continue;
            }
            let mut ring = vec![start];
            let (mut a, mut b) = (start, first);
            loop {
                used.insert((a, b));
                let c = successor(a, b);
                if (b, c) == (start, first) {
                    break;
                }
                ring.push(b);
                a = b;
                b = c;
            }
            rings.push(drop_collinear(ring));
        }
    }
    let (mut exterior, holes): (Vec<LatticeRing>, Vec<LatticeRing>) =
        rings.into_iter().partition(|r| twice_area(r) > 0);
    assert_eq!(exterior.len(), 1, "a 4-connected component has exactly one exterior ring");
    let mut polygon = vec![exterior.remove(0)];
    polygon.extend(holes);
    polygon
}

/// Dissolves cells into one polygon per 4-connected component.
pub fn dissolve(cells: &[CellIndex]) -> Vec<LatticePolygon> {
    components(cells).iter().map(|c| trace_component(c)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub feature: GroupingFeature,
    pub label: String,
    pub cell_count: usize,
    pub polygons: Vec<LatticePolygon>,
}

impl BlockMap {
    /// Cells grouped by label for each feature, labels sorted.
    pub fn blocks(&self) -> Vec<Block> {
        let mut out = Vec::new();
        for fb in &self.features {
            let mut by_label: BTreeMap<&str, Vec<CellIndex>> = BTreeMap::new();
            for (cell, label) in self.cells.iter().zip(&fb.labels) {
                by_label.entry(label.as_str()).or_default().push(*cell);
            }
            for (label, cells) in by_label {
                out.push(Block {
                    feature: fb.feature,
                    label: label.to_string(),
                    cell_count: cells.len(),
                    polygons: dissolve(&cells),
                });
            }
        }
        out
    }

    /// Row-major label grid (row 0 southernmost) for one feature.
    pub fn label_grid(&self, feature: GroupingFeature) -> Option<Vec<Option<String>>> {
        let geometry = self.geometry?;
        let fb = self.features.iter().find(|f| f.feature == feature)?;
        let mut grid = vec![None; geometry.len()];
        for (i, cell) in self.cells.iter().enumerate() {
            if geometry.contains(*cell) {
                grid[geometry.offset(*cell)] = Some(fb.labels[i].clone());
            }
        }
        Some(grid)
    }

    pub fn to_geojson(&self) -> Value {
        let features: Vec<Value> = match self.geometry {
            None => Vec::new(),
            Some(g) => self
                .blocks()
                .into_iter()
                .map(|b| {
                    let point = |(c, r): Vertex| json!([g.x_origin + c as f64 * g.cell_size, g.y_origin + r as f64 * g.cell_size]);
                    let coords: Vec<Value> = b
                        .polygons
                        .iter()
                        .map(|poly| {
                            Value::Array(
                                poly.iter()
                                    .map(|ring| {
                                        let mut pts: Vec<Value> = ring.iter().map(|&v| point(v)).collect();
                                        pts.push(point(ring[0]));
                                        Value::Array(pts)
                                    })
                                    .collect(),
                            )
                        })
                        .collect();
                    json!({
                        "type": "Feature",
                        "geometry": {"type": "MultiPolygon", "coordinates": coords},
                        "properties": {
                            "feature": b.feature.name(),
                            "group_label": b.label,
                            "cell_count": b.cell_count,
                        }
                    })
                })
                .collect(),
        };
        json!({"type": "FeatureCollection", "features": features})
    }
}

pub fn emit_block_geojson(map: &BlockMap) -> Vec<u8> {
    canonical_json(&map.to_geojson(), false)
}
