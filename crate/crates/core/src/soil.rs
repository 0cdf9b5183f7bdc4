//! Soil map units: GeoJSON ingestion, attribute schema and cell assignment.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::raster::GridGeometry;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SoilError {
    #[error("invalid GeoJSON: {0}")]
    InvalidGeoJson(String),
    #[error("feature {feature}: non-polygon feature ({geometry})")]
    NonPolygon { feature: usize, geometry: String },
    #[error("feature {feature}: missing mandatory attribute '{key}'")]
    MissingKey { feature: usize, key: String },
    #[error("feature {feature}: attribute '{key}' should be {expected}")]
    AttributeType {
        feature: usize,
        key: String,
        expected: &'static str,
    },
    #[error("degenerate polygon: {0}")]
    Degenerate(String),
    #[error("invalid attribute schema: {0}")]
    InvalidSchema(String),
}

pub type Point = (f64, f64);

/// A single soil attribute value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Number(f64),
    Text(String),
}

impl AttrValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AttrValue::Number(v) => Some(*v),
            AttrValue::Text(_) => None,
        }
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Number(v) => write!(f, "{v}"),
            AttrValue::Text(s) => f.write_str(s),
        }
    }
}

/// Which attributes a soil layer may carry, and of which type.
///
/// Keys follow SSURGO column names. The JSON form is
/// `{"mandatory": [...], "categorical": [...], "numeric": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSchema {
    #[serde(default)]
    pub mandatory: Vec<String>,
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default)]
    pub numeric: Vec<String>,
}

impl Default for AttributeSchema {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|k| k.to_string()).collect::<Vec<_>>();
        Self {
            mandatory: s(&["compname"]),
            categorical: s(&[
                "mukey",
                "compname",
                "drainagecl",
                "texdesc",
                "pmgroupname",
                "taxorder",
                "taxsuborder",
            ]),
            numeric: s(&[
                "nccpi3corn",
                "nccpi3soy",
                "sandtotal_r",
                "silttotal_r",
                "claytotal_r",
            ]),
        }
    }
}

impl AttributeSchema {
    pub fn from_json(bytes: &[u8]) -> Result<Self, SoilError> {
        let schema: Self =
            serde_json::from_slice(bytes).map_err(|e| SoilError::InvalidSchema(e.to_string()))?;
        for key in &schema.mandatory {
            if !schema.categorical.contains(key) && !schema.numeric.contains(key) {
                return Err(SoilError::InvalidSchema(format!(
                    "mandatory key '{key}' is neither categorical nor numeric"
                )));
            }
        }
        if let Some(k) = schema.categorical.iter().find(|k| schema.numeric.contains(k)) {
            return Err(SoilError::InvalidSchema(format!(
                "key '{k}' declared both categorical and numeric"
            )));
        }
        Ok(schema)
    }

    /// Declared columns in table order: categorical keys, then numeric keys.
    pub fn columns(&self) -> impl Iterator<Item = &str> {
        self.categorical
            .iter()
            .chain(self.numeric.iter())
            .map(String::as_str)
    }

    pub fn is_numeric(&self, key: &str) -> bool {
        self.numeric.iter().any(|k| k == key)
    }

    pub fn is_declared(&self, key: &str) -> bool {
        self.categorical.iter().any(|k| k == key) || self.is_numeric(key)
    }
}

/// A closed linear ring stored without the repeated closing vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    points: Vec<Point>,
}

impl Ring {
    /// Validates vertex count, area and simplicity. A trailing vertex equal to
    /// the first is dropped.
    pub fn new(mut points: Vec<Point>) -> Result<Self, SoilError> {
        if points.len() >= 2 && points.first() == points.last() {
            points.pop();
        }
        if points.iter().any(|(x, y)| !(x.is_finite() && y.is_finite())) {
            return Err(SoilError::Degenerate("non-finite coordinate".into()));
        }
        if points.len() < 3 {
            return Err(SoilError::Degenerate(format!(
                "ring has {} distinct vertices, need at least 3",
                points.len()
            )));
        }
        let ring = Self { points };
        if ring.signed_area() == 0.0 {
            return Err(SoilError::Degenerate("ring has zero area".into()));
        }
        if let Some((i, j)) = ring.first_self_intersection() {
            return Err(SoilError::Degenerate(format!(
                "ring is self-intersecting (edges {i} and {j})"
            )));
        }
        Ok(ring)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Positive for counter-clockwise rings.
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        let mut twice = 0.0;
        for i in 0..n {
            let (x0, y0) = self.points[i];
            let (x1, y1) = self.points[(i + 1) % n];
            twice += x0 * y1 - x1 * y0;
        }
        twice / 2.0
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.points.len();
        (0..n).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }

    fn first_self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.points.len();
        let edge = |i: usize| (self.points[i], self.points[(i + 1) % n]);
        for i in 0..n {
            let (a, b) = edge(i);
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (c, d) = edge(j);
                if adjacent {
                    // neighbours share one vertex; they may not fold back on each other
                    let shared = if j == i + 1 { b } else { a };
                    let (p, q) = if j == i + 1 { (a, d) } else { (b, c) };
                    if orient(p, shared, q) == 0.0 && dot(p, shared, q) > 0.0 {
                        return Some((i, j));
                    }
                    continue;
                }
                if segments_intersect(a, b, c, d) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Ray-casting parity test; boundary points are handled by the caller.
    fn crossings_contain(&self, p: Point) -> bool {
        let (px, py) = p;
        let mut inside = false;
        for ((x0, y0), (x1, y1)) in self.edges() {
            if (y0 > py) != (y1 > py) {
                let t = (py - y0) / (y1 - y0);
                let x = x0 + t * (x1 - x0);
                if px < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn on_boundary(&self, p: Point) -> bool {
        self.edges().any(|(a, b)| on_segment(a, b, p))
    }
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Dot product of `(p - s)` and `(q - s)`.
fn dot(p: Point, s: Point, q: Point) -> f64 {
    (p.0 - s.0) * (q.0 - s.0) + (p.1 - s.1) * (q.1 - s.1)
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    orient(a, b, p) == 0.0
        && p.0 >= a.0.min(b.0)
        && p.0 <= a.0.max(b.0)
        && p.1 >= a.1.min(b.1)
        && p.1 <= a.1.max(b.1)
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    on_segment(c, d, a) || on_segment(c, d, b) || on_segment(a, b, c) || on_segment(a, b, d)
}

/// A polygon with one exterior ring and zero or more holes.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub exterior: Ring,
    pub holes: Vec<Ring>,
}

impl Polygon {
    pub fn new(exterior: Ring, holes: Vec<Ring>) -> Self {
        Self { exterior, holes }
    }

    pub fn area(&self) -> f64 {
        self.exterior.signed_area().abs() - self.holes.iter().map(|h| h.signed_area().abs()).sum::<f64>()
    }

    pub fn bbox(&self) -> [f64; 4] {
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for &(x, y) in self.exterior.points() {
            b[0] = b[0].min(x);
            b[1] = b[1].min(y);
            b[2] = b[2].max(x);
            b[3] = b[3].max(y);
        }
        b
    }

    /// True when `p` is inside the exterior or on any ring, and not strictly
    /// inside a hole.
    pub fn contains(&self, p: Point) -> bool {
        let b = self.bbox();
        if p.0 < b[0] || p.0 > b[2] || p.1 < b[1] || p.1 > b[3] {
            return false;
        }
        if self.exterior.on_boundary(p) || self.holes.iter().any(|h| h.on_boundary(p)) {
            return true;
        }
        self.exterior.crossings_contain(p) && !self.holes.iter().any(|h| h.crossings_contain(p))
    }
}

/// One or more polygons sharing an attribute set.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiPolygon(pub Vec<Polygon>);

impl MultiPolygon {
    pub fn contains(&self, p: Point) -> bool {
        self.0.iter().any(|poly| poly.contains(p))
    }

    pub fn area(&self) -> f64 {
        self.0.iter().map(Polygon::area).sum()
    }

    pub fn bbox(&self) -> [f64; 4] {
        self.0.iter().map(Polygon::bbox).fold(
            [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
            |a, b| [a[0].min(b[0]), a[1].min(b[1]), a[2].max(b[2]), a[3].max(b[3])],
        )
    }
}

/// Returns true iff `p` is inside `polygon` or on its boundary.
pub fn point_in_polygon(p: Point, polygon: &Polygon) -> bool {
    polygon.contains(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapUnit {
    pub geometry: MultiPolygon,
    pub attributes: BTreeMap<String, AttrValue>,
    /// Property keys not declared in the schema; kept in `attributes`.
    pub unknown_keys: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoilAttributeLayer {
    pub map_units: Vec<MapUnit>,
    pub schema: AttributeSchema,
}

fn gj_err(msg: impl Into<String>) -> SoilError {
    SoilError::InvalidGeoJson(msg.into())
}

fn parse_position(v: &Value) -> Result<Point, SoilError> {
    let arr = v.as_array().ok_or_else(|| gj_err("position is not an array"))?;
    if arr.len() < 2 {
        return Err(gj_err("position needs two coordinates"));
    }
    let x = arr[0].as_f64().ok_or_else(|| gj_err("coordinate is not a number"))?;
    let y = arr[1].as_f64().ok_or_else(|| gj_err("coordinate is not a number"))?;
    Ok((x, y))
}

fn parse_polygon_coords(v: &Value) -> Result<Polygon, SoilError> {
    let rings = v
        .as_array()
        .ok_or_else(|| gj_err("polygon coordinates are not an array"))?;
    let mut parsed = rings
        .iter()
        .map(|ring| {
            let pts = ring
                .as_array()
                .ok_or_else(|| gj_err("ring is not an array"))?
                .iter()
                .map(parse_position)
                .collect::<Result<Vec<_>, _>>()?;
            Ring::new(pts)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter();
    let exterior = parsed.next().ok_or_else(|| gj_err("polygon has no rings"))?;
    Ok(Polygon::new(exterior, parsed.collect()))
}

/// Parses a Polygon or MultiPolygon geometry object.
pub fn parse_geometry(geometry: &Value, feature: usize) -> Result<MultiPolygon, SoilError> {
    let kind = geometry
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| gj_err(format!("feature {feature}: geometry has no type")))?;
    let coords = geometry.get("coordinates");
    match kind {
        "Polygon" => {
            let c = coords.ok_or_else(|| gj_err("geometry has no coordinates"))?;
            Ok(MultiPolygon(vec![parse_polygon_coords(c)?]))
        }
        "MultiPolygon" => {
            let c = coords
                .and_then(Value::as_array)
                .ok_or_else(|| gj_err("geometry has no coordinates"))?;
            let polys = c.iter().map(parse_polygon_coords).collect::<Result<Vec<_>, _>>()?;
            if polys.is_empty() {
                return Err(gj_err("empty MultiPolygon"));
            }
            Ok(MultiPolygon(polys))
        }
        other => Err(SoilError::NonPolygon {
            feature,
            geometry: other.to_string(),
        }),
    }
}

fn features_of(doc: &Value) -> Result<Vec<&Value>, SoilError> {
    match doc.get("type").and_then(Value::as_str) {
        Some("FeatureCollection") => Ok(doc
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| gj_err("FeatureCollection has no features array"))?
            .iter()
            .collect()),
        Some("Feature") => Ok(vec![doc]),
        Some(t) => Err(gj_err(format!("expected a FeatureCollection, found {t}"))),
        None => Err(gj_err("document has no type")),
    }
}

/// Parses a GeoJSON FeatureCollection of soil map units.
pub fn parse_soil_layer(bytes: &[u8], schema: &AttributeSchema) -> Result<SoilAttributeLayer, SoilError> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| gj_err(e.to_string()))?;
    let mut map_units = Vec::new();
    for (i, feature) in features_of(&doc)?.into_iter().enumerate() {
        let geometry = feature
            .get("geometry")
            .filter(|g| !g.is_null())
            .ok_or_else(|| gj_err(format!("feature {i} has no geometry")))?;
        let geometry = parse_geometry(geometry, i)?;
        let mut attributes = BTreeMap::new();
        let mut unknown_keys = Vec::new();
        if let Some(props) = feature.get("properties").and_then(Value::as_object) {
            for (key, value) in props {
                let attr = match value {
                    Value::Null => continue,
                    Value::Number(n) => AttrValue::Number(n.as_f64().unwrap_or(f64::NAN)),
                    Value::String(s) => AttrValue::Text(s.clone()),
                    Value::Bool(b) => AttrValue::Text(b.to_string()),
                    _ => AttrValue::Text(value.to_string()),
                };
                if !schema.is_declared(key) {
                    unknown_keys.push(key.clone());
                } else if schema.is_numeric(key) && attr.as_f64().is_none() {
                    return Err(SoilError::AttributeType {
                        feature: i,
                        key: key.clone(),
                        expected: "a number",
                    });
                } else if !schema.is_numeric(key) && matches!(attr, AttrValue::Number(_)) {
                    return Err(SoilError::AttributeType {
                        feature: i,
                        key: key.clone(),
                        expected: "a string",
                    });
                }
                attributes.insert(key.clone(), attr);
            }
        }
        for key in &schema.mandatory {
            if !attributes.contains_key(key) {
                return Err(SoilError::MissingKey {
                    feature: i,
                    key: key.clone(),
                });
            }
        }
        map_units.push(MapUnit {
            geometry,
            attributes,
            unknown_keys,
        });
    }
    Ok(SoilAttributeLayer {
        map_units,
        schema: schema.clone(),
    })
}

/// Parses a field boundary: a FeatureCollection, Feature, or bare Polygon or
/// MultiPolygon geometry. All polygons are merged into one.
pub fn parse_boundary(bytes: &[u8]) -> Result<MultiPolygon, SoilError> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| gj_err(e.to_string()))?;
    if matches!(
        doc.get("type").and_then(Value::as_str),
        Some("Polygon" | "MultiPolygon" | "LineString" | "Point" | "MultiLineString" | "MultiPoint")
    ) {
        return parse_geometry(&doc, 0);
    }
    let mut polygons = Vec::new();
    for (i, feature) in features_of(&doc)?.into_iter().enumerate() {
        let geometry = feature
            .get("geometry")
            .filter(|g| !g.is_null())
            .ok_or_else(|| gj_err(format!("feature {i} has no geometry")))?;
        polygons.extend(parse_geometry(geometry, i)?.0);
    }
    if polygons.is_empty() {
        return Err(gj_err("boundary has no polygons"));
    }
    Ok(MultiPolygon(polygons))
}

/// Map-unit index for every cell of a grid, `None` where no unit covers the
/// cell center.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSoil {
    pub geometry: GridGeometry,
    pub units: Vec<Option<usize>>,
}

impl CellSoil {
    pub fn attributes<'a>(
        &self,
        layer: &'a SoilAttributeLayer,
        offset: usize,
    ) -> Option<&'a BTreeMap<String, AttrValue>> {
        self.units[offset].map(|u| &layer.map_units[u].attributes)
    }
}

/// Tests each cell center against the map units in input order; the first
/// containing unit wins.
pub fn assign_soil_attributes(geometry: &GridGeometry, layer: &SoilAttributeLayer) -> CellSoil {
    let boxes: Vec<[f64; 4]> = layer.map_units.iter().map(|u| u.geometry.bbox()).collect();
    let units = (0..geometry.len())
        .into_par_iter()
        .map(|offset| {
            let (x, y) = geometry.center_unchecked(geometry.index_of(offset));
            layer.map_units.iter().zip(&boxes).position(|(unit, b)| {
                x >= b[0] && x <= b[2] && y >= b[1] && y <= b[3] && unit.geometry.contains((x, y))
            })
        })
        .collect();
    CellSoil {
        geometry: *geometry,
        units,
    }
}

/// GeoJSON geometry object for a multipolygon.
pub fn multipolygon_to_geojson(mp: &MultiPolygon) -> Value {
    let ring_coords = |ring: &Ring| {
        let mut pts: Vec<Value> = ring
            .points()
            .iter()
            .map(|&(x, y)| serde_json::json!([x, y]))
            .collect();
        if let Some(first) = pts.first().cloned() {
            pts.push(first);
        }
        Value::Array(pts)
    };
    let polys: Vec<Value> = mp
        .0
        .iter()
        .map(|p| {
            let mut rings = vec![ring_coords(&p.exterior)];
            rings.extend(p.holes.iter().map(ring_coords));
            Value::Array(rings)
        })
        .collect();
    serde_json::json!({"type": "MultiPolygon", "coordinates": polys})
}
