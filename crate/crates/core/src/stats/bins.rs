//! Interval and categorical binning.
//!
//! Intervals are left-open and right-closed, `(a, b]`, except the first bin,
//! which also holds its left edge.

use serde::{Deserialize, Serialize};

use super::kde::{mean, sample_sd};
use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinKind {
    CentralTendency,
    ExplicitEdges,
    EqualWidth,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub kind: BinKind,
    /// Empty for categorical specs.
    pub edges: Vec<f64>,
    pub labels: Vec<String>,
}

fn render(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// `"(a, b]"` labels at 3 decimals, widened until every edge renders
/// distinctly.
pub fn interval_labels(edges: &[f64]) -> Vec<String> {
    let mut decimals = 3;
    let rendered = loop {
        let r: Vec<String> = edges.iter().map(|&e| render(e, decimals)).collect();
        if r.windows(2).all(|w| w[0] != w[1]) || decimals >= 17 {
            break r;
        }
        decimals += 1;
    };
    rendered.windows(2).map(|w| format!("({}, {}]", w[0], w[1])).collect()
}

impl BinSpec {
    pub fn from_edges(kind: BinKind, edges: Vec<f64>) -> Result<Self, StatsError> {
        if edges.len() < 2 {
            return Err(StatsError::InvalidEdges(format!("need at least 2 edges, got {}", edges.len())));
        }
        if edges.iter().any(|e| !e.is_finite()) {
            return Err(StatsError::InvalidEdges("edges must be finite".into()));
        }
        if let Some(w) = edges.windows(2).find(|w| w[0] >= w[1]) {
            return Err(StatsError::InvalidEdges(format!(
                "edges must be strictly increasing ({} >= {})",
                w[0], w[1]
            )));
        }
        let labels = interval_labels(&edges);
        Ok(Self { kind, edges, labels })
    }

    /// One bin per distinct category, in sorted order.
    pub fn categorical<I, S>(values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut labels: Vec<String> = values.into_iter().map(Into::into).collect();
        labels.sort();
        labels.dedup();
        Self {
            kind: BinKind::Categorical,
            edges: Vec::new(),
            labels,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Bin index of a numeric value, or `None` outside every bin.
    pub fn assign(&self, v: f64) -> Option<usize> {
        let (first, last) = (*self.edges.first()?, *self.edges.last()?);
        if v.is_nan() || v < first || v > last {
            return None;
        }
        if v == first {
            return Some(0);
        }
        Some(self.edges.partition_point(|&e| e < v) - 1)
    }

    pub fn assign_category(&self, value: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(value)).ok()
    }
}

pub fn assign_bins(values: &[f64], spec: &BinSpec) -> Vec<Option<usize>> {
    values.iter().map(|&v| spec.assign(v)).collect()
}

/// `[min, mean − σ, mean, mean + σ, max]`, provided these are strictly
/// increasing.
pub fn central_tendency_edges(min: f64, mean: f64, sd: f64, max: f64) -> Result<Vec<f64>, StatsError> {
    let edges = vec![min, mean - sd, mean, mean + sd, max];
    if edges.iter().all(|e| e.is_finite()) && edges.windows(2).all(|w| w[0] < w[1]) {
        Ok(edges)
    } else {
        Err(StatsError::BinPrecondition(format!(
            "central-tendency edges not strictly increasing: min={min}, mean={mean}, sd={sd}, max={max}"
        )))
    }
}

pub fn central_tendency_from_moments(min: f64, mean: f64, sd: f64, max: f64) -> Result<BinSpec, StatsError> {
    BinSpec::from_edges(BinKind::CentralTendency, central_tendency_edges(min, mean, sd, max)?)
}

fn min_max(data: &[f64]) -> (f64, f64) {
    data.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

pub fn central_tendency_bins(data: &[f64]) -> Result<BinSpec, StatsError> {
    if data.len() < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, found: data.len() });
    }
    let (min, max) = min_max(data);
    central_tendency_from_moments(min, mean(data), sample_sd(data), max)
}

pub fn equal_width_bins(data: &[f64], count: usize) -> Result<BinSpec, StatsError> {
    if data.is_empty() || count == 0 {
        return Err(StatsError::TooFewSamples { needed: 1, found: data.len() });
    }
    let (min, max) = min_max(data);
    if !(min < max) {
        return Err(StatsError::ZeroVariance);
    }
    let mut edges: Vec<f64> = (0..=count)
        .map(|i| min + (max - min) * i as f64 / count as f64)
        .collect();
    edges[count] = max;
    BinSpec::from_edges(BinKind::EqualWidth, edges)
}
