//! One-way analysis of variance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::distributions::f_distribution_sf;
use super::StatsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub label: String,
    pub n: usize,
    pub mean: f64,
    /// Sample variance; `None` for single-observation groups.
    pub variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub ssb: f64,
    pub ssw: f64,
    pub sst: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub msb: f64,
    pub msw: f64,
    pub f: f64,
    pub p_value: f64,
    pub r_squared: f64,
    pub groups: Vec<GroupSummary>,
}

/// One-way ANOVA over labelled groups.
///
/// When every group is internally constant and all means agree the F ratio
/// is 0/0; it is reported as `F = 0, p = 1`. Constant groups with differing
/// means have no finite F and are an error.
pub fn anova_oneway(groups: &BTreeMap<String, Vec<f64>>) -> Result<AnovaResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    if let Some((label, _)) = groups.iter().find(|(_, v)| v.is_empty()) {
        return Err(StatsError::EmptyGroup(label.clone()));
    }
    let k = groups.len();
    let n_total: usize = groups.values().map(Vec::len).sum();
    if n_total <= k {
        return Err(StatsError::NoWithinDf { n: n_total, k });
    }
    let grand = groups.values().flatten().sum::<f64>() / n_total as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    let mut sst = 0.0;
    let mut summaries = Vec::with_capacity(k);
    for (label, values) in groups {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let within: f64 = values.iter().map(|y| (y - mean) * (y - mean)).sum();
        sst += values.iter().map(|y| (y - grand) * (y - grand)).sum::<f64>();
        ssb += n * (mean - grand) * (mean - grand);
        ssw += within;
        summaries.push(GroupSummary {
            label: label.clone(),
            n: values.len(),
            mean,
            variance: (values.len() > 1).then(|| within / (n - 1.0)),
        });
    }
    let df_between = k - 1;
    let df_within = n_total - k;
    let msb = ssb / df_between as f64;
    let msw = ssw / df_within as f64;
    let (f, p_value) = if msw > 0.0 {
        let f = msb / msw;
        (f, f_distribution_sf(f, df_between as f64, df_within as f64)?)
    } else if ssb == 0.0 {
        (0.0, 1.0)
    } else {
        return Err(StatsError::UndefinedF);
    };
    let r_squared = if sst > 0.0 { (ssb / sst).clamp(0.0, 1.0) } else { 0.0 };
    Ok(AnovaResult {
        ssb,
        ssw,
        sst,
        df_between,
        df_within,
        msb,
        msw,
        f,
        p_value,
        r_squared,
        groups: summaries,
    })
}
