//! Gaussian kernel density estimation.

use serde::{Deserialize, Serialize};

use super::special::norm_pdf;
use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "h")]
pub enum BandwidthRule {
    Silverman,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeConfig {
    pub bandwidth_rule: BandwidthRule,
    pub evaluation_points: usize,
}

impl Default for KdeConfig {
    fn default() -> Self {
        Self {
            bandwidth_rule: BandwidthRule::Silverman,
            evaluation_points: 256,
        }
    }
}

pub fn mean(data: &[f64]) -> f64 {
    data.iter().sum::<f64>() / data.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_sd(data: &[f64]) -> f64 {
    let m = mean(data);
    let ss: f64 = data.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (data.len() as f64 - 1.0)).sqrt()
}

/// `(4σ⁵ / 3n)^(1/5)`.
pub fn silverman_rule(sigma: f64, n: usize) -> f64 {
    (4.0 * sigma.powi(5) / (3.0 * n as f64)).powf(0.2)
}

pub fn silverman_bandwidth(data: &[f64]) -> Result<f64, StatsError> {
    if data.len() < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, found: data.len() });
    }
    let sd = sample_sd(data);
    if !(sd > 0.0) {
        return Err(StatsError::ZeroVariance);
    }
    Ok(silverman_rule(sd, data.len()))
}

pub fn resolve_bandwidth(data: &[f64], rule: BandwidthRule) -> Result<f64, StatsError> {
    match rule {
        BandwidthRule::Silverman => silverman_bandwidth(data),
        BandwidthRule::Fixed(h) if h > 0.0 && h.is_finite() => Ok(h),
        BandwidthRule::Fixed(h) => Err(StatsError::InvalidParameter(format!("bandwidth must be > 0, got {h}"))),
    }
}

/// Density `f(x) = (1/n) Σ K_h(x − x_i)` at each evaluation point.
pub fn kde_evaluate(data: &[f64], config: &KdeConfig, x: &[f64]) -> Result<Vec<f64>, StatsError> {
    if data.is_empty() {
        return Err(StatsError::TooFewSamples { needed: 1, found: 0 });
    }
    let h = resolve_bandwidth(data, config.bandwidth_rule)?;
    let n = data.len() as f64;
    Ok(x.iter()
        .map(|&t| data.iter().map(|&xi| norm_pdf((t - xi) / h)).sum::<f64>() / (n * h))
        .collect())
}

/// Evenly spaced evaluation over the data range padded by `pad` bandwidths.
pub fn kde_curve(data: &[f64], config: &KdeConfig, pad: f64) -> Result<(Vec<f64>, Vec<f64>), StatsError> {
    if config.evaluation_points < 2 {
        return Err(StatsError::InvalidParameter("need at least 2 evaluation points".into()));
    }
    if data.is_empty() {
        return Err(StatsError::TooFewSamples { needed: 1, found: 0 });
    }
    let h = resolve_bandwidth(data, config.bandwidth_rule)?;
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min) - pad * h;
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max) + pad * h;
    let m = config.evaluation_points;
    let xs: Vec<f64> = (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
    let fixed = KdeConfig {
        bandwidth_rule: BandwidthRule::Fixed(h),
        ..*config
    };
    let ys = kde_evaluate(data, &fixed, &xs)?;
    Ok((xs, ys))
}
