//! Tukey's honestly significant difference test.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::anova::{anova_oneway, AnovaResult};
use super::distributions::{studentized_range_quantile, studentized_range_sf};
use super::StatsError;

/// Standard error used for each pair.
///
/// `Paper` is `sqrt(MSE/n_i + MSE/n_j)`; `Kramer` is the textbook
/// `sqrt(MSE/2 · (1/n_i + 1/n_j))`, smaller by a factor √2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeConvention {
    #[default]
    Paper,
    Kramer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyPair {
    pub group1: String,
    pub group2: String,
    pub mean_diff: f64,
    pub se: f64,
    pub q_stat: f64,
    pub p_adj: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyResult {
    pub pairs: Vec<TukeyPair>,
    pub fwer: f64,
    pub q_critical: f64,
    pub k: usize,
    pub df_within: usize,
    pub se_convention: SeConvention,
}

/// `1 − (1 − alpha_pc)^m`.
pub fn fwer_per_comparison(alpha_pc: f64, m: u32) -> f64 {
    -(f64::from(m) * (-alpha_pc).ln_1p()).exp_m1()
}

fn validate_fwer(fwer: f64) -> Result<(), StatsError> {
    if fwer > 0.0 && fwer < 1.0 {
        Ok(())
    } else {
        Err(StatsError::InvalidParameter(format!("fwer must lie in (0, 1), got {fwer}")))
    }
}

pub fn tukey_hsd(
    groups: &BTreeMap<String, Vec<f64>>,
    fwer: f64,
    convention: SeConvention,
) -> Result<TukeyResult, StatsError> {
    validate_fwer(fwer)?;
    let anova = anova_oneway(groups)?;
    tukey_from_anova(&anova, fwer, convention)
}

/// Pairwise comparisons from the group summaries and MSE of an ANOVA.
pub fn tukey_from_anova(anova: &AnovaResult, fwer: f64, convention: SeConvention) -> Result<TukeyResult, StatsError> {
    validate_fwer(fwer)?;
    let k = anova.groups.len();
    let df = anova.df_within as f64;
    let mse = anova.msw;
    if mse == 0.0 && anova.ssb > 0.0 {
        return Err(StatsError::UndefinedF);
    }
    let q_critical = studentized_range_quantile(fwer, k, df)?;
    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    for (i, gi) in anova.groups.iter().enumerate() {
        for gj in &anova.groups[i + 1..] {
            let mean_diff = gj.mean - gi.mean;
            let (ni, nj) = (gi.n as f64, gj.n as f64);
            let se = match convention {
                SeConvention::Paper => (mse / ni + mse / nj).sqrt(),
                SeConvention::Kramer => (mse / 2.0 * (1.0 / ni + 1.0 / nj)).sqrt(),
            };
            let (q_stat, p_adj) = if se > 0.0 {
                let q = mean_diff / se;
                (q, studentized_range_sf(q.abs(), k, df)?)
            } else {
                // every observation is equal, so every difference is zero
                (0.0, 1.0)
            };
            let half = q_critical * se;
            pairs.push(TukeyPair {
                group1: gi.label.clone(),
                group2: gj.label.clone(),
                mean_diff,
                se,
                q_stat,
                p_adj,
                ci_low: mean_diff - half,
                ci_high: mean_diff + half,
                reject: p_adj < fwer,
            });
        }
    }
    Ok(TukeyResult {
        pairs,
        fwer,
        q_critical,
        k,
        df_within: anova.df_within,
        se_convention: convention,
    })
}
