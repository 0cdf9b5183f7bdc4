//! Statistical building blocks for the blocking analysis.

pub mod anova;
pub mod bins;
pub mod boxplot;
pub mod distributions;
pub mod kde;
pub mod quadrature;
pub mod special;
pub mod tukey;

use thiserror::Error;

pub use anova::{anova_oneway, AnovaResult, GroupSummary};
pub use bins::{
    assign_bins, central_tendency_bins, central_tendency_edges, central_tendency_from_moments, equal_width_bins,
    interval_labels, BinKind, BinSpec,
};
pub use boxplot::{box_stats, BoxStats};
pub use distributions::{f_distribution_sf, studentized_range_quantile, studentized_range_sf};
pub use kde::{kde_curve, kde_evaluate, sample_sd, silverman_bandwidth, silverman_rule, BandwidthRule, KdeConfig};
pub use tukey::{fwer_per_comparison, tukey_from_anova, tukey_hsd, SeConvention, TukeyPair, TukeyResult};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("zero variance")]
    ZeroVariance,
    #[error("need at least 2 non-empty groups, found {0}")]
    TooFewGroups(usize),
    #[error("group '{0}' is empty")]
    EmptyGroup(String),
    #[error("no within-group degrees of freedom (N = {n}, k = {k})")]
    NoWithinDf { n: usize, k: usize },
    #[error("F undefined: within-group variance is zero while group means differ")]
    UndefinedF,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid bin edges: {0}")]
    InvalidEdges(String),
    #[error("bin precondition failed: {0}")]
    BinPrecondition(String),
    #[error("convergence failure: {0}")]
    Convergence(String),
}
