//! Per-feature analyses over a fused table, and their canonical JSON form.

pub mod blocks;
pub mod canonical;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fusion::{FusedCellTable, FusedRow, FusionError};
use crate::stats::{
    anova_oneway, box_stats, central_tendency_bins, equal_width_bins, tukey_from_anova, AnovaResult, BinKind,
    BinSpec, BoxStats, SeConvention, StatsError, TukeyResult,
};
pub use blocks::{emit_block_geojson, BlockMap, FeatureBlocks, UNASSIGNED};
pub use canonical::{canonical_json, emit_report_json, P_VALUE_FLOOR, P_VALUE_FLOOR_LABEL};

pub const TOOL_NAME: &str = "terrablock";
/// Bin count used when central-tendency edges cannot be formed.
pub const FALLBACK_BIN_COUNT: usize = 4;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("feature '{feature}' needs column '{column}', which the fused table lacks")]
    FeatureAbsent { feature: String, column: String },
    #[error("season '{0}' not present in the fused table")]
    SeasonAbsent(String),
    #[error(transparent)]
    Fusion(#[from] FusionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingFeature {
    Elevation,
    Slope,
    Texture,
    ParentMaterial,
    DrainageClass,
    ComponentName,
}

impl GroupingFeature {
    pub const ALL: [GroupingFeature; 6] = [
        Self::Elevation,
        Self::Slope,
        Self::Texture,
        Self::ParentMaterial,
        Self::DrainageClass,
        Self::ComponentName,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Elevation => "elevation",
            Self::Slope => "slope",
            Self::Texture => "texture",
            Self::ParentMaterial => "parent_material",
            Self::DrainageClass => "drainage_class",
            Self::ComponentName => "component_name",
        }
    }

    /// Fused-table column holding the feature.
    pub fn column(self) -> &'static str {
        match self {
            Self::Elevation => "elevation",
            Self::Slope => "slope",
            Self::Texture => "texdesc",
            Self::ParentMaterial => "pmgroupname",
            Self::DrainageClass => "drainagecl",
            Self::ComponentName => "compname",
        }
    }

    pub fn is_continuous(self) -> bool {
        matches!(self, Self::Elevation | Self::Slope)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BinSpecConfig {
    CentralTendency,
    ExplicitEdges { edges: Vec<f64> },
}

fn default_features() -> Vec<GroupingFeature> {
    GroupingFeature::ALL.to_vec()
}

fn default_fwer() -> f64 {
    0.01
}

fn default_resolution() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_features")]
    pub grouping_features: Vec<GroupingFeature>,
    /// Per continuous feature; absent means central tendency.
    #[serde(default)]
    pub bin_specs: BTreeMap<GroupingFeature, BinSpecConfig>,
    #[serde(default = "default_fwer")]
    pub fwer: f64,
    /// Seasons to analyze; empty means every season in the table.
    #[serde(default)]
    pub seasons: Vec<String>,
    /// Block-mean factor applied to the DEM before terrain derivation.
    #[serde(default = "default_resolution")]
    pub resolution_factor: usize,
    #[serde(default)]
    pub tukey_se_convention: SeConvention,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            grouping_features: default_features(),
            bin_specs: BTreeMap::new(),
            fwer: default_fwer(),
            seasons: Vec::new(),
            resolution_factor: default_resolution(),
            tukey_se_convention: SeConvention::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self, ReportError> {
        let config: Self = serde_json::from_slice(bytes).map_err(|e| ReportError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        let bad = |m: String| Err(ReportError::Config(m));
        if !(self.fwer > 0.0 && self.fwer < 1.0) {
            return bad(format!("fwer must lie in (0, 1), got {}", self.fwer));
        }
        if self.resolution_factor < 1 {
            return bad("resolution_factor must be >= 1".into());
        }
        let mut seen = Vec::new();
        for f in &self.grouping_features {
            if seen.contains(f) {
                return bad(format!("feature '{}' listed twice", f.name()));
            }
            seen.push(*f);
        }
        for (feature, spec) in &self.bin_specs {
            if !feature.is_continuous() {
                return bad(format!("bin spec given for categorical feature '{}'", feature.name()));
            }
            if let BinSpecConfig::ExplicitEdges { edges } = spec {
                BinSpec::from_edges(BinKind::ExplicitEdges, edges.clone())
                    .map_err(|e| ReportError::Config(format!("{}: {e}", feature.name())))?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub label: String,
    pub n: usize,
    pub box_stats: BoxStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusions {
    pub missing_yield: usize,
    pub missing_feature: usize,
    pub outside_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAnalysis {
    pub feature: GroupingFeature,
    pub column: String,
    pub season: String,
    pub bins: BinSpec,
    /// Cells contributing to the groups.
    pub n_cells: usize,
    pub excluded: Exclusions,
    pub groups: Vec<GroupReport>,
    pub anova: Option<AnovaResult>,
    pub tukey: Option<TukeyResult>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub fused_table_sha256: String,
    pub config_sha256: String,
    pub config: AnalysisConfig,
    pub n_rows: usize,
    pub seasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub provenance: Provenance,
    pub analyses: Vec<FeatureAnalysis>,
}

/// Raw feature value of a row, numeric or categorical.
enum FeatureValue<'a> {
    Number(f64),
    Text(&'a str),
}

fn feature_value<'a>(row: &'a FusedRow, feature: GroupingFeature, soil_col: Option<usize>) -> Option<FeatureValue<'a>> {
    match feature {
        GroupingFeature::Elevation => row.elevation.map(FeatureValue::Number),
        GroupingFeature::Slope => row.slope.map(FeatureValue::Number),
        _ => soil_col
            .and_then(|c| row.soil[c].as_deref())
            .map(FeatureValue::Text),
    }
}

fn numeric_values(rows: &[&FusedRow], feature: GroupingFeature) -> Vec<f64> {
    rows.iter()
        .filter_map(|r| match feature_value(r, feature, None) {
            Some(FeatureValue::Number(v)) => Some(v),
            _ => None,
        })
        .collect()
}

/// Builds the bin spec for `feature` over the rows that carry a value.
/// Returns the spec plus any warning about a fallback.
fn make_bins(
    rows: &[&FusedRow],
    feature: GroupingFeature,
    soil_col: Option<usize>,
    config: &AnalysisConfig,
) -> Result<(BinSpec, Option<String>), StatsError> {
    if !feature.is_continuous() {
        let labels = rows.iter().filter_map(|r| match feature_value(r, feature, soil_col) {
            Some(FeatureValue::Text(s)) => Some(s.to_string()),
            _ => None,
        });
        return Ok((BinSpec::categorical(labels), None));
    }
    match config.bin_specs.get(&feature) {
        Some(BinSpecConfig::ExplicitEdges { edges }) => {
            Ok((BinSpec::from_edges(BinKind::ExplicitEdges, edges.clone())?, None))
        }
        Some(BinSpecConfig::CentralTendency) | None => {
            let values = numeric_values(rows, feature);
            match central_tendency_bins(&values) {
                Ok(spec) => Ok((spec, None)),
                Err(e) => {
                    let spec = equal_width_bins(&values, FALLBACK_BIN_COUNT)?;
                    Ok((
                        spec,
                        Some(format!("{e}; fell back to {FALLBACK_BIN_COUNT} equal-width bins")),
                    ))
                }
            }
        }
    }
}

fn assign(spec: &BinSpec, value: FeatureValue<'_>) -> Option<usize> {
    match value {
        FeatureValue::Number(v) => spec.assign(v),
        FeatureValue::Text(s) => spec.assign_category(s),
    }
}

fn analyze_one(
    table: &FusedCellTable,
    feature: GroupingFeature,
    season_idx: usize,
    config: &AnalysisConfig,
) -> FeatureAnalysis {
    let soil_col = table.soil_column(feature.column());
    let season = table.seasons[season_idx].clone();
    let mut warnings = Vec::new();
    let mut excluded = Exclusions {
        missing_yield: 0,
        missing_feature: 0,
        outside_bins: 0,
    };
    let mut rows = Vec::new();
    for row in &table.rows {
        if row.yields[season_idx].is_none() {
            excluded.missing_yield += 1;
        } else if feature_value(row, feature, soil_col).is_none() {
            excluded.missing_feature += 1;
        } else {
            rows.push(row);
        }
    }
    let empty = |bins: BinSpec, excluded, warnings| FeatureAnalysis {
        feature,
        column: feature.column().to_string(),
        season: season.clone(),
        bins,
        n_cells: 0,
        excluded,
        groups: Vec::new(),
        anova: None,
        tukey: None,
        warnings,
    };
    let bins = match make_bins(&rows, feature, soil_col, config) {
        Ok((bins, note)) => {
            warnings.extend(note);
            bins
        }
        Err(e) => {
            warnings.push(format!("binning failed: {e}"));
            let bins = BinSpec {
                kind: if feature.is_continuous() { BinKind::CentralTendency } else { BinKind::Categorical },
                edges: Vec::new(),
                labels: Vec::new(),
            };
            return empty(bins, excluded, warnings);
        }
    };

    let mut members: Vec<Vec<f64>> = vec![Vec::new(); bins.len()];
    for row in &rows {
        let value = feature_value(row, feature, soil_col).expect("filtered above");
        match assign(&bins, value) {
            Some(b) => members[b].push(row.yields[season_idx].expect("filtered above")),
            None => excluded.outside_bins += 1,
        }
    }
    if excluded.missing_yield > 0 {
        warnings.push(format!("{} cells excluded: missing yield", excluded.missing_yield));
    }
    if excluded.missing_feature > 0 {
        warnings.push(format!(
            "{} cells excluded: missing {}",
            excluded.missing_feature,
            feature.column()
        ));
    }
    if excluded.outside_bins > 0 {
        warnings.push(format!("{} cells excluded: outside every bin", excluded.outside_bins));
    }

    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (label, values) in bins.labels.iter().zip(members) {
        if values.is_empty() {
            warnings.push(format!("bin {label} is empty; dropped"));
        } else {
            groups.insert(label.clone(), values);
        }
    }
    let group_reports = groups
        .iter()
        .map(|(label, values)| GroupReport {
            label: label.clone(),
            n: values.len(),
            box_stats: box_stats(values).expect("groups are non-empty"),
        })
        .collect();
    let n_cells = groups.values().map(Vec::len).sum();

    let (anova, tukey) = if groups.len() < 2 {
        warnings.push(format!("fewer than 2 groups ({}); no tests run", groups.len()));
        (None, None)
    } else {
        match anova_oneway(&groups) {
            Ok(a) => {
                let t = match tukey_from_anova(&a, config.fwer, config.tukey_se_convention) {
                    Ok(t) => Some(t),
                    Err(e) => {
                        warnings.push(format!("tukey: {e}"));
                        None
                    }
                };
                (Some(a), t)
            }
            Err(e) => {
                warnings.push(format!("anova: {e}"));
                (None, None)
            }
        }
    };

    FeatureAnalysis {
        feature,
        column: feature.column().to_string(),
        season,
        bins,
        n_cells,
        excluded,
        groups: group_reports,
        anova,
        tukey,
        warnings,
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Runs every (feature, season) analysis and derives the block map.
pub fn run_analysis(table: &FusedCellTable, config: &AnalysisConfig) -> Result<(AnalysisReport, BlockMap), ReportError> {
    config.validate()?;
    for feature in &config.grouping_features {
        if !feature.is_continuous() && table.soil_column(feature.column()).is_none() {
            return Err(ReportError::FeatureAbsent {
                feature: feature.name().into(),
                column: feature.column().into(),
            });
        }
    }
    let seasons: Vec<usize> = if config.seasons.is_empty() {
        (0..table.seasons.len()).collect()
    } else {
        config
            .seasons
            .iter()
            .map(|s| table.season_column(s).ok_or_else(|| ReportError::SeasonAbsent(s.clone())))
            .collect::<Result<_, _>>()?
    };

    let mut jobs: Vec<(GroupingFeature, usize)> = config
        .grouping_features
        .iter()
        .flat_map(|&f| seasons.iter().map(move |&s| (f, s)))
        .collect();
    jobs.sort_by(|a, b| (a.0.name(), &table.seasons[a.1]).cmp(&(b.0.name(), &table.seasons[b.1])));
    jobs.dedup();
    let analyses: Vec<FeatureAnalysis> = jobs
        .par_iter()
        .map(|&(feature, s)| analyze_one(table, feature, s, config))
        .collect();

    let config_json = canonical_json(&config.to_json(), false);
    let provenance = Provenance {
        tool: TOOL_NAME.into(),
        version: crate::VERSION.into(),
        fused_table_sha256: table.digest(),
        config_sha256: sha256_hex(&config_json),
        config: config.clone(),
        n_rows: table.len(),
        seasons: seasons.iter().map(|&s| table.seasons[s].clone()).collect(),
    };
    let blocks = build_block_map(table, config)?;
    Ok((AnalysisReport { provenance, analyses }, blocks))
}

/// One season-independent labelling per feature over every table row.
fn build_block_map(table: &FusedCellTable, config: &AnalysisConfig) -> Result<BlockMap, ReportError> {
    let mut features: Vec<GroupingFeature> = config.grouping_features.clone();
    features.sort_by_key(|f| f.name());
    let all: Vec<&FusedRow> = table.rows.iter().collect();
    let per_feature = features
        .iter()
        .map(|&feature| {
            let soil_col = table.soil_column(feature.column());
            let with_value: Vec<&FusedRow> = all
                .iter()
                .copied()
                .filter(|r| feature_value(r, feature, soil_col).is_some())
                .collect();
            let bins = make_bins(&with_value, feature, soil_col, config).ok().map(|(b, _)| b);
            let labels = table
                .rows
                .iter()
                .map(|row| {
                    let idx = bins
                        .as_ref()
                        .and_then(|b| feature_value(row, feature, soil_col).and_then(|v| assign(b, v)));
                    match (idx, &bins) {
                        (Some(i), Some(b)) => b.labels[i].clone(),
                        _ => UNASSIGNED.to_string(),
                    }
                })
                .collect();
            FeatureBlocks {
                feature,
                bins,
                labels,
            }
        })
        .collect();
    let geometry = if table.is_empty() { None } else { Some(table.geometry()?) };
    Ok(BlockMap {
        geometry,
        cells: table.rows.iter().map(|r| r.cell).collect(),
        features: per_feature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::CellIndex;

    fn row(col: usize, elevation: f64, texture: &str, y: Option<f64>) -> FusedRow {
        FusedRow {
            cell: CellIndex::new(0, col),
            x: col as f64 + 0.5,
            y: 0.5,
            elevation: Some(elevation),
            slope: Some(0.01 * col as f64),
            aspect: None,
            soil: vec![Some(texture.to_string())],
            yields: vec![y],
        }
    }

    fn table(rows: Vec<FusedRow>) -> FusedCellTable {
        FusedCellTable {
            cell_size: 1.0,
            soil_columns: vec!["texdesc".into()],
            seasons: vec!["2017".into()],
            rows,
        }
    }

    fn config(features: Vec<GroupingFeature>) -> AnalysisConfig {
        AnalysisConfig {
            grouping_features: features,
            ..AnalysisConfig::default()
        }
    }

    #[test]
    fn config_parsing_and_validation() {
        let c = AnalysisConfig::from_json(br#"{"grouping_features":["texture","elevation"]}"#).unwrap();
        assert_eq!(c.fwer, 0.01);
        assert_eq!(c.resolution_factor, 1);
        assert_eq!(c.tukey_se_convention, SeConvention::Paper);
        assert!(AnalysisConfig::from_json(br#"{"fwer":1.5}"#).is_err());
        assert!(AnalysisConfig::from_json(br#"{"fwer":0}"#).is_err());
        assert!(AnalysisConfig::from_json(br#"{"resolution_factor":0}"#).is_err());
        assert!(AnalysisConfig::from_json(br#"{"bogus":1}"#).is_err());
        assert!(AnalysisConfig::from_json(br#"{"grouping_features":["aspect"]}"#).is_err());
        assert!(AnalysisConfig::from_json(br#"{"bin_specs":{"texture":{"kind":"central_tendency"}}}"#).is_err());
        assert!(
            AnalysisConfig::from_json(br#"{"bin_specs":{"slope":{"kind":"explicit_edges","edges":[1,0]}}}"#).is_err()
        );
        let c = AnalysisConfig::from_json(
            br#"{"bin_specs":{"slope":{"kind":"explicit_edges","edges":[0,0.5,1]}},"tukey_se_convention":"kramer"}"#,
        )
        .unwrap();
        assert_eq!(c.tukey_se_convention, SeConvention::Kramer);
        let back = AnalysisConfig::from_json(&serde_json::to_vec(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn two_textures_separate() {
        let rows: Vec<FusedRow> = (0..40)
            .map(|i| {
                let (tex, base) = if i < 20 { ("Clay loam", 40.0) } else { ("Silt loam", 60.0) };
                row(i, 200.0 + i as f64, tex, Some(base + (i % 5) as f64 * 0.5))
            })
            .collect();
        let (report, blocks) = run_analysis(&table(rows), &config(vec![GroupingFeature::Texture])).unwrap();
        assert_eq!(report.analyses.len(), 1);
        let a = &report.analyses[0];
        assert_eq!(a.n_cells, 40);
        let t = a.tukey.as_ref().unwrap();
        assert_eq!(t.pairs.len(), 1);
        assert!(t.pairs[0].reject);
        assert!((t.pairs[0].mean_diff - 20.0).abs() < 1e-9);
        assert_eq!(blocks.features[0].labels.len(), 40);
    }

    #[test]
    fn identical_yields_no_rejection() {
        let rows: Vec<FusedRow> = (0..30)
            .map(|i| row(i, 200.0 + (i as f64 * 0.37).sin(), if i % 2 == 0 { "A" } else { "B" }, Some(50.0)))
            .collect();
        let (report, _) = run_analysis(
            &table(rows),
            &config(vec![GroupingFeature::Elevation, GroupingFeature::Texture]),
        )
        .unwrap();
        for a in &report.analyses {
            let anova = a.anova.as_ref().unwrap();
            assert_eq!(anova.f, 0.0);
            assert!(a.tukey.as_ref().unwrap().pairs.iter().all(|p| !p.reject));
        }
        let elev = &report.analyses[0];
        assert_eq!(elev.feature, GroupingFeature::Elevation);
        assert_eq!(elev.anova.as_ref().unwrap().df_between, 3);
        assert_eq!(elev.tukey.as_ref().unwrap().pairs.len(), 6);
    }

    #[test]
    fn missing_data_and_dropped_bins_are_reported() {
        let mut rows: Vec<FusedRow> = (0..10).map(|i| row(i, i as f64, "A", Some(i as f64))).collect();
        rows[3].yields[0] = None;
        rows[4].soil[0] = None;
        let mut c = config(vec![GroupingFeature::Texture, GroupingFeature::Elevation]);
        c.bin_specs.insert(
            GroupingFeature::Elevation,
            BinSpecConfig::ExplicitEdges {
                edges: vec![0.0, 2.0, 4.0, 100.0, 200.0],
            },
        );
        let (report, blocks) = run_analysis(&table(rows), &c).unwrap();
        let elev = &report.analyses[0];
        assert_eq!(elev.excluded.missing_yield, 1);
        assert!(elev.warnings.iter().any(|w| w.contains("(100, 200] is empty")));
        assert_eq!(elev.groups.len(), 3);
        let tex = &report.analyses[1];
        assert_eq!(tex.excluded.missing_feature, 1);
        assert!(tex.anova.is_none());
        assert!(tex.warnings.iter().any(|w| w.contains("fewer than 2 groups")));
        // the texture-less cell is unassigned in the block map
        let tex_blocks = blocks.features.iter().find(|f| f.feature == GroupingFeature::Texture).unwrap();
        assert_eq!(tex_blocks.labels[4], UNASSIGNED);
    }

    #[test]
    fn absent_feature_or_season_is_an_error() {
        let t = table(vec![row(0, 1.0, "A", Some(1.0))]);
        assert!(matches!(
            run_analysis(&t, &config(vec![GroupingFeature::DrainageClass])),
            Err(ReportError::FeatureAbsent { .. })
        ));
        let mut c = config(vec![GroupingFeature::Elevation]);
        c.seasons = vec!["1999".into()];
        assert!(matches!(run_analysis(&t, &c), Err(ReportError::SeasonAbsent(_))));
    }

    #[test]
    fn empty_feature_list() {
        let t = table(vec![row(0, 1.0, "A", Some(1.0))]);
        let (report, blocks) = run_analysis(&t, &config(vec![])).unwrap();
        assert!(report.analyses.is_empty());
        assert!(blocks.features.is_empty());
    }
}
