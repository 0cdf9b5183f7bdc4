//! End-to-end runs on a generated field.

use std::collections::BTreeSet;

use serde_json::Value;
use terrablock_core::fusion::FusedCellTable;
use terrablock_core::pipeline::{fuse, FuseInputs, YieldSource};
use terrablock_core::report::{emit_block_geojson, emit_report_json, run_analysis, AnalysisConfig, GroupingFeature};
use terrablock_core::soil::AttributeSchema;
use terrablock_core::synthetic::{synthetic_field, SyntheticField, SyntheticSpec};

fn fused(field: &SyntheticField) -> FusedCellTable {
    fuse(&FuseInputs {
        dem: &field.dem_asc,
        soil: &field.soil_geojson,
        boundary: &field.boundary_geojson,
        yields: vec![YieldSource {
            name: "2017.csv",
            bytes: &field.yield_csv,
        }],
        schema: AttributeSchema::default(),
        resolution_factor: 1,
    })
    .unwrap()
    .table
}

#[test]
fn soil_texture_pair_is_rejected() {
    let field = synthetic_field(&SyntheticSpec::default());
    let table = fused(&field);
    assert_eq!(table.len(), 10_000);
    assert_eq!(table.seasons, vec!["2017".to_string()]);
    let config = AnalysisConfig::default();
    let (report, blocks) = run_analysis(&table, &config).unwrap();
    let texture = report
        .analyses
        .iter()
        .find(|a| a.feature == GroupingFeature::Texture)
        .unwrap();
    let tukey = texture.tukey.as_ref().unwrap();
    assert_eq!(tukey.pairs.len(), 1);
    let pair = &tukey.pairs[0];
    assert!(pair.reject);
    assert!((pair.mean_diff.abs() - 20.0).abs() < 1.0, "{}", pair.mean_diff);

    let gj: Value = serde_json::from_slice(&emit_block_geojson(&blocks)).unwrap();
    for feature in GroupingFeature::ALL {
        let total: u64 = gj["features"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|f| f["properties"]["feature"] == feature.name())
            .map(|f| f["properties"]["cell_count"].as_u64().unwrap())
            .sum();
        assert_eq!(total, table.len() as u64, "{}", feature.name());
    }
}

#[test]
fn outputs_are_deterministic_and_survive_csv() {
    let field = synthetic_field(&SyntheticSpec::default());
    let table = fused(&field);
    let csv = table.to_csv();
    let reread = FusedCellTable::from_csv(&csv).unwrap();
    assert_eq!(reread, table);
    assert_eq!(reread.to_csv(), csv);

    let config = AnalysisConfig::default();
    let (a, ba) = run_analysis(&table, &config).unwrap();
    let (b, bb) = run_analysis(&reread, &config).unwrap();
    assert_eq!(emit_report_json(&a), emit_report_json(&b));
    assert_eq!(emit_block_geojson(&ba), emit_block_geojson(&bb));
    assert_eq!(fused(&field).to_csv(), csv);
}

#[test]
fn report_shape() {
    let field = synthetic_field(&SyntheticSpec::default());
    let table = fused(&field);
    let (report, _) = run_analysis(&table, &AnalysisConfig::default()).unwrap();
    let bytes = emit_report_json(&report);
    assert_eq!(bytes.last(), Some(&b'\n'));
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["provenance"]["tool"], "terrablock");
    assert_eq!(v["provenance"]["n_rows"], 10_000);
    assert_eq!(v["provenance"]["fused_table_sha256"], table.digest());
    let names: BTreeSet<&str> = v["analyses"].as_array().unwrap().iter().map(|a| a["feature"].as_str().unwrap()).collect();
    assert_eq!(names.len(), 6);
}

#[test]
fn report_matches_shipped_schema() {
    let schema: Value = serde_json::from_str(include_str!("../schema/report.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let field = synthetic_field(&SyntheticSpec::default());
    let table = fused(&field);
    let config = AnalysisConfig::from_json(br#"{"grouping_features": ["slope", "texture"], "tukey_se_convention": "kramer",
        "bin_specs": {"slope": {"kind": "explicit_edges", "edges": [0.0, 0.05, 0.2]}}}"#)
    .unwrap();
    for config in [AnalysisConfig::default(), config] {
        let (report, _) = run_analysis(&table, &config).unwrap();
        let v: Value = serde_json::from_slice(&emit_report_json(&report)).unwrap();
        let errors: Vec<String> = validator.iter_errors(&v).map(|e| format!("{} at {}", e, e.instance_path)).collect();
        assert!(errors.is_empty(), "{errors:#?}");
    }
    let (report, _) = run_analysis(&table, &AnalysisConfig::default()).unwrap();
    let mut v: Value = serde_json::from_slice(&emit_report_json(&report)).unwrap();
    v["analyses"][0]["tukey"]["pairs"][0]["p_adj"] = Value::from("tiny");
    assert!(!validator.is_valid(&v));
}
