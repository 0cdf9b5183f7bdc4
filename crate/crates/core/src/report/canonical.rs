//! Canonical JSON: sorted keys, floats rounded to 6 significant digits,
//! two-space indentation and a trailing newline.
//!
//! Bin `edges` keep full precision so that edges read back from a report
//! reproduce the same bin assignment when resubmitted.

use serde_json::{Number, Value};

use super::AnalysisReport;

/// Tail probabilities below this are reported as [`P_VALUE_FLOOR_LABEL`].
pub const P_VALUE_FLOOR: f64 = 1e-12;
pub const P_VALUE_FLOOR_LABEL: &str = "< 1e-12";

const SIGNIFICANT_DIGITS: usize = 6;
const P_VALUE_KEYS: [&str; 2] = ["p_value", "p_adj"];
const FULL_PRECISION_KEYS: [&str; 1] = ["edges"];

fn round_significant(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let s = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v);
    s.parse().unwrap_or(v)
}

fn transform(value: &mut Value, round: bool) {
    match value {
        Value::Number(n) if round && n.is_f64() => {
            let v = n.as_f64().unwrap_or(0.0);
            *value = Number::from_f64(round_significant(v)).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(|v| transform(v, round)),
        Value::Object(map) => {
            for (key, v) in map.iter_mut() {
                if P_VALUE_KEYS.contains(&key.as_str()) {
                    if let Some(p) = v.as_f64() {
                        if p < P_VALUE_FLOOR {
                            *v = Value::String(P_VALUE_FLOOR_LABEL.into());
                            continue;
                        }
                    }
                }
                transform(v, round && !FULL_PRECISION_KEYS.contains(&key.as_str()));
            }
        }
        _ => {}
    }
}

/// Serializes `value` canonically. Object keys are already sorted because
/// `serde_json::Map` is ordered.
pub fn canonical_json(value: &Value, round: bool) -> Vec<u8> {
    let mut v = value.clone();
    transform(&mut v, round);
    let mut out = serde_json::to_vec_pretty(&v).expect("json values serialize");
    out.push(b'\n');
    out
}

pub fn emit_report_json(report: &AnalysisReport) -> Vec<u8> {
    let value = serde_json::to_value(report).expect("report serializes");
    canonical_json(&value, true)
}
