//! Interface to the USDA Soil Data Access (SDA) tabular service.
//!
//! Only request construction and response parsing live here. No network
//! client is provided; callers plug one in through [`SoilDataSource`] or
//! ingest exported GeoJSON directly.

use std::collections::BTreeMap;

use serde_json::{json, Value};
use thiserror::Error;

use crate::soil::AttrValue;

pub const SDA_ENDPOINT: &str = "https://sdmdataaccess.sc.egov.usda.gov/Tabular/post.rest";
pub const SDA_FORMAT: &str = "JSON+COLUMNNAME";

#[derive(Debug, Error)]
pub enum SdaError {
    #[error("invalid SDA response: {0}")]
    Response(String),
    #[error("invalid request: {0}")]
    Request(String),
    #[error("transport: {0}")]
    Transport(String),
}

/// Component and horizon attributes joined per map unit key.
#[derive(Debug, Clone, PartialEq)]
pub struct SdaRequest {
    pub mukeys: Vec<String>,
    pub columns: Vec<String>,
}

impl SdaRequest {
    pub fn for_mukeys<I, S>(mukeys: I) -> Result<Self, SdaError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mukeys: Vec<String> = mukeys.into_iter().map(Into::into).collect();
        if mukeys.is_empty() {
            return Err(SdaError::Request("no map unit keys".into()));
        }
        if let Some(bad) = mukeys.iter().find(|k| k.is_empty() || !k.chars().all(|c| c.is_ascii_digit())) {
            return Err(SdaError::Request(format!("map unit key '{bad}' is not numeric")));
        }
        Ok(Self {
            mukeys,
            columns: ["mukey", "compname", "drainagecl", "taxorder", "taxsuborder", "nccpi3corn", "nccpi3soy"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        })
    }

    pub fn sql(&self) -> String {
        let cols = self
            .columns
            .iter()
            .map(|c| if c == "mukey" { "mu.mukey".to_string() } else { format!("c.{c}") })
            .collect::<Vec<_>>()
            .join(", ");
        format!(
            "SELECT {cols} FROM mapunit AS mu INNER JOIN component AS c ON c.mukey = mu.mukey \
             WHERE c.majcompflag = 'Yes' AND mu.mukey IN ({})",
            self.mukeys.join(", ")
        )
    }

    /// Body for a POST to [`SDA_ENDPOINT`].
    pub fn body(&self) -> Value {
        json!({"query": self.sql(), "format": SDA_FORMAT})
    }
}

/// Parses `{"Table": [[column names], [row values]...]}`.
pub fn parse_sda_response(bytes: &[u8]) -> Result<Vec<BTreeMap<String, AttrValue>>, SdaError> {
    let v: Value = serde_json::from_slice(bytes).map_err(|e| SdaError::Response(e.to_string()))?;
    let Some(table) = v.get("Table").and_then(Value::as_array) else {
        // SDA returns an empty object when nothing matches
        return if v.as_object().is_some_and(|o| o.is_empty()) {
            Ok(Vec::new())
        } else {
            Err(SdaError::Response("missing 'Table' array".into()))
        };
    };
    let mut rows = table.iter();
    let header: Vec<String> = rows
        .next()
        .and_then(Value::as_array)
        .ok_or_else(|| SdaError::Response("missing header row".into()))?
        .iter()
        .map(|c| c.as_str().map(str::to_string).ok_or_else(|| SdaError::Response("non-string column name".into())))
        .collect::<Result<_, _>>()?;
    rows.enumerate()
        .map(|(i, row)| {
            let cells = row
                .as_array()
                .filter(|r| r.len() == header.len())
                .ok_or_else(|| SdaError::Response(format!("row {} has the wrong shape", i + 1)))?;
            Ok(header
                .iter()
                .zip(cells)
                .filter_map(|(k, cell)| {
                    let value = match cell {
                        Value::Null => return None,
                        Value::Number(n) => AttrValue::Number(n.as_f64()?),
                        // SDA sends numbers as strings
                        Value::String(s) => match s.parse::<f64>() {
                            Ok(x) if k != "mukey" && x.is_finite() => AttrValue::Number(x),
                            _ => AttrValue::Text(s.clone()),
                        },
                        other => AttrValue::Text(other.to_string()),
                    };
                    Some((k.clone(), value))
                })
                .collect())
        })
        .collect()
}

/// A source of SDA responses, e.g. an HTTP client or recorded fixtures.
pub trait SoilDataSource {
    fn post(&self, request: &SdaRequest) -> Result<Vec<u8>, SdaError>;

    fn fetch(&self, request: &SdaRequest) -> Result<Vec<BTreeMap<String, AttrValue>>, SdaError> {
        parse_sda_response(&self.post(request)?)
    }
}
