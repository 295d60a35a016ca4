use std::fs;
use std::path::{Path, PathBuf};

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;
use serde_json::Value;
use weakosc_core::C64;

use crate::config::ScenarioConfig;
use crate::error::ScenarioError;
use crate::presets::ILLUSTRATIVE;

pub const CSV_NAME: &str = "results.csv";
pub const RECORD_NAME: &str = "record.json";

/// Ordered name/value pairs; serialized as a JSON object in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Fields(pub Vec<(String, Value)>);

impl Fields {
    pub fn push(&mut self, name: &str, value: impl Into<Value>) {
        self.0.push((name.to_string(), value.into()));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

impl Serialize for Fields {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub inputs: Fields,
    pub re_averaged: f64,
    pub im_averaged: f64,
    pub re_mixed: f64,
    pub im_mixed: f64,
    pub verdict: String,
    /// Diagnostics kept out of the CSV (standard errors, residuals, gaps).
    pub extras: Fields,
}

impl Row {
    pub fn new(inputs: Fields, averaged: C64, mixed: C64, verdict: impl Into<String>) -> Self {
        Self {
            inputs,
            re_averaged: averaged.re,
            im_averaged: averaged.im,
            re_mixed: mixed.re,
            im_mixed: mixed.im,
            verdict: verdict.into(),
            extras: Fields::default(),
        }
    }

    pub fn averaged(&self) -> C64 {
        C64::new(self.re_averaged, self.im_averaged)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub kind: String,
    pub presets: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_axis: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict_detail: Option<Value>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorInfo {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: u8,
}

impl From<&ScenarioError> for ErrorInfo {
    fn from(e: &ScenarioError) -> Self {
        Self {
            kind: e.kind(),
            message: e.to_string(),
            exit_code: e.exit_code(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub config_hash: String,
    pub timestamp: String,
    pub software_version: &'static str,
    pub config: Value,
    pub rows: Vec<Row>,
    pub verdict: Option<String>,
    pub metadata: Metadata,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
}

impl ResultRecord {
    pub fn new(config: &ScenarioConfig, rows: Vec<Row>, verdict: Option<String>) -> Self {
        Self {
            config_hash: config.hash(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            software_version: env!("CARGO_PKG_VERSION"),
            config: config.to_value(),
            rows,
            verdict,
            metadata: Metadata {
                kind: config.kind.as_str().to_string(),
                presets: ILLUSTRATIVE,
                sweep_axis: None,
                verdict_detail: None,
            },
            error: None,
        }
    }

    pub fn failed(config: &ScenarioConfig, error: &ScenarioError) -> Self {
        let mut record = Self::new(config, Vec::new(), None);
        record.error = Some(error.into());
        record
    }

    /// CSV text: `kind, inputs..., re_averaged, im_averaged, re_mixed, im_mixed, verdict`.
    /// Input columns come from the first row; every row of a record has the same inputs.
    pub fn to_csv(&self) -> Result<String, ScenarioError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let inputs: Vec<&str> = self.rows.first().map(|r| r.inputs.names().collect()).unwrap_or_default();
        let mut header = vec!["kind"];
        header.extend(&inputs);
        header.extend(["re_averaged", "im_averaged", "re_mixed", "im_mixed", "verdict"]);
        w.write_record(&header).map_err(csv_error)?;
        for row in &self.rows {
            let mut line = vec![self.metadata.kind.clone()];
            line.extend(row.inputs.0.iter().map(|(_, v)| cell(v)));
            line.extend(
                [row.re_averaged, row.im_averaged, row.re_mixed, row.im_mixed]
                    .iter()
                    .map(|&x| float_cell(x)),
            );
            line.push(row.verdict.clone());
            w.write_record(&line).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| ScenarioError::Parse(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `results.csv` and `record.json` into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf), ScenarioError> {
        fs::create_dir_all(dir).map_err(|e| ScenarioError::io(dir, e))?;
        let csv_path = dir.join(CSV_NAME);
        let json_path = dir.join(RECORD_NAME);
        fs::write(&csv_path, self.to_csv()?).map_err(|e| ScenarioError::io(&csv_path, e))?;
        let json = serde_json::to_string_pretty(self).expect("record serializes");
        fs::write(&json_path, json + "\n").map_err(|e| ScenarioError::io(&json_path, e))?;
        Ok((csv_path, json_path))
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => float_cell(x),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

/// Shortest round-trip representation; switches to exponent form for very
/// small or large magnitudes.
fn float_cell(x: f64) -> String {
    match serde_json::Number::from_f64(x) {
        Some(n) => n.to_string(),
        None => format!("{x}"),
    }
}

fn csv_error(e: csv::Error) -> ScenarioError {
    ScenarioError::io(CSV_NAME, std::io::Error::other(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> ResultRecord {
        let cfg = ScenarioConfig::from_json(r#"{"kind":"TwoState","parameters":{"A":0.5,"omega":1.0}}"#).unwrap();
        let mut inputs = Fields::default();
        inputs.push("A", 0.5);
        inputs.push("source", "oscillating");
        inputs.push("nodes", 16u64);
        let row = Row::new(inputs, C64::new(1.0, -0.0), C64::new(0.6, 0.0), "OscillatingPure");
        ResultRecord::new(&cfg, vec![row], None)
    }

    #[test]
    fn csv_has_fixed_column_order() {
        let text = record().to_csv().unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("kind,A,source,nodes,re_averaged,im_averaged,re_mixed,im_mixed,verdict")
        );
        assert_eq!(lines.next(), Some("TwoState,0.5,oscillating,16,1.0,-0.0,0.6,0.0,OscillatingPure"));
    }

    #[test]
    fn json_record_keeps_input_order_and_label() {
        let v = serde_json::to_value(record()).unwrap();
        assert_eq!(v["metadata"]["presets"], "illustrative");
        let text = serde_json::to_string(&record().rows[0].inputs).unwrap();
        assert_eq!(text, r#"{"A":0.5,"source":"oscillating","nodes":16}"#);
        assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    }
}
