//! Scenario configuration files and their validation.
//!
//! ```json
//! {
//!   "kind": "TwoState",
//!   "parameters": { "A": 0.5, "B": 1.0, "omega": 1e6 },
//!   "averaging": { "periods": 1, "nodes": 4096 },
//!   "seed": 7,
//!   "output_path": "out/two_state"
//! }
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Issue, ScenarioError};
use crate::presets::SourcePreset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ScenarioKind {
    TwoState,
    Countable,
    Continuum,
    PointerMC,
    StrongEquivalence,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::TwoState,
        ScenarioKind::Countable,
        ScenarioKind::Continuum,
        ScenarioKind::PointerMC,
        ScenarioKind::StrongEquivalence,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::TwoState => "TwoState",
            ScenarioKind::Countable => "Countable",
            ScenarioKind::Continuum => "Continuum",
            ScenarioKind::PointerMC => "PointerMC",
            ScenarioKind::StrongEquivalence => "StrongEquivalence",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn summary(&self) -> &'static str {
        match self {
            ScenarioKind::TwoState => "two-level polarization weak value: averaged sign law vs mixed rational law",
            ScenarioKind::Countable => "two basis states picked out of a many-level source preset",
            ScenarioKind::Continuum => {
                "grid profile, shot-based amplitude measurement, tailored post-selection, split-window observable"
            }
            ScenarioKind::PointerMC => "Gaussian pointer Monte Carlo with jittered measurement times",
            ScenarioKind::StrongEquivalence => "strong statistics of random oscillating states vs their dephased mixtures",
        }
    }

    pub fn parameters(&self) -> &'static [ParamSpec] {
        match self {
            ScenarioKind::TwoState => TWO_STATE,
            ScenarioKind::Countable => COUNTABLE,
            ScenarioKind::Continuum => CONTINUUM,
            ScenarioKind::PointerMC => POINTER_MC,
            ScenarioKind::StrongEquivalence => STRONG_EQUIVALENCE,
        }
    }

    /// Numeric parameters a sweep may vary, plus `duration` for the window.
    pub fn sweepable(&self) -> &'static [&'static str] {
        match self {
            ScenarioKind::TwoState => &["A", "B", "AB", "omega", "phi0", "duration"],
            ScenarioKind::Countable => &["B", "chi"],
            ScenarioKind::Continuum => &["C1", "C2", "omega", "phi", "shots"],
            ScenarioKind::PointerMC => &["A", "B", "AB", "omega", "phi0", "g", "trials", "duration"],
            ScenarioKind::StrongEquivalence => &["min_gap", "trials", "duration"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    Positive,
    Finite,
    NonZero,
    Count { min: u64 },
    Choice(&'static [&'static str]),
    Preset,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fallback {
    Required,
    Optional,
    Num(f64),
    Text(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpec {
    pub key: &'static str,
    pub rule: Rule,
    pub fallback: Fallback,
}

const fn p(key: &'static str, rule: Rule, fallback: Fallback) -> ParamSpec {
    ParamSpec { key, rule, fallback }
}

const SOURCE: &[&str] = &["oscillating", "mixed"];

const TWO_STATE: &[ParamSpec] = &[
    p("A", Rule::Positive, Fallback::Optional),
    p("B", Rule::Positive, Fallback::Num(1.0)),
    p("AB", Rule::Positive, Fallback::Optional),
    p("omega", Rule::NonZero, Fallback::Required),
    p("phi0", Rule::Finite, Fallback::Num(0.0)),
    p("source", Rule::Choice(SOURCE), Fallback::Text("oscillating")),
];

const COUNTABLE: &[ParamSpec] = &[
    p("source", Rule::Preset, Fallback::Required),
    p("a_idx", Rule::Count { min: 0 }, Fallback::Num(0.0)),
    p("b_idx", Rule::Count { min: 0 }, Fallback::Num(1.0)),
    p("B", Rule::Positive, Fallback::Num(1.0)),
    p("chi", Rule::Finite, Fallback::Num(0.0)),
];

const CONTINUUM: &[ParamSpec] = &[
    p("bins", Rule::Count { min: 16 }, Fallback::Num(512.0)),
    p("lower", Rule::Finite, Fallback::Num(-8.0)),
    p("upper", Rule::Finite, Fallback::Num(8.0)),
    p("center", Rule::Finite, Fallback::Num(0.0)),
    p("width", Rule::Positive, Fallback::Num(1.0)),
    p("omega", Rule::NonZero, Fallback::Required),
    p("phi", Rule::Finite, Fallback::Num(0.0)),
    p("delta_x", Rule::Positive, Fallback::Optional),
    p("delta_t", Rule::Positive, Fallback::Num(1.0)),
    p("a", Rule::Finite, Fallback::Num(0.0)),
    p("delta_a", Rule::Positive, Fallback::Required),
    p("C1", Rule::Positive, Fallback::Required),
    p("C2", Rule::Positive, Fallback::Required),
    p("shots", Rule::Count { min: 1 }, Fallback::Num(1.0e8)),
    p("source", Rule::Choice(SOURCE), Fallback::Text("oscillating")),
];

const POINTER_MC: &[ParamSpec] = &[
    p("A", Rule::Positive, Fallback::Optional),
    p("B", Rule::Positive, Fallback::Num(1.0)),
    p("AB", Rule::Positive, Fallback::Optional),
    p("omega", Rule::NonZero, Fallback::Required),
    p("phi0", Rule::Finite, Fallback::Num(0.0)),
    p("sigma", Rule::Positive, Fallback::Num(1.0)),
    p("g", Rule::NonZero, Fallback::Num(0.1)),
    p("points", Rule::Count { min: 128 }, Fallback::Num(256.0)),
    p("span", Rule::Positive, Fallback::Optional),
    p("trials", Rule::Count { min: 1 }, Fallback::Num(100_000.0)),
    p("estimator", Rule::Choice(&["Pooled", "TimeBinned"]), Fallback::Text("TimeBinned")),
    p("bins", Rule::Count { min: 1 }, Fallback::Num(64.0)),
];

const STRONG_EQUIVALENCE: &[ParamSpec] = &[
    p("dim", Rule::Count { min: 2 }, Fallback::Num(4.0)),
    p("states", Rule::Count { min: 1 }, Fallback::Num(10.0)),
    p("trials", Rule::Count { min: 1 }, Fallback::Num(4.0)),
    p("min_gap", Rule::Positive, Fallback::Num(1.0)),
    p("max_gap_ratio", Rule::Positive, Fallback::Num(3.0)),
];

/// Averaging window. `periods` counts periods of the scenario's slowest
/// oscillation; `duration` is absolute. When `start` is absent a scenario may
/// place the window so that nodes straddle its poles symmetrically.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub periods: Option<f64>,
    pub nodes: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            start: None,
            duration: None,
            periods: None,
            nodes: 4096,
        }
    }
}

impl WindowSpec {
    /// Window length given the period of the slowest oscillation.
    pub fn length(&self, period: f64) -> f64 {
        match (self.duration, self.periods) {
            (Some(d), _) => d,
            (None, Some(n)) => n * period,
            (None, None) => period,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub parameters: BTreeMap<String, Value>,
    pub averaging: WindowSpec,
    pub seed: u64,
    pub output_path: String,
}

pub const DEFAULT_OUTPUT: &str = "results";

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let value: Value = serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        Self::from_value(&value)
    }

    /// Validates everything and reports every problem found, not just the first.
    pub fn from_value(value: &Value) -> Result<Self, ScenarioError> {
        let mut issues = Vec::new();
        let Some(root) = value.as_object() else {
            return Err(ScenarioError::validation("$", "config must be a JSON object"));
        };
        for key in root.keys() {
            if !["kind", "parameters", "averaging", "seed", "output_path"].contains(&key.as_str()) {
                issues.push(Issue::new(key.clone(), "unknown key"));
            }
        }

        let kind = match root.get("kind") {
            Some(Value::String(s)) => match ScenarioKind::parse(s) {
                Some(k) => Some(k),
                None => {
                    let known: Vec<_> = ScenarioKind::ALL.iter().map(|k| k.as_str()).collect();
                    issues.push(Issue::new(
                        "kind",
                        format!("unknown scenario kind '{s}', expected one of {}", known.join(", ")),
                    ));
                    None
                }
            },
            Some(_) => {
                issues.push(Issue::new("kind", "must be a string"));
                None
            }
            None => {
                issues.push(Issue::new("kind", "is required"));
                None
            }
        };

        let parameters: BTreeMap<String, Value> = match root.get("parameters") {
            Some(Value::Object(m)) => m.clone().into_iter().collect(),
            Some(_) => {
                issues.push(Issue::new("parameters", "must be an object"));
                BTreeMap::new()
            }
            None => {
                issues.push(Issue::new("parameters", "is required"));
                BTreeMap::new()
            }
        };
        if let Some(kind) = kind {
            check_parameters(kind, &parameters, &mut issues);
        }

        let averaging = match root.get("averaging") {
            None => WindowSpec::default(),
            Some(Value::Object(m)) => parse_window(m, &mut issues),
            Some(_) => {
                issues.push(Issue::new("averaging", "must be an object"));
                WindowSpec::default()
            }
        };

        let seed = match root.get("seed") {
            None => 0,
            Some(v) => v.as_u64().unwrap_or_else(|| {
                issues.push(Issue::new("seed", "must be a non-negative 64-bit integer"));
                0
            }),
        };
        let output_path = match root.get("output_path") {
            None => DEFAULT_OUTPUT.to_string(),
            Some(Value::String(s)) if !s.is_empty() => s.clone(),
            Some(_) => {
                issues.push(Issue::new("output_path", "must be a non-empty string"));
                String::new()
            }
        };

        match kind {
            Some(kind) if issues.is_empty() => Ok(Self {
                kind,
                parameters,
                averaging,
                seed,
                output_path,
            }),
            _ => Err(ScenarioError::Validation(issues)),
        }
    }

    /// Re-validates after programmatic edits such as sweep substitutions.
    pub fn revalidated(&self) -> Result<Self, ScenarioError> {
        Self::from_value(&self.to_value())
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// SHA-256 of the canonical (key-sorted, compact) JSON form.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_string(&self.to_value()).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Parameter value or its documented default.
    pub fn num(&self, key: &str) -> f64 {
        if let Some(x) = self.parameters.get(key).and_then(Value::as_f64) {
            return x;
        }
        match self.kind.parameters().iter().find(|s| s.key == key).map(|s| s.fallback) {
            Some(Fallback::Num(x)) => x,
            _ => f64::NAN,
        }
    }

    pub fn opt_num(&self, key: &str) -> Option<f64> {
        self.parameters.get(key).and_then(Value::as_f64)
    }

    pub fn count(&self, key: &str) -> usize {
        self.num(key) as usize
    }

    pub fn text(&self, key: &str) -> String {
        if let Some(s) = self.parameters.get(key).and_then(Value::as_str) {
            return s.to_string();
        }
        match self.kind.parameters().iter().find(|s| s.key == key).map(|s| s.fallback) {
            Some(Fallback::Text(t)) => t.to_string(),
            _ => String::new(),
        }
    }

    pub fn preset(&self, key: &str) -> Option<SourcePreset> {
        let mut sink = Vec::new();
        self.parameters
            .get(key)
            .and_then(|v| SourcePreset::from_value(v, key, &mut sink))
    }

    /// `A`, taken directly or as `AB / B`.
    pub fn two_level_a(&self) -> f64 {
        self.opt_num("A").unwrap_or_else(|| self.num("AB") / self.num("B"))
    }

    /// Replaces a sweepable axis value, keeping `A`/`AB` and
    /// `duration`/`periods` mutually exclusive.
    pub fn with_axis(&self, axis: &str, value: f64) -> Result<Self, ScenarioError> {
        if !self.kind.sweepable().contains(&axis) {
            return Err(ScenarioError::validation(
                "axis",
                format!(
                    "'{axis}' is not sweepable for {}; sweepable: {}",
                    self.kind.as_str(),
                    self.kind.sweepable().join(", ")
                ),
            ));
        }
        let mut next = self.clone();
        let number = serde_json::Number::from_f64(value)
            .ok_or_else(|| ScenarioError::validation("values", format!("{value} is not a finite number")))?;
        match axis {
            "duration" => {
                next.averaging.duration = Some(value);
                next.averaging.periods = None;
            }
            "AB" => {
                next.parameters.remove("A");
                next.parameters.insert("AB".into(), Value::Number(number));
            }
            "A" => {
                next.parameters.remove("AB");
                next.parameters.insert("A".into(), Value::Number(number));
            }
            _ => {
                let v = if matches!(
                    self.kind.parameters().iter().find(|s| s.key == axis).map(|s| s.rule),
                    Some(Rule::Count { .. })
                ) && value.fract() == 0.0
                    && value >= 0.0
                {
                    Value::from(value as u64)
                } else {
                    Value::Number(number)
                };
                next.parameters.insert(axis.into(), v);
            }
        }
        next.revalidated()
    }
}

fn check_parameters(kind: ScenarioKind, params: &BTreeMap<String, Value>, issues: &mut Vec<Issue>) {
    let specs = kind.parameters();
    for key in params.keys() {
        if !specs.iter().any(|s| s.key == key) {
            issues.push(Issue::new(format!("parameters.{key}"), "unknown parameter"));
        }
    }
    for spec in specs {
        let path = format!("parameters.{}", spec.key);
        let Some(value) = params.get(spec.key) else {
            if spec.fallback == Fallback::Required {
                issues.push(Issue::new(path, "is required"));
            }
            continue;
        };
        let problem = match spec.rule {
            Rule::Positive => match value.as_f64() {
                Some(x) if x.is_finite() && x > 0.0 => None,
                _ => Some("must be strictly positive".to_string()),
            },
            Rule::Finite => match value.as_f64() {
                Some(x) if x.is_finite() => None,
                _ => Some("must be a finite number".to_string()),
            },
            Rule::NonZero => match value.as_f64() {
                Some(x) if x.is_finite() && x != 0.0 => None,
                _ => Some("must be a finite nonzero number".to_string()),
            },
            Rule::Count { min } => match value.as_u64() {
                Some(n) if n >= min => None,
                _ => Some(format!("must be an integer of at least {min}")),
            },
            Rule::Choice(options) => match value.as_str() {
                Some(s) if options.contains(&s) => None,
                _ => Some(format!("must be one of {}", options.join(", "))),
            },
            Rule::Preset => {
                SourcePreset::from_value(value, &path, issues);
                None
            }
        };
        if let Some(message) = problem {
            issues.push(Issue::new(path, message));
        }
    }

    match kind {
        ScenarioKind::TwoState | ScenarioKind::PointerMC => match (params.get("A"), params.get("AB")) {
            (None, None) => issues.push(Issue::new("parameters.A", "is required (or give AB)")),
            (Some(_), Some(_)) => issues.push(Issue::new("parameters.AB", "conflicts with parameters.A")),
            _ => {}
        },
        ScenarioKind::Countable => {
            let (a, b) = (params.get("a_idx").and_then(Value::as_u64), params.get("b_idx").and_then(Value::as_u64));
            if a.unwrap_or(0) == b.unwrap_or(1) {
                issues.push(Issue::new("parameters.b_idx", "must differ from a_idx"));
            }
        }
        ScenarioKind::Continuum => {
            let lower = params.get("lower").and_then(Value::as_f64).unwrap_or(-8.0);
            let upper = params.get("upper").and_then(Value::as_f64).unwrap_or(8.0);
            if upper.partial_cmp(&lower) != Some(std::cmp::Ordering::Greater) {
                issues.push(Issue::new("parameters.upper", "must exceed parameters.lower"));
            }
        }
        _ => {}
    }
}

fn parse_window(m: &Map<String, Value>, issues: &mut Vec<Issue>) -> WindowSpec {
    let mut spec = WindowSpec::default();
    for key in m.keys() {
        if !["start", "duration", "periods", "nodes"].contains(&key.as_str()) {
            issues.push(Issue::new(format!("averaging.{key}"), "unknown key"));
        }
    }
    if let Some(v) = m.get("start") {
        match v.as_f64() {
            Some(x) if x.is_finite() => spec.start = Some(x),
            _ => issues.push(Issue::new("averaging.start", "must be a finite number")),
        }
    }
    for (key, slot) in [("duration", &mut spec.duration), ("periods", &mut spec.periods)] {
        if let Some(v) = m.get(key) {
            match v.as_f64() {
                Some(x) if x.is_finite() && x > 0.0 => *slot = Some(x),
                _ => issues.push(Issue::new(format!("averaging.{key}"), "must be strictly positive")),
            }
        }
    }
    if m.contains_key("duration") && m.contains_key("periods") {
        issues.push(Issue::new("averaging.periods", "give either duration or periods, not both"));
    }
    if let Some(v) = m.get("nodes") {
        match v.as_u64() {
            Some(n) if n >= 2 => spec.nodes = n as usize,
            _ => issues.push(Issue::new("averaging.nodes", "must be an integer of at least 2")),
        }
    }
    spec
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn issues(v: Value) -> Vec<Issue> {
        match ScenarioConfig::from_value(&v) {
            Err(ScenarioError::Validation(list)) => list,
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn minimal_two_state_is_valid() {
        let cfg = ScenarioConfig::from_value(&json!({
            "kind": "TwoState",
            "parameters": {"A": 0.5, "B": 1, "omega": 1e6},
            "seed": 1,
            "output_path": "out"
        }))
        .unwrap();
        assert_eq!(cfg.kind, ScenarioKind::TwoState);
        assert_eq!(cfg.num("phi0"), 0.0);
        assert_eq!(cfg.text("source"), "oscillating");
        assert_eq!(cfg.two_level_a(), 0.5);
    }

    #[test]
    fn negative_amplitude_is_reported_at_its_path() {
        let list = issues(json!({"kind": "TwoState", "parameters": {"A": -1, "omega": 1e6}}));
        assert_eq!(list, vec![Issue::new("parameters.A", "must be strictly positive")]);
    }

    #[test]
    fn unknown_kind_is_reported() {
        let list = issues(json!({"kind": "ThreeState", "parameters": {}}));
        assert_eq!(list.len(), 1);
        assert_eq!(list[0].path, "kind");
    }

    #[test]
    fn every_problem_is_collected() {
        let list = issues(json!({
            "kind": "Continuum",
            "parameters": {"C1": 0, "omega": "fast", "bins": 3, "extra": 1},
            "averaging": {"nodes": 1, "duration": 1, "periods": 2},
            "seed": -4
        }));
        let paths: Vec<_> = list.iter().map(|i| i.path.as_str()).collect();
        for expected in [
            "parameters.extra",
            "parameters.bins",
            "parameters.omega",
            "parameters.delta_a",
            "parameters.C1",
            "parameters.C2",
            "averaging.periods",
            "averaging.nodes",
            "seed",
        ] {
            assert!(paths.contains(&expected), "{expected} missing from {paths:?}");
        }
    }

    #[test]
    fn hash_ignores_key_order() {
        let a = ScenarioConfig::from_json(r#"{"kind":"TwoState","seed":3,"parameters":{"A":0.5,"omega":2.0}}"#).unwrap();
        let b = ScenarioConfig::from_json(r#"{"parameters":{"omega":2.0,"A":0.5},"seed":3,"kind":"TwoState"}"#).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ScenarioConfig { seed: 4, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn axis_substitution() {
        let cfg = ScenarioConfig::from_json(r#"{"kind":"TwoState","parameters":{"A":0.5,"B":2.0,"omega":2.0}}"#).unwrap();
        let swept = cfg.with_axis("AB", 4.0).unwrap();
        assert_eq!(swept.two_level_a(), 2.0);
        assert!(matches!(cfg.with_axis("source", 1.0), Err(ScenarioError::Validation(_))));
        assert!(matches!(cfg.with_axis("B", -1.0), Err(ScenarioError::Validation(_))));
        let longer = cfg.with_axis("duration", 3.0).unwrap();
        assert_eq!(longer.averaging.length(1.0), 3.0);
    }

    #[test]
    fn parse_errors_are_distinct() {
        assert!(matches!(ScenarioConfig::from_json("{kind:"), Err(ScenarioError::Parse(_))));
    }
}
