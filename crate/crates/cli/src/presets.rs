//! Amplitude laws for sources of effectively mixed states. These are
//! illustrative stand-ins, not models of the named physical processes.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{Map, Value};
use weakosc_core::C64;

use crate::error::Issue;

pub const ILLUSTRATIVE: &str = "illustrative";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    Blackbody,
    Decoherence,
    SolidState,
    Unruh,
    Hawking,
    Custom,
}

impl PresetName {
    pub const ALL: [PresetName; 6] = [
        PresetName::Blackbody,
        PresetName::Decoherence,
        PresetName::SolidState,
        PresetName::Unruh,
        PresetName::Hawking,
        PresetName::Custom,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::Blackbody => "blackbody",
            PresetName::Decoherence => "decoherence",
            PresetName::SolidState => "solid_state",
            PresetName::Unruh => "unruh",
            PresetName::Hawking => "hawking",
            PresetName::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.as_str() == s)
    }

    pub fn law(&self) -> &'static str {
        match self {
            PresetName::Blackbody => "thermal: A_j^2 ~ exp(-E_j / kT), E_j = j * spacing",
            PresetName::Unruh => "thermal at kT = acceleration / (2 pi), or an explicit temperature",
            PresetName::Hawking => "thermal at kT = 1 / (8 pi mass), or an explicit temperature",
            PresetName::Decoherence => "uniform amplitudes with seeded random phases",
            PresetName::SolidState => "two Gaussian bands at levels/4 and 3 levels/4",
            PresetName::Custom => "amplitudes given explicitly",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourcePreset {
    pub name: PresetName,
    pub levels: usize,
    pub temperature: f64,
    pub spacing: f64,
    pub band_width: f64,
    pub amplitudes: Vec<f64>,
}

fn number(obj: &Map<String, Value>, key: &str, path: &str, issues: &mut Vec<Issue>) -> Option<f64> {
    match obj.get(key) {
        None => None,
        Some(v) => match v.as_f64() {
            Some(x) if x.is_finite() && x > 0.0 => Some(x),
            _ => {
                issues.push(Issue::new(format!("{path}.{key}"), "must be a strictly positive number"));
                None
            }
        },
    }
}

impl SourcePreset {
    /// Parses the `source` object of a scenario; problems are appended to
    /// `issues` with paths below `path`.
    pub fn from_value(value: &Value, path: &str, issues: &mut Vec<Issue>) -> Option<Self> {
        let Some(obj) = value.as_object() else {
            issues.push(Issue::new(path, "must be an object with a \"name\" field"));
            return None;
        };
        let before = issues.len();
        let name = match obj.get("name").and_then(Value::as_str) {
            Some(s) => match PresetName::parse(s) {
                Some(n) => Some(n),
                None => {
                    let known: Vec<_> = PresetName::ALL.iter().map(|p| p.as_str()).collect();
                    issues.push(Issue::new(
                        format!("{path}.name"),
                        format!("unknown preset '{s}', expected one of {}", known.join(", ")),
                    ));
                    None
                }
            },
            None => {
                issues.push(Issue::new(format!("{path}.name"), "is required"));
                None
            }
        };
        let levels = match obj.get("levels") {
            None => 5,
            Some(v) => match v.as_u64() {
                Some(n) if n >= 3 => n as usize,
                _ => {
                    issues.push(Issue::new(format!("{path}.levels"), "must be an integer of at least 3"));
                    5
                }
            },
        };
        let spacing = number(obj, "spacing", path, issues).unwrap_or(1.0);
        let band_width = number(obj, "band_width", path, issues).unwrap_or(levels as f64 / 10.0);
        let explicit = number(obj, "temperature", path, issues);
        let acceleration = number(obj, "acceleration", path, issues);
        let mass = number(obj, "mass", path, issues);
        let temperature = match name {
            Some(PresetName::Unruh) => explicit.or(acceleration.map(|a| a / TAU)),
            Some(PresetName::Hawking) => explicit.or(mass.map(|m| 1.0 / (8.0 * PI * m))),
            _ => explicit,
        }
        .unwrap_or(1.0);

        let mut amplitudes = Vec::new();
        if name == Some(PresetName::Custom) {
            match obj.get("amplitudes").and_then(Value::as_array) {
                Some(list) => {
                    for (k, v) in list.iter().enumerate() {
                        match v.as_f64() {
                            Some(x) if x.is_finite() && x >= 0.0 => amplitudes.push(x),
                            _ => issues.push(Issue::new(
                                format!("{path}.amplitudes[{k}]"),
                                "must be a finite non-negative number",
                            )),
                        }
                    }
                    if list.len() < 3 {
                        issues.push(Issue::new(format!("{path}.amplitudes"), "needs at least 3 entries"));
                    } else if amplitudes.iter().all(|a| *a == 0.0) {
                        issues.push(Issue::new(format!("{path}.amplitudes"), "must not be all zero"));
                    }
                }
                None => issues.push(Issue::new(format!("{path}.amplitudes"), "is required for a custom source")),
            }
        }
        if issues.len() > before {
            return None;
        }
        let levels = if amplitudes.is_empty() { levels } else { amplitudes.len() };
        Some(Self {
            name: name?,
            levels,
            temperature,
            spacing,
            band_width,
            amplitudes,
        })
    }

    /// Normalized complex amplitudes. Only the decoherence preset uses `seed`.
    pub fn generate(&self, seed: u64) -> Vec<C64> {
        let n = self.levels;
        let raw: Vec<C64> = match self.name {
            PresetName::Blackbody | PresetName::Unruh | PresetName::Hawking => (0..n)
                .map(|j| C64::new((-(j as f64) * self.spacing / (2.0 * self.temperature)).exp(), 0.0))
                .collect(),
            PresetName::Decoherence => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n).map(|_| C64::from_polar(1.0, rng.random::<f64>() * TAU)).collect()
            }
            PresetName::SolidState => {
                let centres = [n as f64 / 4.0, 3.0 * n as f64 / 4.0];
                (0..n)
                    .map(|j| {
                        let p: f64 = centres
                            .iter()
                            .map(|c| (-(j as f64 - c).powi(2) / (2.0 * self.band_width.powi(2))).exp())
                            .sum();
                        C64::new(p.sqrt(), 0.0)
                    })
                    .collect()
            }
            PresetName::Custom => self.amplitudes.iter().map(|&a| C64::new(a, 0.0)).collect(),
        };
        let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        raw.into_iter().map(|z| z / norm).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn parse(v: Value) -> (Option<SourcePreset>, Vec<Issue>) {
        let mut issues = Vec::new();
        (SourcePreset::from_value(&v, "parameters.source", &mut issues), issues)
    }

    #[test]
    fn every_preset_normalizes() {
        for name in PresetName::ALL {
            let v = json!({"name": name.as_str(), "levels": 7, "amplitudes": [0.1, 2.0, 0.3, 0.0]});
            let (p, issues) = parse(v);
            assert!(issues.is_empty(), "{issues:?}");
            let amps = p.unwrap().generate(9);
            let total: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
            assert!((total - 1.0).abs() < 1e-12, "{name:?}");
        }
    }

    #[test]
    fn thermal_ratio_follows_boltzmann() {
        let (p, _) = parse(json!({"name": "blackbody", "levels": 4, "temperature": 2.0, "spacing": 1.0}));
        let a = p.unwrap().generate(0);
        let ratio = (a[1].norm() / a[0].norm()).powi(2);
        assert!((ratio - (-0.5f64).exp()).abs() < 1e-14);
        let (p, _) = parse(json!({"name": "unruh", "acceleration": TAU}));
        assert!((p.unwrap().temperature - 1.0).abs() < 1e-15);
    }

    #[test]
    fn all_problems_are_reported() {
        let (p, issues) = parse(json!({"name": "quasar", "levels": 1, "temperature": -3}));
        assert!(p.is_none());
        let paths: Vec<_> = issues.iter().map(|i| i.path.as_str()).collect();
        assert_eq!(
            paths,
            ["parameters.source.name", "parameters.source.levels", "parameters.source.temperature"]
        );
    }
}
