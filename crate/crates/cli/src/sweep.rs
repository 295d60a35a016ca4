use rayon::prelude::*;
use serde_json::json;
use weakosc_core::weakval::discriminate;

use crate::config::{ScenarioConfig, ScenarioKind};
use crate::error::ScenarioError;
use crate::record::ResultRecord;
use crate::scenarios::{run_point, Outcome, DISTINGUISHABLE, INDISTINGUISHABLE};

/// Parses `--values`: comma-separated numbers.
pub fn parse_values(text: &str) -> Result<Vec<f64>, ScenarioError> {
    let values: Result<Vec<f64>, _> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| ScenarioError::validation("values", format!("'{s}' is not a number")))
        })
        .collect();
    values
}

/// Runs one point per value on a pool of `workers` threads. Rows keep the
/// order of `values`.
pub fn sweep(cfg: &ScenarioConfig, axis: &str, values: &[f64], workers: usize) -> Result<ResultRecord, ScenarioError> {
    if values.is_empty() {
        return Err(ScenarioError::validation("values", "sweep needs at least one value"));
    }
    let points: Vec<ScenarioConfig> = values
        .iter()
        .map(|&v| cfg.with_axis(axis, v))
        .collect::<Result<_, _>>()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ScenarioError::io("thread pool", std::io::Error::other(e.to_string())))?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        points
            .par_iter()
            .map(run_point)
            .collect::<Result<Vec<_>, _>>()
    })?;

    let (verdict, detail) = summarize(cfg.kind, &outcomes);
    let rows = outcomes.into_iter().flat_map(|o| o.rows).collect();
    let mut record = ResultRecord::new(cfg, rows, Some(verdict));
    record.metadata.sweep_axis = Some(axis.to_string());
    record.metadata.verdict_detail = detail;
    Ok(record)
}

fn summarize(kind: ScenarioKind, outcomes: &[Outcome]) -> (String, Option<serde_json::Value>) {
    if kind == ScenarioKind::StrongEquivalence {
        let all = outcomes.iter().all(|o| o.verdict == INDISTINGUISHABLE);
        return ((if all { INDISTINGUISHABLE } else { DISTINGUISHABLE }).to_string(), None);
    }
    let samples: Vec<_> = outcomes.iter().filter_map(|o| o.sample).collect();
    match discriminate(&samples) {
        Ok(v) => (
            v.kind.as_str().to_string(),
            Some(json!({
                "sgn_residual": v.sgn_residual,
                "mixed_residual": v.mixed_residual,
                "evidence": v.evidence.len(),
            })),
        ),
        Err(e) => ("Inconclusive".to_string(), Some(json!({ "reason": e.to_string() }))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(source: &str) -> ScenarioConfig {
        ScenarioConfig::from_json(&format!(
            r#"{{"kind":"TwoState","parameters":{{"A":0.5,"B":1,"omega":1e6,"source":"{source}"}}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn oscillating_sweep_is_pure() {
        let r = sweep(&base("oscillating"), "AB", &[0.25, 0.5, 2.0, 4.0], 3).unwrap();
        assert_eq!(r.verdict.as_deref(), Some("OscillatingPure"));
        let order: Vec<f64> = r.rows.iter().map(|row| row.inputs.get("AB").unwrap().as_f64().unwrap()).collect();
        assert_eq!(order, [0.25, 0.5, 2.0, 4.0]);
    }

    #[test]
    fn mixed_sweep_is_mixed() {
        let r = sweep(&base("mixed"), "AB", &[0.25, 0.5, 2.0, 4.0], 2).unwrap();
        assert_eq!(r.verdict.as_deref(), Some("Mixed"));
    }

    #[test]
    fn rejects_empty_and_non_sweepable() {
        assert!(matches!(sweep(&base("mixed"), "AB", &[], 1), Err(ScenarioError::Validation(_))));
        assert!(matches!(sweep(&base("mixed"), "source", &[1.0], 1), Err(ScenarioError::Validation(_))));
        assert!(matches!(parse_values("1,x"), Err(ScenarioError::Validation(_))));
        assert_eq!(parse_values(" 1, 2.5 ,").unwrap(), [1.0, 2.5]);
    }

    #[test]
    fn worker_count_does_not_change_rows() {
        let one = sweep(&base("oscillating"), "phi0", &[0.1, 0.7, 1.3], 1).unwrap();
        let four = sweep(&base("oscillating"), "phi0", &[0.1, 0.7, 1.3], 4).unwrap();
        assert_eq!(one.to_csv().unwrap(), four.to_csv().unwrap());
    }
}
