use crate::metrics::MetricsReport;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Minimum operating requirements a model must meet to be accepted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstraintSpec {
    pub min_sensitivity: f64,
    pub min_ppv: f64,
}

impl Default for ConstraintSpec {
    fn default() -> Self {
        ConstraintSpec { min_sensitivity: 0.95, min_ppv: 0.95 }
    }
}

impl ConstraintSpec {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("min_sensitivity", self.min_sensitivity), ("min_ppv", self.min_ppv)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub name: String,
    /// `None` when the metric is undefined; an undefined metric fails.
    pub value: Option<f64>,
    pub minimum: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintVerdict {
    pub passed: bool,
    pub checks: Vec<ConstraintCheck>,
}

impl fmt::Display for ConstraintVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", if self.passed { "PASS" } else { "FAIL" })?;
        for c in &self.checks {
            let v = c.value.map_or("n/a".to_string(), |v| format!("{v:.4}"));
            write!(f, "; {} {} >= {} {}", c.name, v, c.minimum, if c.passed { "ok" } else { "violated" })?;
        }
        Ok(())
    }
}

/// Passes iff sensitivity >= min_sensitivity and PPV >= min_ppv (inclusive).
pub fn check_constraints(metrics: &MetricsReport, spec: &ConstraintSpec) -> ConstraintVerdict {
    check_values(metrics.sensitivity, metrics.ppv, spec)
}

pub fn check_values(sensitivity: Option<f64>, ppv: Option<f64>, spec: &ConstraintSpec) -> ConstraintVerdict {
    let check = |name: &str, value: Option<f64>, minimum: f64| ConstraintCheck {
        name: name.into(),
        value,
        minimum,
        passed: value.is_some_and(|v| v >= minimum),
    };
    let checks = vec![check("sensitivity", sensitivity, spec.min_sensitivity), check("ppv", ppv, spec.min_ppv)];
    ConstraintVerdict { passed: checks.iter().all(|c| c.passed), checks }
}
