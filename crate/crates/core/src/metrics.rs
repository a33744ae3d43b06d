//! Confusion matrix, sensitivity / PPV / accuracy, and report rendering.

use crate::percent::format_ratio;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("{predictions} predictions vs {labels} labels")]
    Length { predictions: usize, labels: usize },
    #[error("label {value} at index {index} is not 0 or 1")]
    Label { index: usize, value: u8 },
    #[error("prediction at index {0} is not finite")]
    NonFinite(usize),
}

/// Rows are ground truth, columns are predictions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
}

impl ConfusionMatrix {
    pub fn new(tn: u64, fp: u64, fn_: u64, tp: u64) -> Self {
        ConfusionMatrix { tn, fp, fn_, tp }
    }

    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }

    /// (numerator, denominator) of tp / (tp + fn).
    pub fn sensitivity_ratio(&self) -> (u64, u64) {
        (self.tp, self.tp + self.fn_)
    }

    /// (numerator, denominator) of tp / (tp + fp).
    pub fn ppv_ratio(&self) -> (u64, u64) {
        (self.tp, self.tp + self.fp)
    }

    pub fn accuracy_ratio(&self) -> (u64, u64) {
        (self.tp + self.tn, self.total())
    }
}

/// Counts outcomes; a prediction is positive iff `probability >= threshold`.
pub fn confusion(predictions: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionMatrix, MetricsError> {
    if predictions.len() != labels.len() {
        return Err(MetricsError::Length { predictions: predictions.len(), labels: labels.len() });
    }
    let mut cm = ConfusionMatrix::default();
    for (i, (&p, &y)) in predictions.iter().zip(labels).enumerate() {
        if !p.is_finite() {
            return Err(MetricsError::NonFinite(i));
        }
        let predicted = p >= threshold;
        match (y, predicted) {
            (0, false) => cm.tn += 1,
            (0, true) => cm.fp += 1,
            (1, false) => cm.fn_ += 1,
            (1, true) => cm.tp += 1,
            (value, _) => return Err(MetricsError::Label { index: i, value }),
        }
    }
    Ok(cm)
}

fn ratio((num, den): (u64, u64)) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Headline metrics. A metric whose denominator is zero is `None`
/// (rendered as "n/a").
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sensitivity: Option<f64>,
    pub ppv: Option<f64>,
    pub accuracy: Option<f64>,
    pub matrix: ConfusionMatrix,
    pub threshold: f64,
}

pub fn metrics_from_confusion(cm: ConfusionMatrix) -> MetricsReport {
    metrics_with_threshold(cm, 0.5)
}

pub fn metrics_with_threshold(cm: ConfusionMatrix, threshold: f64) -> MetricsReport {
    MetricsReport {
        sensitivity: ratio(cm.sensitivity_ratio()),
        ppv: ratio(cm.ppv_ratio()),
        accuracy: ratio(cm.accuracy_ratio()),
        matrix: cm,
        threshold,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStyle {
    Table,
    Json,
}

impl std::str::FromStr for ReportStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(ReportStyle::Table),
            "json" => Ok(ReportStyle::Json),
            other => Err(format!("unknown format {other:?} (expected table or json)")),
        }
    }
}

impl MetricsReport {
    /// `"95.5 / 97.0 / 96.3"`: sensitivity / PPV / accuracy in percent,
    /// one decimal, half-up on the exact ratios.
    pub fn summary_line(&self) -> String {
        let m = &self.matrix;
        let (s, p, a) = (m.sensitivity_ratio(), m.ppv_ratio(), m.accuracy_ratio());
        format!("{} / {} / {}", format_ratio(s.0, s.1), format_ratio(p.0, p.1), format_ratio(a.0, a.1))
    }
}

pub fn render_report(report: &MetricsReport, style: ReportStyle) -> String {
    match style {
        ReportStyle::Json => serde_json::to_string_pretty(report).expect("report serializes"),
        ReportStyle::Table => {
            let m = &report.matrix;
            let mut out = String::new();
            let _ = writeln!(out, "Sensitivity (%) / PPV (%) / Accuracy (%)");
            let _ = writeln!(out, "{}", report.summary_line());
            let _ = writeln!(out, "threshold: {}", report.threshold);
            let _ = writeln!(out, "truth \\ predicted | Negative | Positive");
            let _ = writeln!(out, "Negative          | {:>8} | {:>8}", m.tn, m.fp);
            let _ = writeln!(out, "Positive          | {:>8} | {:>8}", m.fn_, m.tp);
            out
        }
    }
}
