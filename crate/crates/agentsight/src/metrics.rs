//! Binary detection metrics, the classifier-filter study, and latency
//! measurement.
//!
//! Ratios with zero denominators are reported as absent rather than zero so
//! a degenerate corpus cannot silently inflate a score. All computations are
//! pure; latency measurement runs single-threaded so scores are not skewed
//! by contention.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{DetectorError, TrainedDetector};
use crate::event::RunLog;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },
    #[error("at least one evaluated item is required")]
    Empty,
    #[error("run at index {index} is detector-positive but has no classifier verdict")]
    MissingClassifierVerdict { index: usize },
    #[error(transparent)]
    Detector(#[from] DetectorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn tally(predictions: &[bool], labels: &[bool]) -> Result<Self, EvalError> {
        if predictions.len() != labels.len() {
            return Err(EvalError::LengthMismatch { left: predictions.len(), right: labels.len() });
        }
        if predictions.is_empty() {
            return Err(EvalError::Empty);
        }
        let mut counts = Self::default();
        for (&p, &l) in predictions.iter().zip(labels) {
            match (p, l) {
                (true, true) => counts.tp += 1,
                (true, false) => counts.fp += 1,
                (false, false) => counts.tn += 1,
                (false, true) => counts.fn_ += 1,
            }
        }
        Ok(counts)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn ratio(numerator: usize, denominator: usize) -> Option<f64> {
    (denominator > 0).then(|| numerator as f64 / denominator as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fpr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_latency_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ra: Option<f64>,
}

impl MetricsReport {
    fn from_counts(counts: ConfusionCounts) -> Self {
        let precision = ratio(counts.tp, counts.tp + counts.fp);
        let recall = ratio(counts.tp, counts.tp + counts.fn_);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        Self {
            counts,
            accuracy: (counts.tp + counts.tn) as f64 / counts.total() as f64,
            precision,
            recall,
            f1,
            fpr: ratio(counts.fp, counts.fp + counts.tn),
            mean_latency_seconds: None,
            ra: None,
        }
    }
}

/// Standard binary detection metrics with `true` as the positive class.
pub fn compute_metrics(predictions: &[bool], labels: &[bool]) -> Result<MetricsReport, EvalError> {
    Ok(MetricsReport::from_counts(ConfusionCounts::tally(predictions, labels)?))
}

/// Fraction of anomalous runs whose predicted root cause agent matches.
pub fn root_cause_accuracy(predicted: &[u32], truth: &[u32]) -> Result<f64, EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch { left: predicted.len(), right: truth.len() });
    }
    if predicted.is_empty() {
        return Err(EvalError::Empty);
    }
    let matches = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(matches as f64 / predicted.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterStudy {
    pub before: MetricsReport,
    pub after: MetricsReport,
    /// before-FPR minus after-FPR; positive means the filter removed false
    /// positives.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fpr_delta: Option<f64>,
    /// before-recall minus after-recall; positive means true positives were
    /// lost to the filter.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub recall_delta: Option<f64>,
}

/// Measures how much a classification pass over detector alerts reduces the
/// false positive rate. The filtered verdict flags a run only when both the
/// detector and the classifier flag it, so after-recall can never exceed
/// before-recall. Classifier verdicts are required exactly where the detector
/// fired; detector-negative runs never reach the classifier.
pub fn filter_study(
    detector_verdicts: &[bool],
    classifier_verdicts: &[Option<bool>],
    labels: &[bool],
) -> Result<FilterStudy, EvalError> {
    if detector_verdicts.len() != classifier_verdicts.len() {
        return Err(EvalError::LengthMismatch {
            left: detector_verdicts.len(),
            right: classifier_verdicts.len(),
        });
    }
    let mut filtered = Vec::with_capacity(detector_verdicts.len());
    for (index, (&det, cls)) in detector_verdicts.iter().zip(classifier_verdicts).enumerate() {
        let keep = match (det, cls) {
            (false, _) => false,
            (true, Some(flagged)) => *flagged,
            (true, None) => return Err(EvalError::MissingClassifierVerdict { index }),
        };
        filtered.push(keep);
    }
    let before = compute_metrics(detector_verdicts, labels)?;
    let after = compute_metrics(&filtered, labels)?;
    let delta = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(x), Some(y)) => Some(x - y),
        _ => None,
    };
    Ok(FilterStudy {
        fpr_delta: delta(before.fpr, after.fpr),
        recall_delta: delta(before.recall, after.recall),
        before,
        after,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub per_run_seconds: Vec<f64>,
    pub mean_seconds: f64,
    pub std_dev_seconds: f64,
    pub max_seconds: f64,
}

/// Wall-clock time of `score_run` per run. Only the scoring call is timed:
/// feature extraction and the hashing embedder are inside it, file IO and any
/// remote round-trips are not.
pub fn measure_latency(
    detector: &TrainedDetector,
    runs: &[RunLog],
) -> Result<LatencyReport, EvalError> {
    if runs.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut per_run_seconds = Vec::with_capacity(runs.len());
    for run in runs {
        let started = Instant::now();
        detector.score_run(run)?;
        per_run_seconds.push(started.elapsed().as_secs_f64());
    }
    let n = per_run_seconds.len() as f64;
    let mean_seconds = per_run_seconds.iter().sum::<f64>() / n;
    let std_dev_seconds = if per_run_seconds.len() > 1 {
        let var = per_run_seconds.iter().map(|s| (s - mean_seconds).powi(2)).sum::<f64>()
            / (n - 1.0);
        var.sqrt()
    } else {
        0.0
    };
    let max_seconds = per_run_seconds.iter().cloned().fold(0.0, f64::max);
    Ok(LatencyReport { per_run_seconds, mean_seconds, std_dev_seconds, max_seconds })
}

fn fmt_opt(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.4}"),
        None => "absent".into(),
    }
}

/// Aligned-column text rendering of a metrics report.
pub fn render_metrics_text(report: &MetricsReport) -> String {
    let rows = [
        ("accuracy", format!("{:.4}", report.accuracy)),
        ("precision", fmt_opt(report.precision)),
        ("recall", fmt_opt(report.recall)),
        ("f1", fmt_opt(report.f1)),
        ("fpr", fmt_opt(report.fpr)),
        ("mean_latency_seconds", fmt_opt(report.mean_latency_seconds)),
        ("ra", fmt_opt(report.ra)),
        ("tp", report.counts.tp.to_string()),
        ("fp", report.counts.fp.to_string()),
        ("tn", report.counts.tn.to_string()),
        ("fn", report.counts.fn_.to_string()),
    ];
    let width = rows.iter().map(|(name, _)| name.len()).max().unwrap_or(0);
    rows.iter()
        .map(|(name, value)| format!("{name:<width$}  {value}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Before/after sections plus the deltas, for terminal display.
pub fn render_filter_study_text(study: &FilterStudy) -> String {
    format!(
        "== before classifier filter ==\n{}\n\n== after classifier filter ==\n{}\n\nfpr_delta     {}\nrecall_delta  {}",
        render_metrics_text(&study.before),
        render_metrics_text(&study.after),
        fmt_opt(study.fpr_delta),
        fmt_opt(study.recall_delta),
    )
}

/// CSV with one `score,label` row per run; labels are 0 (benign) / 1
/// (anomalous) for external plotting.
pub fn scores_csv(scored: &[(f64, bool)]) -> String {
    let mut out = String::from("score,label\n");
    for (score, label) in scored {
        out.push_str(&format!("{score},{}\n", u8::from(*label)));
    }
    out
}
