use serde::{Deserialize, Serialize};

use super::config::MetricsConfig;
use super::sim::TimeSeries;
use super::HarnessError;

const TIME_EPS: f64 = 1e-9;

/// Seconds after `onset` until the max-over-robots error norm first drops
/// below `threshold`. `Some(0.0)` when it is already below at onset.
pub fn convergence_time(series: &TimeSeries, threshold: f64, onset: f64) -> Option<f64> {
    series
        .records
        .iter()
        .find(|r| r.t >= onset - TIME_EPS && r.max_error < threshold)
        .map(|r| (r.t - onset).max(0.0))
}

/// Seconds after `onset` from which the error norm stays below
/// `threshold` through the end of the run.
pub fn settling_time(series: &TimeSeries, threshold: f64, onset: f64) -> Option<f64> {
    let post: Vec<_> = series.records.iter().filter(|r| r.t >= onset - TIME_EPS).collect();
    let last = post.last()?;
    if last.max_error >= threshold {
        return None;
    }
    match post.iter().rposition(|r| r.max_error >= threshold) {
        None => Some(0.0),
        Some(k) => Some((post[k + 1].t - onset).max(0.0)),
    }
}

/// Mean of the max-over-robots error norm over the final `window` seconds.
pub fn steady_state_error(series: &TimeSeries, window: f64) -> Result<f64, HarnessError> {
    let Some(last) = series.records.last() else {
        return Err(HarnessError::WindowTooLong { window, available: 0.0 });
    };
    let available = last.t - series.onset;
    if window > available + TIME_EPS || window <= 0.0 {
        return Err(HarnessError::WindowTooLong { window, available });
    }
    let start = last.t - window;
    let tail: Vec<f64> = series.records.iter().filter(|r| r.t > start + TIME_EPS).map(|r| r.max_error).collect();
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// Mean of the max-over-robots error norm over `[start, end]`.
pub fn window_mean_error(series: &TimeSeries, start: f64, end: f64) -> Option<f64> {
    let vals: Vec<f64> = series
        .records
        .iter()
        .filter(|r| r.t >= start - TIME_EPS && r.t <= end + TIME_EPS)
        .map(|r| r.max_error)
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Per-axis maximum and windowed mean of `|h - h_ref|` taken over robots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisErrors {
    pub max: Vec<f64>,
    pub mean: Vec<f64>,
}

pub fn axis_errors(series: &TimeSeries, start: f64, end: f64) -> Option<AxisErrors> {
    let mut max = vec![0.0; series.dim];
    let mut sum = vec![0.0; series.dim];
    let mut count = 0usize;
    for r in series.records.iter().filter(|r| r.t >= start - TIME_EPS && r.t <= end + TIME_EPS) {
        count += 1;
        for a in 0..series.dim {
            let worst = r.robots.iter().map(|rb| (rb.h[a] - rb.h_ref[a]).abs()).fold(0.0, f64::max);
            max[a] = f64::max(max[a], worst);
            sum[a] += worst;
        }
    }
    (count > 0).then(|| AxisErrors { max, mean: sum.iter().map(|s| s / count as f64).collect() })
}

/// Percentage reduction of per-axis errors in `controlled` relative to a
/// paired `reference` run over the same window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReduction {
    pub max_pct: Vec<f64>,
    pub mean_pct: Vec<f64>,
}

pub fn error_reduction(controlled: &AxisErrors, reference: &AxisErrors) -> ErrorReduction {
    let pct = |c: &[f64], r: &[f64]| c.iter().zip(r).map(|(c, r)| if *r > 0.0 { 100.0 * (r - c) / r } else { 0.0 }).collect();
    ErrorReduction { max_pct: pct(&controlled.max, &reference.max), mean_pct: pct(&controlled.mean, &reference.mean) }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// First passage below the threshold after onset (s).
    pub convergence_time: Option<f64>,
    /// Time after onset from which the error stays below the threshold (s).
    pub settled_time: Option<f64>,
    pub steady_state_error: Option<f64>,
    pub max_error: Option<f64>,
    pub window_mean_error: Option<f64>,
    pub axis_errors: Option<AxisErrors>,
    #[serde(default)]
    pub reduction: Option<ErrorReduction>,
}

pub fn summarize(series: &TimeSeries, metrics: &MetricsConfig) -> RunSummary {
    let [a, b] = metrics.average_window;
    RunSummary {
        convergence_time: convergence_time(series, metrics.threshold, series.onset),
        settled_time: settling_time(series, metrics.threshold, series.onset),
        steady_state_error: steady_state_error(series, metrics.steady_window).ok(),
        max_error: series.max_errors().reduce(f64::max),
        window_mean_error: window_mean_error(series, a, b),
        axis_errors: axis_errors(series, a, b),
        reduction: None,
    }
}

/// Summary of `controlled` with its reductions against `reference`.
pub fn summarize_paired(controlled: &TimeSeries, reference: &TimeSeries, metrics: &MetricsConfig) -> RunSummary {
    let mut s = summarize(controlled, metrics);
    let r = summarize(reference, metrics);
    if let (Some(c), Some(r)) = (&s.axis_errors, &r.axis_errors) {
        s.reduction = Some(error_reduction(c, r));
    }
    s
}
