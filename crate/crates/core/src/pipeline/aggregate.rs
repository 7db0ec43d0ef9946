//! Cross-replication summaries.

use serde::Serialize;

use super::engine::{ReplicationRecord, Scores};
use crate::metrics::MetricsReport;
use crate::pooling::Method;
use crate::stats::{mean, quantile, sample_sd};

pub const METRICS: [&str; 7] = ["reward", "or", "vdp", "accuracy", "recall", "specificity", "precision"];

/// Pseudo-metric: `mean(reward) / mean(IHT reward) - 1` over a cell.
pub const VDP_OF_MEANS: &str = "vdp_of_means";

pub fn metric_value(report: &MetricsReport, metric: &str) -> Option<f64> {
    match metric {
        "reward" => Some(report.reward),
        "or" => report.or,
        "vdp" => report.vdp,
        "accuracy" => report.accuracy,
        "recall" => report.recall,
        "specificity" => report.specificity,
        "precision" => report.precision,
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub cell_id: usize,
    pub method: Method,
    pub metric: &'static str,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    /// Replications contributing a value.
    pub count: usize,
    /// Replications where the metric was absent or the replication failed.
    pub excluded: usize,
    /// 2.5/50/97.5 percentiles of the per-replication method-minus-IHT
    /// difference.
    pub diff_p025: Option<f64>,
    pub diff_p50: Option<f64>,
    pub diff_p975: Option<f64>,
}

fn outcome_for(scores: &Scores, method: Method) -> Option<&MetricsReport> {
    scores.methods.iter().map(|m| &m.report).find(|r| r.method == method)
}

/// Summaries per (cell, method, metric) in cell, method and metric order.
/// `records` must be ordered by replication within each cell.
pub fn aggregate(n_cells: usize, methods: &[Method], records: &[ReplicationRecord]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for cell in 0..n_cells {
        let recs: Vec<&ReplicationRecord> = records.iter().filter(|r| r.cell_id == cell).collect();
        let ok: Vec<&Scores> = recs.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
        for &method in methods {
            for metric in METRICS {
                let mut values = Vec::new();
                let mut diffs = Vec::new();
                for s in &ok {
                    let Some(report) = outcome_for(s, method) else { continue };
                    if let Some(v) = metric_value(report, metric) {
                        values.push(v);
                        if let Some(base) = metric_value(&s.iht, metric) {
                            diffs.push(v - base);
                        }
                    }
                }
                let summary = |q: f64| (!diffs.is_empty()).then(|| quantile(&diffs, q));
                rows.push(AggregateRow {
                    cell_id: cell,
                    method,
                    metric,
                    mean: (!values.is_empty()).then(|| mean(&values)),
                    sd: (values.len() > 1).then(|| sample_sd(&values)),
                    count: values.len(),
                    excluded: recs.len() - values.len(),
                    diff_p025: summary(0.025),
                    diff_p50: summary(0.5),
                    diff_p975: summary(0.975),
                });
            }
            let rewards: Vec<f64> = ok.iter().filter_map(|s| outcome_for(s, method)).map(|r| r.reward).collect();
            let base: Vec<f64> = ok.iter().filter(|s| outcome_for(s, method).is_some()).map(|s| s.iht.reward).collect();
            let base_mean = mean(&base);
            let ratio = (!rewards.is_empty() && base_mean != 0.0).then(|| mean(&rewards) / base_mean - 1.0);
            rows.push(AggregateRow {
                cell_id: cell,
                method,
                metric: VDP_OF_MEANS,
                mean: ratio,
                sd: None,
                count: rewards.len(),
                excluded: recs.len() - rewards.len(),
                diff_p025: None,
                diff_p50: None,
                diff_p975: None,
            });
        }
    }
    rows
}

/// Convenience lookup of one aggregate mean.
pub fn find_mean(rows: &[AggregateRow], cell: usize, method: Method, metric: &str) -> Option<f64> {
    rows.iter()
        .find(|r| r.cell_id == cell && r.method == method && r.metric == metric)
        .and_then(|r| r.mean)
}
