use serde::{Deserialize, Serialize};

use super::numeric::{mean, median, sample_variance};
use crate::error::{usage, Result};
use crate::inference::IntervalEstimate;

/// Targets of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub risk: f64,
    pub pq: Option<f64>,
    pub rep_index: usize,
}

/// Per-replication containment flags and interval geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageRow {
    pub point: f64,
    pub width: f64,
    pub covered_risk: bool,
    pub covered_erisk: bool,
    pub covered_pq: Option<bool>,
    /// Containment of the proxy quantity averaged over replications.
    pub covered_pq_avg: Option<bool>,
    pub imputed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub coverage_risk: f64,
    pub coverage_expected_risk: f64,
    pub coverage_pq: Option<f64>,
    pub coverage_pq_averaged: Option<f64>,
    pub median_width: f64,
    pub sd_point: f64,
    /// `median_width / sd_point`; absent when the point estimate does not vary.
    pub relative_width: Option<f64>,
    /// `(1 - alpha) - coverage_risk`; negative values mean over-coverage.
    pub mean_undercoverage: f64,
    pub n_reps: usize,
    pub n_imputed: usize,
}

fn fraction(flags: impl Iterator<Item = bool>) -> f64 {
    let (hits, total) = flags.fold((0usize, 0usize), |(h, t), f| (h + usize::from(f), t + 1));
    hits as f64 / total as f64
}

fn optional_fraction(flags: impl Iterator<Item = Option<bool>>) -> Option<f64> {
    let flags: Option<Vec<bool>> = flags.collect();
    flags.filter(|f| !f.is_empty()).map(|f| fraction(f.into_iter()))
}

/// Aggregates per-replication rows.
pub fn summarize(rows: &[CoverageRow], alpha: f64) -> Result<CoverageSummary> {
    if rows.is_empty() {
        return Err(usage!("coverage needs at least one replication"));
    }
    let coverage_risk = fraction(rows.iter().map(|r| r.covered_risk));
    let points: Vec<f64> = rows.iter().map(|r| r.point).collect();
    let widths: Vec<f64> = rows.iter().map(|r| r.width).collect();
    let sd = sample_variance(&points).sqrt();
    let sd_point = if sd.is_finite() { sd } else { 0.0 };
    let median_width = median(&widths);
    Ok(CoverageSummary {
        coverage_risk,
        coverage_expected_risk: fraction(rows.iter().map(|r| r.covered_erisk)),
        coverage_pq: optional_fraction(rows.iter().map(|r| r.covered_pq)),
        coverage_pq_averaged: optional_fraction(rows.iter().map(|r| r.covered_pq_avg)),
        median_width,
        sd_point,
        relative_width: (sd_point > 0.0).then(|| median_width / sd_point),
        mean_undercoverage: (1.0 - alpha) - coverage_risk,
        n_reps: rows.len(),
        n_imputed: rows.iter().filter(|r| r.imputed).count(),
    })
}

/// Arithmetic mean of the per-replication risks.
pub fn expected_risk(truths: &[TruthRecord]) -> f64 {
    let risks: Vec<f64> = truths.iter().map(|t| t.risk).collect();
    mean(&risks)
}

/// Containment rows for `(interval, truth)` records; the expected risk and the
/// averaged proxy quantity are computed from the records themselves.
pub fn coverage_rows(records: &[(IntervalEstimate, TruthRecord)]) -> Vec<CoverageRow> {
    let truths: Vec<TruthRecord> = records.iter().map(|(_, t)| *t).collect();
    let erisk = expected_risk(&truths);
    let pqs: Option<Vec<f64>> = truths.iter().map(|t| t.pq).collect();
    let pq_avg = pqs.map(|v| mean(&v));
    records
        .iter()
        .map(|(ci, t)| CoverageRow {
            point: ci.point,
            width: ci.width(),
            covered_risk: ci.contains(t.risk),
            covered_erisk: ci.contains(erisk),
            covered_pq: t.pq.map(|pq| ci.contains(pq)),
            covered_pq_avg: pq_avg.map(|pq| ci.contains(pq)),
            imputed: false,
        })
        .collect()
}

pub fn coverage(records: &[(IntervalEstimate, TruthRecord)], alpha: f64) -> Result<CoverageSummary> {
    summarize(&coverage_rows(records), alpha)
}
