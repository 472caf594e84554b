use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::evaluation::{mean, summarize, CoverageRow};

/// One row of a result file: one method in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub dgp: String,
    pub n: usize,
    pub inducer: String,
    pub loss: String,
    pub method: String,
    pub rep: usize,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub risk: f64,
    pub pq: Option<f64>,
    pub covered_risk: bool,
    pub covered_erisk: bool,
    pub covered_pq: Option<bool>,
    pub wall_time_s: f64,
    pub fits_used: usize,
    /// Containment of the proxy quantity averaged over replications.
    pub covered_pq_avg: Option<bool>,
    /// The interval failed and holds the mean bounds of the other replications.
    pub imputed: bool,
    pub fallback_fits: usize,
    pub actual_fits: usize,
}

pub fn write_records<W: Write>(out: W, records: &[ReplicationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<ReplicationRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    rdr.deserialize().map(|r| r.map_err(Into::into)).collect()
}

/// Aggregated coverage and width of one (problem, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dgp: String,
    pub n: usize,
    pub inducer: String,
    pub loss: String,
    pub method: String,
    pub n_reps: usize,
    pub coverage_risk: f64,
    pub coverage_expected_risk: f64,
    pub coverage_pq: Option<f64>,
    pub coverage_pq_averaged: Option<f64>,
    pub median_width: f64,
    pub sd_point: f64,
    pub relative_width: Option<f64>,
    pub mean_undercoverage: f64,
    pub mean_fits_used: f64,
    pub mean_wall_time_s: f64,
    pub n_imputed: usize,
}

/// Summarizes records per (dgp, n, inducer, loss, method), in order of first
/// appearance. Models are never refit.
pub fn report(records: &[ReplicationRecord], alpha: f64) -> Result<Vec<ReportRow>> {
    if records.is_empty() {
        return Err(usage!("no records to report"));
    }
    type Key = (String, usize, String, String, String);
    let key = |r: &ReplicationRecord| -> Key { (r.dgp.clone(), r.n, r.inducer.clone(), r.loss.clone(), r.method.clone()) };
    let mut groups: Vec<(Key, Vec<&ReplicationRecord>)> = Vec::new();
    for r in records {
        let k = key(r);
        match groups.iter_mut().find(|(g, _)| *g == k) {
            Some((_, members)) => members.push(r),
            None => groups.push((k, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|((dgp, n, inducer, loss, method), members)| {
            let rows: Vec<CoverageRow> = members.iter().map(|r| r.coverage_row()).collect();
            let s = summarize(&rows, alpha)?;
            Ok(ReportRow {
                dgp,
                n,
                inducer,
                loss,
                method,
                n_reps: s.n_reps,
                coverage_risk: s.coverage_risk,
                coverage_expected_risk: s.coverage_expected_risk,
                coverage_pq: s.coverage_pq,
                coverage_pq_averaged: s.coverage_pq_averaged,
                median_width: s.median_width,
                sd_point: s.sd_point,
                relative_width: s.relative_width,
                mean_undercoverage: s.mean_undercoverage,
                mean_fits_used: mean(&members.iter().map(|r| r.fits_used as f64).collect::<Vec<_>>()),
                mean_wall_time_s: mean(&members.iter().map(|r| r.wall_time_s).collect::<Vec<_>>()),
                n_imputed: s.n_imputed,
            })
        })
        .collect()
}

pub fn write_report<W: Write>(out: W, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
