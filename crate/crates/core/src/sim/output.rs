//! CSV emission for batch summaries, single-trial traces and sweeps.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::sweep::SweepCell;
use super::trial::TrialRecord;
use crate::error::Result;
use crate::input_design::Certificate;

#[derive(Serialize)]
struct SummaryRow<'a> {
    method: &'a str,
    true_model: usize,
    trial: u64,
    decided: bool,
    correct: bool,
    steps: usize,
    mean_design_ms: f64,
    certified_fraction: Option<f64>,
}

pub fn write_summary<W: Write>(out: W, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(SummaryRow {
            method: r.method.name(),
            true_model: r.true_model,
            trial: r.trial_id,
            decided: r.decided.is_some(),
            correct: r.correct(),
            steps: r.steps,
            mean_design_ms: r.mean_design_ms(),
            certified_fraction: r.certified_fraction(),
        })?;
    }
    if records.is_empty() {
        w.write_record([
            "method",
            "true_model",
            "trial",
            "decided",
            "correct",
            "steps",
            "mean_design_ms",
            "certified_fraction",
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn certificate_name(c: Certificate) -> &'static str {
    match c {
        Certificate::Yes => "yes",
        Certificate::No => "no",
        Certificate::NotApplicable => "not_applicable",
    }
}

/// One row per step: `step, u0.., y0.., P_0.., certified`.
pub fn write_trace<W: Write>(out: W, record: &TrialRecord, n_u: usize, n_y: usize, n_models: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["step".to_string()];
    header.extend((0..n_u).map(|i| format!("u{i}")));
    header.extend((0..n_y).map(|i| format!("y{i}")));
    header.extend((0..n_models).map(|i| format!("P_{i}")));
    header.push("certified".into());
    w.write_record(&header)?;
    for (t, s) in record.records.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(s.u.iter().chain(&s.y).chain(&s.probs).map(|v| v.to_string()));
        row.push(certificate_name(s.certified).into());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(out: W, cells: &[SweepCell]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in cells {
        w.serialize(c)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_file(path: &Path, records: &[TrialRecord]) -> Result<()> {
    write_summary(std::fs::File::create(path)?, records)
}

pub fn write_sweep_file(path: &Path, cells: &[SweepCell]) -> Result<()> {
    write_sweep(std::fs::File::create(path)?, cells)
}
