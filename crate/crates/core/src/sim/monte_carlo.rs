use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use super::trial::{mix, run_trial_with, TrialContext, TrialRecord};
use crate::error::{Error, Result};
use crate::input_design::Certificate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub trials: usize,
    pub median_steps: f64,
    pub decide_rate: f64,
    /// Share of correct decisions among decided trials.
    pub accuracy: Option<f64>,
    pub mean_design_ms: f64,
    /// Certified share of all steps with an applicable certificate.
    pub certified_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<MethodSummary>,
}

/// Median with the midpoint rule for even counts.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn summarize(method: Method, records: &[TrialRecord]) -> MethodSummary {
    let steps: Vec<f64> = records.iter().map(|r| r.steps as f64).collect();
    let decided: Vec<&TrialRecord> = records.iter().filter(|r| r.decided.is_some()).collect();
    let n = records.len().max(1) as f64;
    let steps_of = |c: Certificate| records.iter().flat_map(|r| &r.records).filter(|s| s.certified == c).count();
    let (yes, no) = (steps_of(Certificate::Yes), steps_of(Certificate::No));
    MethodSummary {
        method,
        trials: records.len(),
        median_steps: median(&steps),
        decide_rate: decided.len() as f64 / n,
        accuracy: (!decided.is_empty())
            .then(|| decided.iter().filter(|r| r.correct()).count() as f64 / decided.len() as f64),
        mean_design_ms: records.iter().map(TrialRecord::mean_design_ms).sum::<f64>() / n,
        certified_fraction: (yes + no > 0).then(|| yes as f64 / (yes + no) as f64),
    }
}

/// Seeded trials for every method and true model, `runs_per_model` each.
/// Trials run in parallel; records are ordered by method, then trial id
/// (`model · runs_per_model + replicate`), independent of scheduling.
pub fn run_monte_carlo(
    cfg: &ExperimentConfig,
    methods: &[Method],
    runs_per_model: usize,
    base_seed: u64,
) -> Result<MonteCarloResult> {
    if runs_per_model == 0 {
        return Err(Error::InvalidConfig("runs_per_model must be at least 1".into()));
    }
    let true_models: Vec<usize> = match cfg.true_model {
        Some(t) => vec![t],
        None => (0..cfg.n_models()).collect(),
    };
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for &method in methods {
        let mut mcfg = cfg.clone();
        mcfg.method = method;
        mcfg.seed = mix(&[base_seed, method.stream_tag(), u64::MAX]);
        let ctx = TrialContext::new(&mcfg)?;
        let jobs: Vec<(usize, usize)> =
            true_models.iter().flat_map(|&m| (0..runs_per_model).map(move |rep| (m, rep))).collect();
        let batch = jobs
            .par_iter()
            .map(|&(m, rep)| {
                let seed = mix(&[base_seed, method.stream_tag(), m as u64, rep as u64]);
                run_trial_with(&ctx, m, seed, (m * runs_per_model + rep) as u64)
            })
            .collect::<Result<Vec<_>>>()?;
        summaries.push(summarize(method, &batch));
        records.extend(batch);
    }
    Ok(MonteCarloResult { records, summaries })
}
