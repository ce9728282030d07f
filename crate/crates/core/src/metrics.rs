//! Metrics over training histories.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::trainer::StepRecord;

/// Fraction of the maximum ACR that counts as converged.
pub const CONVERGENCE_FRACTION: f64 = 0.999;

/// Approximated cut ratio.
pub fn acr(cut_estimate: f64, maxcut: f64) -> Result<f64> {
    if !(maxcut > 0.0) {
        return Err(invalid(format!("Max-Cut value must be positive, got {maxcut}")));
    }
    Ok(cut_estimate / maxcut)
}

/// Earliest 1-based step whose ACR is at least 0.999 of the best ACR in the
/// history. Zero for an empty history.
pub fn steps_to_converge(records: &[StepRecord]) -> usize {
    let best = records.iter().map(|r| r.acr).fold(f64::NEG_INFINITY, f64::max);
    // ACRs can be negative on signed-weight graphs; the threshold then sits above `best`.
    let threshold = if best >= 0.0 {
        CONVERGENCE_FRACTION * best
    } else {
        best / CONVERGENCE_FRACTION
    };
    records
        .iter()
        .position(|r| r.acr >= threshold)
        .map_or(0, |i| i + 1)
}

/// `(C₀ − C_converged) / steps_to_converge`, where `C₀` is the cost before
/// the first step and `C_converged` the cost after the convergence step.
pub fn gips(records: &[StepRecord]) -> f64 {
    let t = steps_to_converge(records);
    if t == 0 {
        return 0.0;
    }
    (records[0].cost_before - records[t - 1].cost_after) / t as f64
}

/// Wall time of the whole run divided by steps to converge, in seconds.
pub fn rps(records: &[StepRecord]) -> f64 {
    let t = steps_to_converge(records);
    if t == 0 {
        return 0.0;
    }
    let total: u64 = records.iter().map(|r| r.wall_ns).sum();
    total as f64 * 1e-9 / t as f64
}

/// Number of active units after every step.
pub fn active_trace(records: &[StepRecord]) -> Vec<usize> {
    records.iter().map(|r| r.active.len()).collect()
}

/// Geometric mean. Empty input gives NaN, any zero gives 0, any negative
/// value gives NaN.
pub fn gmean(values: &[f64]) -> f64 {
    if values.is_empty() || values.iter().any(|v| *v < 0.0 || v.is_nan()) {
        return f64::NAN;
    }
    if values.iter().any(|v| *v == 0.0) {
        return 0.0;
    }
    let s: f64 = values.iter().map(|v| v.ln()).sum();
    (s / values.len() as f64).exp()
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (0 for fewer than two values).
pub fn stddev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Per-run metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub final_acr: f64,
    pub steps: usize,
    pub total_steps: usize,
    pub rps: f64,
    pub gips: f64,
}

impl RunMetrics {
    pub fn of(records: &[StepRecord]) -> Self {
        Self {
            final_acr: records.last().map_or(f64::NAN, |r| r.acr),
            steps: steps_to_converge(records),
            total_steps: records.len(),
            rps: rps(records),
            gips: gips(records),
        }
    }
}

/// Geometric means over several runs, plus the mean active-unit trace
/// (runs that ended early contribute their final count).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub acr: f64,
    pub steps: f64,
    pub rps: f64,
    pub gips: f64,
    pub active_trace: Vec<f64>,
}

pub fn aggregate<'a, I>(histories: I) -> Result<Summary>
where
    I: IntoIterator<Item = &'a [StepRecord]>,
{
    let runs: Vec<&[StepRecord]> = histories.into_iter().collect();
    if runs.is_empty() {
        return Err(invalid("cannot aggregate zero histories"));
    }
    let m: Vec<RunMetrics> = runs.iter().map(|r| RunMetrics::of(r)).collect();
    let col = |f: fn(&RunMetrics) -> f64| gmean(&m.iter().map(f).collect::<Vec<_>>());
    let longest = runs.iter().map(|r| r.len()).max().unwrap_or(0);
    let traces: Vec<Vec<usize>> = runs.iter().map(|r| active_trace(r)).collect();
    let active_trace = (0..longest)
        .map(|t| {
            let vals: Vec<f64> = traces
                .iter()
                .map(|tr| tr.get(t).or(tr.last()).copied().unwrap_or(0) as f64)
                .collect();
            mean(&vals)
        })
        .collect();
    Ok(Summary {
        runs: runs.len(),
        acr: col(|r| r.final_acr),
        steps: col(|r| r.steps as f64),
        rps: col(|r| r.rps),
        gips: col(|r| r.gips),
        active_trace,
    })
}

/// Relative reduction `1 − x / baseline` (NaN when the baseline is not positive).
pub fn reduction(x: f64, baseline: f64) -> f64 {
    if baseline > 0.0 {
        1.0 - x / baseline
    } else {
        f64::NAN
    }
}

/// One row of a summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub graph: String,
    pub strategy: String,
    pub acr: f64,
    pub steps: f64,
    pub rps: f64,
    pub gips: f64,
}

/// Columns `graph,strategy,acr,steps,rps,gips`.
pub fn write_table<W: Write>(rows: &[TableRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r).map_err(|e| Error::Io(e.into()))?;
    }
    wr.flush()?;
    Ok(())
}
