use super::{BenchError, RunRecord};
use crate::statemodel::StateVector;

/// Root mean square position error over frames, in pixels.
pub fn rmse(estimates: &[StateVector], truth: &[StateVector]) -> Result<f64, BenchError> {
    if estimates.len() != truth.len() {
        return Err(BenchError::LengthMismatch {
            estimates: estimates.len(),
            truth: truth.len(),
        });
    }
    if estimates.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = estimates
        .iter()
        .zip(truth)
        .map(|(e, t)| (e.x - t.x).powi(2) + (e.y - t.y).powi(2))
        .sum();
    Ok((sum / estimates.len() as f64).sqrt())
}

/// Median of a sample; `NaN` for an empty one.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Median `pe_eff / M` across runs, per iteration (index 0 is iteration 1).
pub fn recovery_curve(records: &[RunRecord]) -> Vec<f64> {
    let iterations = records.iter().map(|r| r.rows.len()).min().unwrap_or(0);
    (0..iterations)
        .map(|k| {
            let at_k: Vec<f64> = records.iter().map(|r| r.rows[k].pe_eff_frac).collect();
            median(&at_k)
        })
        .collect()
}
