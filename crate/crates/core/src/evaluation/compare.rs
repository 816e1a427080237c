use std::io::Write;

use serde::{Deserialize, Serialize};

use super::spearman::spearman;
use crate::error::{Error, Result};
use crate::estimators::{Method, ValuationResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub label: String,
    pub rho: f64,
    pub trainings_performed: u64,
    pub wall_time_s: f64,
    /// Reference trainings divided by this method's trainings.
    pub training_speedup: f64,
    pub wall_speedup: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub reference: String,
    pub reference_trainings: u64,
    pub reference_wall_time_s: f64,
    pub dataset_hash: Option<String>,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "method",
            "label",
            "rho",
            "trainings_performed",
            "wall_time_s",
            "training_speedup",
            "wall_speedup",
            "seed",
            "dataset_hash",
        ])?;
        let hash = self.dataset_hash.as_deref().unwrap_or("");
        for r in &self.rows {
            w.write_record([
                r.method.as_str().to_string(),
                r.label.clone(),
                format!("{:.16e}", r.rho),
                r.trainings_performed.to_string(),
                format!("{:.16e}", r.wall_time_s),
                format!("{:.16e}", r.training_speedup),
                format!("{:.16e}", r.wall_speedup),
                r.seed.to_string(),
                hash.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn label(result: &ValuationResult) -> String {
    match result.band {
        Some((lo, hi)) => format!("{}[{lo},{hi}]", result.method.as_str()),
        None => result.method.as_str().to_string(),
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        f64::INFINITY
    }
}

fn aligned(result: &ValuationResult, reference: &ValuationResult) -> Result<Vec<f64>> {
    if result.points.len() != reference.points.len() {
        return Err(Error::Alignment(format!(
            "{} covers {} points, reference covers {}",
            label(result),
            result.points.len(),
            reference.points.len()
        )));
    }
    if let (Some(a), Some(b)) = (&result.dataset_hash, &reference.dataset_hash) {
        if a != b {
            return Err(Error::Alignment(format!("dataset hash {a} differs from reference {b}")));
        }
    }
    reference
        .points
        .iter()
        .map(|&p| {
            result
                .value_of(p)
                .ok_or_else(|| Error::Alignment(format!("{} has no value for point {p}", label(result))))
        })
        .collect()
}

/// Spearman ρ of each result against the reference over the reference's
/// points, with training-count and wall-clock speedups.
pub fn compare_methods(results: &[ValuationResult], reference: &ValuationResult) -> Result<ComparisonReport> {
    let rows = results
        .iter()
        .map(|r| {
            let values = aligned(r, reference)?;
            Ok(ComparisonRow {
                method: r.method,
                label: label(r),
                rho: spearman(&values, &reference.values)?,
                trainings_performed: r.trainings_performed,
                wall_time_s: r.wall_time_s,
                training_speedup: ratio(reference.trainings_performed as f64, r.trainings_performed as f64),
                wall_speedup: ratio(reference.wall_time_s, r.wall_time_s),
                seed: r.seed,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ComparisonReport {
        reference: label(reference),
        reference_trainings: reference.trainings_performed,
        reference_wall_time_s: reference.wall_time_s,
        dataset_hash: reference.dataset_hash.clone(),
        rows,
    })
}
