//! Prediction error and paired-comparison summaries.

use anyhow::{ensure, Result};
use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// `n⁻¹ ‖fitted - y*‖²`; both vectors on the centered scale.
pub fn prediction_error(fitted_mean: ArrayView1<f64>, y_star: ArrayView1<f64>) -> Result<f64> {
    ensure!(
        fitted_mean.len() == y_star.len(),
        "length mismatch: {} fitted values vs {} latent means",
        fitted_mean.len(),
        y_star.len()
    );
    let d = &fitted_mean - &y_star;
    Ok(d.dot(&d) / d.len() as f64)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation with denominator `k - 1`; zero for fewer than two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    let k = values.len();
    if k < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (k - 1) as f64).sqrt()
}

/// `sd / √k`.
pub fn standard_error(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    sample_sd(values) / (values.len() as f64).sqrt()
}

/// Paired comparison of `a` against `b` over the same units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedSummary {
    pub units: usize,
    /// Mean of `a - b`.
    pub mean_diff: f64,
    /// `sd(a - b) / √units`.
    pub se_diff: f64,
    pub t_stat: f64,
    /// One-sided p-value for `mean(a - b) < 0`.
    pub p_less: f64,
}

pub fn paired_summary(a: &[f64], b: &[f64]) -> Result<PairedSummary> {
    ensure!(a.len() == b.len(), "paired samples differ in length: {} vs {}", a.len(), b.len());
    ensure!(a.len() >= 2, "need at least two paired units");
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean_diff = mean(&diffs);
    let se_diff = standard_error(&diffs);
    let t_stat = mean_diff / se_diff;
    let p_less = if se_diff > 0.0 {
        StudentsT::new(0.0, 1.0, (diffs.len() - 1) as f64)?.cdf(t_stat)
    } else if mean_diff < 0.0 {
        0.0
    } else {
        1.0
    };
    Ok(PairedSummary {
        units: diffs.len(),
        mean_diff,
        se_diff,
        t_stat,
        p_less,
    })
}
