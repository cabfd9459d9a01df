//! Log-log slope estimation for scaling-law checks.
//!
//! The experiments distinguish O(1/√N) from O(1/N) infidelity decay by the
//! fitted exponent of mean infidelity against shot count on log10 axes.

use crate::error::{QdtError, Result};

/// Ordinary least-squares slope of log10(value) against log10(shots).
///
/// Returns (slope, standard error). Needs at least three points with strictly
/// positive coordinates; the standard error comes from the usual residual
/// estimate √(SSR/(m−2)/Sxx).
pub fn fit_log_slope(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(QdtError::InvalidArgument(format!(
            "slope fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    for &(x, y) in points {
        if x <= 0.0 || y <= 0.0 {
            return Err(QdtError::InvalidArgument(format!(
                "slope fit needs positive coordinates, got ({x}, {y})"
            )));
        }
    }
    let m = points.len() as f64;
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(x, y)| (x.log10(), y.log10()))
        .collect();
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx < 1e-12 {
        return Err(QdtError::InvalidArgument(
            "slope fit needs distinct x values".into(),
        ));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ssr: f64 = logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let stderr = (ssr / (m - 2.0) / sxx).sqrt();
    Ok((slope, stderr))
}

/// Convenience wrapper for integer shot grids.
pub fn fit_log_slope_counts(shots: &[u64], values: &[f64]) -> Result<(f64, f64)> {
    if shots.len() != values.len() {
        return Err(QdtError::DimensionMismatch {
            expected: shots.len(),
            got: values.len(),
        });
    }
    let points: Vec<(f64, f64)> = shots
        .iter()
        .zip(values)
        .map(|(&n, &v)| (n as f64, v))
        .collect();
    fit_log_slope(&points)
}
