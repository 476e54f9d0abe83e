//! Detection-vs-truth metrics and the threshold-curve fit.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::volume::BinaryMask;

/// Overlap of a detected region with the true region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    pub detected_voxels: usize,
    pub truth_voxels: usize,
    pub overlap_voxels: usize,
    /// `|detected ∩ truth| / |truth|`
    pub sensitivity: f64,
    /// `|detected| / |truth|`
    pub spill_over: f64,
    pub dice: f64,
}

impl RecoveryMetrics {
    /// `truth` should already be restricted to analyzable voxels.
    pub fn compute(detected: &BinaryMask, truth: &BinaryMask) -> Result<Self> {
        let overlap = detected.intersection_size(truth)?;
        let d = detected.size();
        let t = truth.size();
        let ratio = |num: f64, den: usize| if den == 0 { 0.0 } else { num / den as f64 };
        Ok(RecoveryMetrics {
            detected_voxels: d,
            truth_voxels: t,
            overlap_voxels: overlap,
            sensitivity: ratio(overlap as f64, t),
            spill_over: ratio(d as f64, t),
            dice: ratio(2.0 * overlap as f64, d + t),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Ordinary least squares of `y` on `x`. `None` with fewer than two points
/// or no spread in `x`.
pub fn least_squares(points: &[(f64, f64)]) -> Option<LineFit> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LineFit { slope, intercept: my - slope * mx, r_squared, n_points: n })
}

/// Fit of `ln(threshold)` against `ln(p)`, over points with a positive
/// threshold only.
pub fn log_log_fit(curve: &[(f64, f64)]) -> Option<LineFit> {
    let points: Vec<(f64, f64)> =
        curve.iter().filter(|(p, t)| *p > 0.0 && *t > 0.0).map(|(p, t)| (p.ln(), t.ln())).collect();
    least_squares(&points)
}
