//! Estimation and classification error functionals.

use nalgebra::DVector;
use serde::Serialize;

use crate::datagen::GroundTruth;
use crate::error::{domain, Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrialMetrics {
    pub risk_regression: Option<f64>,
    pub risk_directional: Option<f64>,
    pub zero_one: Option<f64>,
    pub norm_p: f64,
    pub kkt_residual: f64,
}

fn check_dim(w: &DVector<f64>, truth: &GroundTruth) -> Result<()> {
    if w.len() != truth.dim() {
        return Err(Error::Dimension {
            expected: truth.dim(),
            got: w.len(),
        });
    }
    Ok(())
}

/// `||w - w*||_2^2`.
pub fn estimation_error(w: &DVector<f64>, truth: &GroundTruth) -> Result<f64> {
    check_dim(w, truth)?;
    Ok((w - truth.vector()).norm_squared())
}

/// `||w / ||w||_2 - w*||_2^2`, in `[0, 4]`. Anti-aligned estimators score 4.
pub fn directional_error(w: &DVector<f64>, truth: &GroundTruth) -> Result<f64> {
    check_dim(w, truth)?;
    let norm = w.norm();
    if !(norm > 0.0) {
        return domain("directional error of the zero vector");
    }
    // clamp absorbs roundoff at the antipodal end
    Ok((w / norm - truth.vector()).norm_squared().clamp(0.0, 4.0))
}

/// Probability that a fresh Gaussian sample is misclassified relative to the
/// noiseless rule: `arccos(1 - r/2) / pi`.
pub fn zero_one_from_directional(r: f64) -> Result<f64> {
    if !(0.0..=4.0).contains(&r) {
        return domain(format!("directional error {r} outside [0, 4]"));
    }
    Ok((1.0 - r / 2.0).clamp(-1.0, 1.0).acos() / std::f64::consts::PI)
}

/// Returns `(||mean - w*||^2, mean_t ||w_t - mean||^2)`. Their sum is the
/// mean squared error over the solutions.
pub fn bias_variance(solutions: &[DVector<f64>], truth: &GroundTruth) -> Result<(f64, f64)> {
    if solutions.len() < 2 {
        return domain("bias-variance needs at least two solutions");
    }
    for w in solutions {
        check_dim(w, truth)?;
    }
    let t = solutions.len() as f64;
    let mut mean = DVector::zeros(truth.dim());
    for w in solutions {
        mean += w;
    }
    mean /= t;
    let bias_sq = (&mean - truth.vector()).norm_squared();
    let variance = solutions
        .iter()
        .map(|w| (w - &mean).norm_squared())
        .sum::<f64>()
        / t;
    Ok((bias_sq, variance))
}
