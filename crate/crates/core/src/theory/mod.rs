//! Rate exponents, dual-norm moments, the classification risk landscape and
//! the l1 path used in the high-dimensional analysis.
//!
//! Exponents are the power `alpha` in `O~(n^alpha)` when `d = n^beta`, with
//! logarithmic factors and constants dropped and the result capped at 0.

mod landscape;
mod moments;
mod path;

pub use landscape::{
    empirical_landscape, localization_predictors, population_profile, quadratic_lower_bound_check,
    sample_landscape, EmpiricalLandscape, LambdaSource, LocalizationPredictors,
    PopulationRiskProfile,
};
pub use moments::{lambda_q, mu_tilde, McEstimate};
pub use path::{
    gamma_path, gamma_qp_oracle, normal_sf, path_concentration_report, t_s_solve, L1Path,
    PathReportRow,
};

use serde::Serialize;

use crate::datagen::{conjugate, Task};
use crate::error::{config, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateQuery {
    pub beta: f64,
    pub p: f64,
    pub task: Task,
}

impl RateQuery {
    pub fn new(beta: f64, p: f64, task: Task) -> Result<Self> {
        if !(beta > 1.0) || !beta.is_finite() {
            return config(format!("beta = {beta} must exceed 1"));
        }
        // p = 1 is admitted as the limit p -> 1+
        if !(1.0..=2.0).contains(&p) {
            return config(format!("p = {p} must lie in [1, 2]"));
        }
        Ok(Self { beta, p, task })
    }

    fn expect(&self, task: Task) -> Result<()> {
        if self.task != task {
            return config(format!("rate query is for {}, expected {task}", self.task));
        }
        if !(self.beta > 1.0) {
            return config(format!("beta = {} must exceed 1", self.beta));
        }
        Ok(())
    }
}

/// Min-lp-norm interpolation: `min(0, max(beta(2p-2) - p, 1 - beta))`.
pub fn rate_exponent_regression(qr: &RateQuery) -> Result<f64> {
    qr.expect(Task::Regression)?;
    let (b, p) = (qr.beta, qr.p);
    Ok((b * (2.0 * p - 2.0) - p).max(1.0 - b).min(0.0))
}

/// Max-lp-margin classification: `min(0, max(beta(3p-3) - 1.5p, 1 - beta, -1))`.
pub fn rate_exponent_classification(qr: &RateQuery) -> Result<f64> {
    qr.expect(Task::Classification)?;
    let (b, p) = (qr.beta, qr.p);
    Ok((b * (3.0 * p - 3.0) - 1.5 * p)
        .max(1.0 - b)
        .max(-1.0)
        .min(0.0))
}

/// Exponent of the uniform-convergence bound for min-lp-norm interpolation.
/// The bound is a sum of five terms, so the exponent is the largest of
/// `-beta/q, -1/2, 1 - beta, beta/q - 1/2, 2 beta/q - 1`, capped at 0.
pub fn koehler_exponent(qr: &RateQuery) -> Result<f64> {
    qr.expect(Task::Regression)?;
    let b = qr.beta;
    let inv_q = 1.0 / conjugate(qr.p);
    let terms = [
        -b * inv_q,
        -0.5,
        1.0 - b,
        b * inv_q - 0.5,
        2.0 * b * inv_q - 1.0,
    ];
    Ok(terms.into_iter().fold(f64::NEG_INFINITY, f64::max).min(0.0))
}

/// One line of the `theory rates` table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub task: Task,
    pub beta: f64,
    pub p: f64,
    pub alpha: f64,
    pub source: &'static str,
}

/// Rate curves over a `(beta, p)` grid: the upper bound for each task, the
/// uniform-convergence comparison for regression, and the p-free reference
/// lines (`minimax` at -1 and `uniform_lower` at `1 - beta`).
pub fn rate_table(task: Task, betas: &[f64], ps: &[f64]) -> Result<Vec<RateRow>> {
    let mut rows = Vec::new();
    for &beta in betas {
        for &p in ps {
            let qr = RateQuery::new(beta, p, task)?;
            let (alpha, source) = match task {
                Task::Regression => (rate_exponent_regression(&qr)?, "thm1"),
                Task::Classification => (rate_exponent_classification(&qr)?, "thm3"),
            };
            rows.push(RateRow {
                task,
                beta,
                p,
                alpha,
                source,
            });
            if task == Task::Regression {
                rows.push(RateRow {
                    task,
                    beta,
                    p,
                    alpha: koehler_exponent(&qr)?,
                    source: "koehler",
                });
            }
        }
        for (alpha, source) in [(-1.0, "minimax"), (1.0 - beta, "uniform_lower")] {
            rows.push(RateRow {
                task,
                beta,
                p: f64::NAN,
                alpha,
                source,
            });
        }
    }
    Ok(rows)
}
