//! Minimum-lp-norm interpolation and the hard-margin lp-SVM.
//!
//! Both problems are solved through their conjugate duals. For `1 < p <= 2`
//! the Fenchel conjugate of `|w|^p / p` is `|v|^q / q` with `q = p/(p-1) >= 2`,
//! so the dual lives in `R^n` and is twice differentiable:
//!
//! ```text
//! interpolation:  max_lambda   <lambda, y> - ||X^T lambda||_q^q / q
//! margin:         max_{lambda >= 0}  <lambda, 1> - ||A^T lambda||_q^q / q,   A = diag(y) X
//! ```
//!
//! and the primal point is recovered as `w = sign(v) |v|^(q-1)` with
//! `v = X^T lambda` (resp. `A^T lambda`). Every returned [`Solution`] carries a
//! KKT residual computed independently of the dual iterate (see [`kkt`]).
//!
//! `p = 1` interpolation uses ADMM basis pursuit. The `p = 1` margin problem
//! is approximated by continuation to `p = 1 + 3 / ln d`.

mod interp;
pub mod kkt;
mod margin;
pub mod oracle;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

pub use interp::solve_min_lp_norm;
pub use kkt::{kkt_residual_basis_pursuit, kkt_residual_interpolation, kkt_residual_margin};
pub use margin::{approx_l1_exponent, solve_max_l1_margin_approx, solve_max_lp_margin};
pub use oracle::{oracle_max_lp_margin, oracle_min_lp_norm, ORACLE_MIN_BUDGET};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub tol_kkt: f64,
    pub tol_feas: f64,
    pub max_iters: usize,
    pub barrier_mu0: f64,
    pub barrier_shrink: f64,
    pub admm_rho: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_kkt: 1e-8,
            tol_feas: 1e-10,
            max_iters: 50_000,
            barrier_mu0: 1.0,
            barrier_shrink: 0.2,
            admm_rho: 1.0,
        }
    }
}

impl SolverOptions {
    pub fn validated(self) -> Result<Self> {
        let positive = [self.tol_kkt, self.tol_feas, self.barrier_mu0, self.admm_rho]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if !positive || self.max_iters == 0 {
            return config("solver tolerances, mu0, rho and max_iters must be positive");
        }
        if !(self.barrier_shrink > 0.0 && self.barrier_shrink < 1.0) {
            return config("barrier_shrink must lie strictly inside (0, 1)");
        }
        Ok(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub w: DVector<f64>,
    /// `||w||_p` at the exponent actually solved.
    pub objective: f64,
    pub kkt_residual: f64,
    pub feasibility_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Exponent actually solved (differs from the request for approximate l1).
    pub p: f64,
    /// Set when an l1 problem was approximated by a nearby `p > 1`.
    pub approx_l1: bool,
}

impl Solution {
    pub(crate) fn finish(
        w: DVector<f64>,
        p: f64,
        kkt_residual: f64,
        feasibility_residual: f64,
        iterations: usize,
        opts: &SolverOptions,
    ) -> Self {
        let objective = crate::linalg::lp_norm(&w, p);
        let converged = kkt_residual <= opts.tol_kkt && feasibility_residual <= opts.tol_feas;
        Self {
            w,
            objective,
            kkt_residual,
            feasibility_residual,
            iterations,
            converged,
            p,
            approx_l1: false,
        }
    }
}

pub(crate) fn check_labels(y: &DVector<f64>) -> Result<()> {
    if y.iter().all(|&v| v == 1.0 || v == -1.0) {
        Ok(())
    } else {
        config("labels must be -1 or +1")
    }
}

pub(crate) fn check_shapes(n_rows: usize, y_len: usize) -> Result<()> {
    if n_rows != y_len {
        return Err(crate::error::Error::Dimension {
            expected: n_rows,
            got: y_len,
        });
    }
    Ok(())
}
