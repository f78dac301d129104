use nalgebra::{DMatrix, DVector};

use super::interp::{equality_dual_newton, optimal_scaling, primal_from_dual, MAX_NEWTON};
use super::kkt::margin_residual;
use super::{check_labels, check_shapes, Solution, SolverOptions};
use crate::datagen::conjugate;
use crate::error::{config, Error, Result};
use crate::linalg::{lp_power, scale_rows, solve_psd, weighted_gram, RowSpace};

const MAX_CENTERING: usize = 200;
/// Dual multipliers beyond this size mean the dual is unbounded.
const DIVERGENCE: f64 = 1e12;
/// `||A^T lambda|| / (sum(lambda) max_i ||a_i||)` below this certifies
/// that no separating direction exists.
const FARKAS_TOL: f64 = 1e-8;

/// Maximum-lp-margin classifier: `min ||w||_p s.t. y_i <x_i, w> >= 1`.
///
/// Path-following log-barrier on the dual `max_{lambda >= 0} sum(lambda) -
/// ||A^T lambda||_q^q / q`, then an equality-constrained polish on the
/// identified active set.
pub fn solve_max_lp_margin(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    p: f64,
    opts: &SolverOptions,
) -> Result<Solution> {
    let opts = opts.validated()?;
    check_shapes(x.nrows(), y.len())?;
    check_labels(y)?;
    if !(p > 1.0 && p <= 2.0) {
        return config(format!(
            "p = {p} must lie in (1, 2]; use solve_max_l1_margin_approx for p = 1"
        ));
    }
    let a = scale_rows(x, y);
    let at = a.transpose();
    solve_dual(&a, &at, p, None, &opts).map(|(sol, _)| sol)
}

/// Exponent used in place of `p = 1`: `1 + 3 / ln d`, capped at 2.
pub fn approx_l1_exponent(d: usize) -> f64 {
    let d = d.max(2) as f64;
    (1.0 + 3.0 / d.ln()).min(2.0)
}

/// Approximate maximum-l1-margin classifier by continuation in `p` from 2
/// down to [`approx_l1_exponent`]. The returned solution has `approx_l1` set
/// and `p` equal to the exponent actually solved.
pub fn solve_max_l1_margin_approx(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<Solution> {
    let opts = opts.validated()?;
    check_shapes(x.nrows(), y.len())?;
    check_labels(y)?;
    let a = scale_rows(x, y);
    let at = a.transpose();
    let target = approx_l1_exponent(x.ncols());
    let mut warm: Option<DVector<f64>> = None;
    let mut iterations = 0;
    let mut p = 2.0;
    loop {
        let (mut sol, lambda) = solve_dual(&a, &at, p, warm.as_ref(), &opts)?;
        iterations += sol.iterations;
        if p <= target {
            sol.iterations = iterations;
            sol.approx_l1 = true;
            return Ok(sol);
        }
        warm = Some(lambda);
        p = (1.0 + 0.5 * (p - 1.0)).max(target);
    }
}

fn barrier_value(v: &DVector<f64>, lambda: &DVector<f64>, q: f64, mu: f64) -> f64 {
    if lambda.iter().any(|&l| l <= 0.0) {
        return f64::INFINITY;
    }
    let val = lp_power(v, q) / q - lambda.sum() - mu * lambda.iter().map(|l| l.ln()).sum::<f64>();
    if val.is_finite() {
        val
    } else {
        f64::INFINITY
    }
}

/// Returns the solution together with the final dual iterate (for warm starts).
fn solve_dual(
    a: &DMatrix<f64>,
    at: &DMatrix<f64>,
    p: f64,
    warm: Option<&DVector<f64>>,
    opts: &SolverOptions,
) -> Result<(Solution, DVector<f64>)> {
    let n = a.nrows();
    let q = conjugate(p);
    let ones = DVector::from_element(n, 1.0);
    let start = match warm {
        // polished multipliers vanish off the active set; keep them interior
        Some(l) => l.map(|v| v.max(1e-3 * l.amax()).max(f64::MIN_POSITIVE)),
        None => ones.clone(),
    };
    let mut lambda = optimal_scaling(start.clone(), &(at * &start), &ones, q);
    let mut mu = opts.barrier_mu0;
    let mut iterations = 0;

    loop {
        for _ in 0..MAX_CENTERING {
            if iterations >= opts.max_iters {
                break;
            }
            iterations += 1;
            let v = at * &lambda;
            let w = primal_from_dual(&v, q);
            let grad = a * &w - &ones - lambda.map(|l| mu / l);
            let h = v.map(|t| (q - 1.0) * t.abs().powf(q - 2.0));
            let mut hess = weighted_gram(a, at, &h);
            for i in 0..n {
                hess[(i, i)] += mu / (lambda[i] * lambda[i]);
            }
            let Some(step) = solve_psd(&hess, &(-&grad)) else {
                break;
            };
            let decrement = -grad.dot(&step);
            if !(decrement > 1e-14) {
                break;
            }
            let psi = barrier_value(&v, &lambda, q, mu);
            let mut t: f64 = 1.0;
            for i in 0..n {
                if step[i] < 0.0 {
                    t = t.min(-0.995 * lambda[i] / step[i]);
                }
            }
            let mut accepted = false;
            while t > 1e-14 {
                let cand = &lambda + t * &step;
                let cpsi = barrier_value(&(at * &cand), &cand, q, mu);
                if cpsi <= psi - 1e-4 * t * decrement {
                    lambda = cand;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if lambda.amax() > DIVERGENCE {
                return Err(Error::NotSeparable("dual multipliers diverged".into()));
            }
            if !accepted {
                break;
            }
        }
        if n as f64 * mu <= opts.tol_kkt || iterations >= opts.max_iters {
            break;
        }
        mu *= opts.barrier_shrink;
    }

    // Farkas: A^T lambda ~ 0 with lambda >= 0, sum(lambda) > 0
    let row_scale = a.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
    if (at * &lambda).norm() <= FARKAS_TOL * row_scale * lambda.sum() {
        return Err(Error::NotSeparable(
            "dual iterate is an infeasibility certificate".into(),
        ));
    }
    let mut w = primal_from_dual(&(at * &lambda), q);
    let margins = a * &w;
    if margins.iter().any(|m| !m.is_finite()) {
        return Err(Error::NotSeparable("dual multipliers diverged".into()));
    }
    if let Some((wp, lp, extra)) = polish(a, q, &lambda, &margins, opts) {
        w = wp;
        lambda = lp;
        iterations += extra;
    }
    let kkt = margin_residual(a, &w, p);
    let feas = margin_feasibility(a, &w);
    Ok((Solution::finish(w, p, kkt, feas, iterations, opts), lambda))
}

/// `|min_i y_i <x_i, w> - 1|`: the optimum sits exactly on the unit margin.
pub(crate) fn margin_feasibility(a: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    ((a * w).min() - 1.0).abs()
}

/// Solves the equality dual on rows where the multiplier dominates the slack
/// and accepts the result when it is primal and dual feasible.
fn polish(
    a: &DMatrix<f64>,
    q: f64,
    lambda: &DVector<f64>,
    margins: &DVector<f64>,
    opts: &SolverOptions,
) -> Option<(DVector<f64>, DVector<f64>, usize)> {
    let n = a.nrows();
    let active: Vec<usize> = (0..n).filter(|&i| lambda[i] > margins[i] - 1.0).collect();
    if active.is_empty() {
        return None;
    }
    let (active, rs) = match RowSpace::new(&a.select_rows(&active)) {
        Ok(rs) => (active, rs),
        Err(_) => independent_rows(a, active, lambda)?,
    };
    let a_s = a.select_rows(&active);
    let ones = DVector::from_element(active.len(), 1.0);
    let b = rs.transformed_rhs(&ones);
    let mu0 = rs.to_q_multipliers(&DVector::from_iterator(
        active.len(),
        active.iter().map(|&i| lambda[i]),
    ));
    let out = equality_dual_newton(rs.qt(), rs.q(), &b, q, mu0, MAX_NEWTON, |w| {
        (&a_s * w - &ones).amax() <= 0.1 * opts.tol_feas
    });
    let lam_s = rs.from_q_multipliers(&out.lambda);
    if lam_s.iter().any(|&l| l < -1e-10 * lam_s.amax()) {
        return None;
    }
    let m = a * &out.w;
    if m.iter().any(|&v| !(v >= 1.0 - opts.tol_feas)) {
        return None;
    }
    let mut full = DVector::zeros(n);
    for (k, &i) in active.iter().enumerate() {
        full[i] = lam_s[k].max(0.0);
    }
    Some((out.w, full, out.iterations))
}

/// Greedy maximal independent subset of `rows`, largest multipliers first.
/// Only reached when the active rows are linearly dependent.
fn independent_rows(
    a: &DMatrix<f64>,
    mut rows: Vec<usize>,
    lambda: &DVector<f64>,
) -> Option<(Vec<usize>, RowSpace)> {
    rows.sort_by(|&i, &j| lambda[j].total_cmp(&lambda[i]));
    let mut kept: Vec<usize> = Vec::new();
    let mut last = None;
    for i in rows {
        kept.push(i);
        match RowSpace::new(&a.select_rows(&kept)) {
            Ok(rs) => last = Some(rs),
            Err(_) => {
                kept.pop();
            }
        }
    }
    kept.sort_unstable();
    // refactor in sorted order so multipliers line up with `kept`
    let _ = last?;
    let rs = RowSpace::new(&a.select_rows(&kept)).ok()?;
    Some((kept, rs))
}
