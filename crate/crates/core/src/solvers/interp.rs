use nalgebra::{DMatrix, DVector};

use super::kkt::{basis_pursuit_residual, interpolation_residual};
use super::{check_shapes, Solution, SolverOptions};
use crate::datagen::conjugate;
use crate::error::{config, Result};
use crate::linalg::{lp_power, signed_pow, solve_psd, weighted_gram, RowSpace};

/// Newton iterations are quadratically convergent; this bounds a stalled run.
pub(crate) const MAX_NEWTON: usize = 500;

/// Minimum-lp-norm solution of `X w = y`.
///
/// `p = 1` runs ADMM basis pursuit followed by a support polish; `1 < p <= 2`
/// runs damped Newton on the smooth dual in the orthonormalized row basis.
pub fn solve_min_lp_norm(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    p: f64,
    opts: &SolverOptions,
) -> Result<Solution> {
    let opts = opts.validated()?;
    check_shapes(x.nrows(), y.len())?;
    if !(1.0..=2.0).contains(&p) {
        return config(format!("p = {p} must lie in [1, 2]"));
    }
    let rs = RowSpace::new(x)?;
    if p == 1.0 {
        return basis_pursuit_admm(x, y, &rs, &opts);
    }
    let q = conjugate(p);
    let b = rs.transformed_rhs(y);
    let lambda0 = optimal_scaling(b.clone(), &(rs.q() * &b), &b, q);
    let out = equality_dual_newton(
        rs.qt(),
        rs.q(),
        &b,
        q,
        lambda0,
        MAX_NEWTON.min(opts.max_iters),
        |w| interpolation_feasibility(x, y, w) <= 0.1 * opts.tol_feas,
    );
    let kkt = interpolation_residual(&rs, &out.w, p);
    let feas = interpolation_feasibility(x, y, &out.w);
    Ok(Solution::finish(out.w, p, kkt, feas, out.iterations, &opts))
}

/// `||X w - y||_inf / max(1, ||y||_inf)`.
pub(crate) fn interpolation_feasibility(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DVector<f64>,
) -> f64 {
    (x * w - y).amax() / y.amax().max(1.0)
}

/// `w = sign(v) |v|^(q-1)`, the gradient of `||v||_q^q / q`.
pub(crate) fn primal_from_dual(v: &DVector<f64>, q: f64) -> DVector<f64> {
    if q == 2.0 {
        return v.clone();
    }
    v.map(|t| signed_pow(t, q - 1.0))
}

/// Rescales `lambda` to the maximizer of `t -> t <lambda, b> - t^q ||v||_q^q / q`
/// along its ray, where `v = A^T lambda`.
pub(crate) fn optimal_scaling(
    lambda: DVector<f64>,
    v: &DVector<f64>,
    b: &DVector<f64>,
    q: f64,
) -> DVector<f64> {
    let lin = lambda.dot(b);
    let m = v.amax();
    if !(lin > 0.0) || !(m > 0.0) {
        return lambda;
    }
    // ||v||_q^q = m^q * s with s computed on the normalized vector
    let s: f64 = v.iter().map(|t| (t.abs() / m).powf(q)).sum();
    // t^(q-1) = lin / (m^q s)
    let log_t = (lin.ln() - q * m.ln() - s.ln()) / (q - 1.0);
    lambda * log_t.exp()
}

pub(crate) struct DualOutcome {
    pub lambda: DVector<f64>,
    pub w: DVector<f64>,
    pub iterations: usize,
}

fn dual_value(v: &DVector<f64>, lambda: &DVector<f64>, b: &DVector<f64>, q: f64) -> f64 {
    let val = lp_power(v, q) / q - lambda.dot(b);
    if val.is_finite() {
        val
    } else {
        f64::INFINITY
    }
}

/// Damped Newton on `psi(lambda) = ||A^T lambda||_q^q / q - <lambda, b>`, whose
/// stationary points give `A w = b` for `w = sign(v)|v|^(q-1)`.
///
/// `a` is `n x d`, `at` its transpose. Stops when `done(w)` holds, when the
/// line search stalls at roundoff, or after `max_iter` steps.
pub(crate) fn equality_dual_newton(
    a: &DMatrix<f64>,
    at: &DMatrix<f64>,
    b: &DVector<f64>,
    q: f64,
    lambda0: DVector<f64>,
    max_iter: usize,
    mut done: impl FnMut(&DVector<f64>) -> bool,
) -> DualOutcome {
    let mut lambda = lambda0;
    let mut v = at * &lambda;
    let mut w = primal_from_dual(&v, q);
    let mut psi = dual_value(&v, &lambda, b, q);
    let mut iterations = 0;
    while iterations < max_iter && !done(&w) {
        iterations += 1;
        let grad = a * &w - b;
        let h = v.map(|t| (q - 1.0) * t.abs().powf(q - 2.0));
        let hess = weighted_gram(a, at, &h);
        let Some(step) = solve_psd(&hess, &(-&grad)) else {
            break;
        };
        let slope = grad.dot(&step);
        if !(slope < 0.0) {
            break;
        }
        let gnorm = grad.norm();
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-14 {
            let cand = &lambda + t * &step;
            let cv = at * &cand;
            let cpsi = dual_value(&cv, &cand, b, q);
            let armijo = cpsi <= psi + 1e-4 * t * slope;
            // Near the optimum psi changes below roundoff; fall back to the
            // gradient norm, which Newton still reduces.
            let flat = (cpsi - psi).abs() <= 1e-13 * (1.0 + psi.abs());
            let cw = primal_from_dual(&cv, q);
            let improved = flat && (a * &cw - b).norm() < (1.0 - 1e-4 * t) * gnorm;
            if armijo || improved {
                lambda = cand;
                v = cv;
                w = cw;
                psi = cpsi;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    DualOutcome {
        lambda,
        w,
        iterations,
    }
}

fn soft_threshold(v: f64, k: f64) -> f64 {
    if v > k {
        v - k
    } else if v < -k {
        v + k
    } else {
        0.0
    }
}

/// ADMM for `min ||w||_1 s.t. X w = y` with the split `w = z`: affine
/// projection for `w`, soft-thresholding for `z`. The scaled multiplier
/// `rho * u` is a subgradient of `||z||_1` and is returned to certify optimality.
fn basis_pursuit_admm(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    rs: &RowSpace,
    opts: &SolverOptions,
) -> Result<Solution> {
    let b = rs.transformed_rhs(y);
    let project = |v: &DVector<f64>| v - rs.q() * (rs.qt() * v - &b);
    let rho = opts.admm_rho;
    let d = x.ncols();
    let mut w = rs.q() * &b;
    let mut z = w.clone();
    let mut u = DVector::zeros(d);
    let mut iterations = 0;
    let mut eps = opts.tol_kkt;
    loop {
        let mut admm_converged = false;
        while iterations < opts.max_iters {
            iterations += 1;
            w = project(&(&z - &u));
            let z_old = std::mem::replace(&mut z, (&w + &u).map(|t| soft_threshold(t, 1.0 / rho)));
            u += &w - &z;
            let primal = (&w - &z).norm();
            let dual = rho * (&z - &z_old).norm();
            if primal <= eps && dual <= eps {
                admm_converged = true;
                break;
            }
        }
        let cand = polish_support(x, y, &z, &w, opts).unwrap_or_else(|| w.clone());
        let kkt = basis_pursuit_residual(rs, &cand, &(rho * &u));
        let feas = interpolation_feasibility(x, y, &cand);
        // the certificate lags the ADMM residuals; tighten until it passes
        if admm_converged && kkt > opts.tol_kkt && eps > 1e-15 && iterations < opts.max_iters {
            eps *= 0.1;
            continue;
        }
        let mut sol = Solution::finish(cand, 1.0, kkt, feas, iterations, opts);
        sol.converged &= admm_converged;
        return Ok(sol);
    }
}

/// Least-squares re-solve on the support of `z`; removes the O(tol) ADMM
/// error once the support is identified.
fn polish_support(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    w: &DVector<f64>,
    opts: &SolverOptions,
) -> Option<DVector<f64>> {
    let d = x.ncols();
    let support: Vec<usize> = (0..d).filter(|&j| z[j] != 0.0).collect();
    if support.is_empty() || support.len() > x.nrows() {
        return None;
    }
    let ws = x
        .select_columns(&support)
        .svd(true, true)
        .solve(y, 1e-14)
        .ok()?;
    let mut cand = DVector::zeros(d);
    for (k, &j) in support.iter().enumerate() {
        cand[j] = ws[k];
    }
    let ok = interpolation_feasibility(x, y, &cand) <= opts.tol_feas
        && cand.lp_norm(1) <= w.lp_norm(1) * (1.0 + 1e-9);
    ok.then_some(cand)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn solve(x: &[f64], n: usize, y: &[f64], p: f64) -> Solution {
        let d = x.len() / n;
        let x = DMatrix::from_row_slice(n, d, x);
        let y = DVector::from_row_slice(y);
        solve_min_lp_norm(&x, &y, p, &SolverOptions::default()).unwrap()
    }

    #[test]
    fn square_system_returns_unique_solution() {
        for p in [1.0, 1.3, 1.5, 2.0] {
            let s = solve(&[1.0, 0.0, 0.0, 1.0], 2, &[3.0, 4.0], p);
            assert_relative_eq!(s.w, DVector::from_vec(vec![3.0, 4.0]), epsilon = 1e-10);
            assert!(s.converged, "p = {p}: {s:?}");
        }
    }

    #[test]
    fn symmetric_constraint_splits_evenly() {
        for p in [1.1, 1.5, 2.0] {
            let s = solve(&[1.0, 1.0], 1, &[1.0], p);
            assert_relative_eq!(s.w, DVector::from_vec(vec![0.5, 0.5]), epsilon = 1e-10);
            assert!(s.converged);
        }
    }

    #[test]
    fn weighted_constraint_closed_form() {
        // KKT at p = 1.5: sqrt(w1) = 2 sqrt(w2) with 2 w1 + w2 = 1 => (4/9, 1/9)
        let s = solve(&[2.0, 1.0], 1, &[1.0], 1.5);
        assert_relative_eq!(
            s.w,
            DVector::from_vec(vec![4.0 / 9.0, 1.0 / 9.0]),
            epsilon = 1e-10
        );
        assert!(s.kkt_residual <= 1e-8);
    }

    #[test]
    fn rank_deficient_design_is_rejected() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 0.0]);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        assert!(solve_min_lp_norm(&x, &y, 1.5, &SolverOptions::default()).is_err());
    }

    #[test]
    fn invalid_exponent_is_rejected() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let y = DVector::from_vec(vec![1.0]);
        assert!(solve_min_lp_norm(&x, &y, 2.5, &SolverOptions::default()).is_err());
        assert!(solve_min_lp_norm(&x, &y, 0.9, &SolverOptions::default()).is_err());
    }

    #[test]
    fn basis_pursuit_recovers_sparse_vector() {
        // 1-sparse signal, 3 x 6 design with distinct columns
        let x = DMatrix::from_row_slice(
            3,
            6,
            &[
                1.0, 0.2, -0.3, 0.5, 0.1, -0.4, //
                -0.5, 1.0, 0.4, 0.2, -0.3, 0.1, //
                0.3, -0.2, 1.0, -0.1, 0.6, 0.2,
            ],
        );
        let y = x.column(0).into_owned() * 2.0;
        let s = solve_min_lp_norm(&x, &y, 1.0, &SolverOptions::default()).unwrap();
        let mut truth = DVector::zeros(6);
        truth[0] = 2.0;
        assert_relative_eq!(s.w, truth, epsilon = 1e-10);
        assert!(s.converged, "{s:?}");
    }
}
