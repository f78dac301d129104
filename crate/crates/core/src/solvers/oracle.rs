//! Slow reference solvers for tiny instances. They share no code path with
//! the dual methods and exist only to cross-check them.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::kkt::{kkt_residual_interpolation, margin_residual};
use super::margin::margin_feasibility;
use super::{check_labels, check_shapes, Solution, SolverOptions};
use crate::error::{config, Error, Result};
use crate::linalg::{lp_norm, scale_rows, signed_pow, solve_psd};
use crate::rng::{stream, Purpose};

pub const ORACLE_MIN_BUDGET: usize = 1_000_000;
pub const ORACLE_MAX_ROWS: usize = 8;
pub const ORACLE_MAX_DIM: usize = 12;
const RESTARTS: usize = 10;
const ORACLE_SEED: u64 = 0x6f72_6163_6c65;

fn check_tiny(x: &DMatrix<f64>, budget: usize) -> Result<()> {
    if budget < ORACLE_MIN_BUDGET {
        return config(format!(
            "oracle budget {budget} below the minimum {ORACLE_MIN_BUDGET}"
        ));
    }
    if x.nrows() > ORACLE_MAX_ROWS || x.ncols() > ORACLE_MAX_DIM {
        return config(format!(
            "oracle handles at most {ORACLE_MAX_ROWS} x {ORACLE_MAX_DIM}, got {} x {}",
            x.nrows(),
            x.ncols()
        ));
    }
    Ok(())
}

/// Normalized subgradient descent on `z -> ||w2 + N z||_p`, where `w2 = X^+ y`
/// and the columns of `N` span the null space of `X`. Steps decay
/// geometrically; ten restarts share the budget and the best point wins.
///
/// For `p = 1` no multiplier is available, so `kkt_residual` is NaN.
pub fn oracle_min_lp_norm(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    p: f64,
    budget: usize,
) -> Result<Solution> {
    check_shapes(x.nrows(), y.len())?;
    check_tiny(x, budget)?;
    if !(1.0..=2.0).contains(&p) {
        return config(format!("p = {p} must lie in [1, 2]"));
    }
    let d = x.ncols();
    let pinv = x
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::Degenerate(e.to_string()))?;
    let w2 = &pinv * y;
    // I - X^+ X has eigenvalue 1 on the null space and 0 on the row space
    let eig = (DMatrix::identity(d, d) - &pinv * x).symmetric_eigen();
    let null: Vec<usize> = (0..d).filter(|&j| eig.eigenvalues[j] > 0.5).collect();
    let n_mat = eig.eigenvectors.select_columns(&null);
    let k = null.len();

    let w2v: Vec<f64> = w2.iter().copied().collect();
    // row-major copy for a tight inner loop
    let nm: Vec<f64> = (0..d)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| n_mat[(i, j)])
        .collect();
    let scale = w2.norm().max(f64::MIN_POSITIVE);
    let objective = |z: &[f64], w: &mut [f64]| -> f64 {
        for i in 0..d {
            w[i] = w2v[i] + (0..k).map(|j| nm[i * k + j] * z[j]).sum::<f64>();
        }
        w.iter().map(|v| v.abs().powf(p)).sum::<f64>()
    };

    let mut rng = stream(ORACLE_SEED, Purpose::Restart);
    let per_restart = budget / RESTARTS;
    let ratio = (1e-12f64 / 0.5).powf(1.0 / per_restart as f64);
    let mut best_z = vec![0.0; k];
    let mut w = vec![0.0; d];
    let mut best_f = objective(&best_z, &mut w);
    let mut g = vec![0.0; k];
    let mut sgrad = vec![0.0; d];
    for restart in 0..RESTARTS {
        if k == 0 {
            break;
        }
        let mut z: Vec<f64> = if restart == 0 {
            vec![0.0; k]
        } else {
            (0..k)
                .map(|_| {
                    scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                        / (k as f64).sqrt()
                })
                .collect()
        };
        let mut step = 0.5 * scale;
        for it in 0..per_restart {
            if it % 64 == 0 {
                let f = objective(&z, &mut w);
                if f < best_f {
                    best_f = f;
                    best_z.copy_from_slice(&z);
                }
            } else {
                for i in 0..d {
                    w[i] = w2v[i] + (0..k).map(|j| nm[i * k + j] * z[j]).sum::<f64>();
                }
            }
            for v in sgrad.iter_mut().zip(&w) {
                *v.0 = signed_pow(*v.1, p - 1.0);
            }
            for j in 0..k {
                g[j] = (0..d).map(|i| nm[i * k + j] * sgrad[i]).sum();
            }
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gn == 0.0 {
                break;
            }
            for j in 0..k {
                z[j] -= step * g[j] / gn;
            }
            step *= ratio;
        }
        let f = objective(&z, &mut w);
        if f < best_f {
            best_f = f;
            best_z.copy_from_slice(&z);
        }
    }
    objective(&best_z, &mut w);
    let w = DVector::from_vec(w);
    let feas = (x * &w - y).amax() / y.amax().max(1.0);
    let kkt = if p > 1.0 {
        kkt_residual_interpolation(x, &w, p)
    } else {
        f64::NAN
    };
    Ok(Solution::finish(
        w,
        p,
        kkt,
        feas,
        budget,
        &SolverOptions::default(),
    ))
}

fn penalty_value(w: &DVector<f64>, a: &DMatrix<f64>, p: f64, c: f64) -> f64 {
    let viol: f64 = (a * w).iter().map(|m| (1.0 - m).max(0.0).powi(2)).sum();
    w.iter().map(|v| v.abs().powf(p)).sum::<f64>() / p + 0.5 * c * viol
}

/// Exterior quadratic penalty `||w||_p^p / p + c/2 sum (1 - y_i <x_i, w>)_+^2`
/// with `c` doubling from 1 to `2^30`, Newton inner steps, and a final
/// rescaling that puts the smallest margin at exactly 1.
pub fn oracle_max_lp_margin(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    p: f64,
    budget: usize,
) -> Result<Solution> {
    check_shapes(x.nrows(), y.len())?;
    check_labels(y)?;
    check_tiny(x, budget)?;
    if !(p > 1.0 && p <= 2.0) {
        return config(format!("p = {p} must lie in (1, 2]"));
    }
    let a = scale_rows(x, y);
    let d = a.ncols();
    let ones = DVector::from_element(a.nrows(), 1.0);
    let mut w = a
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::Degenerate(e.to_string()))?
        * &ones;
    let tiny = 1e-12;
    let mut used = 0;
    let mut c = 1.0;
    while c <= 2f64.powi(30) {
        for _ in 0..200 {
            if used >= budget {
                break;
            }
            used += 1;
            let slack = &ones - &a * &w;
            let mut grad = w.map(|v| signed_pow(v, p - 1.0));
            let mut hess =
                DMatrix::from_diagonal(&w.map(|v| (p - 1.0) * v.abs().max(tiny).powf(p - 2.0)));
            for i in 0..a.nrows() {
                if slack[i] > 0.0 {
                    let row = a.row(i).transpose();
                    grad -= c * slack[i] * &row;
                    hess += c * &row * row.transpose();
                }
            }
            let Some(step) = solve_psd(&hess, &(-&grad)) else {
                break;
            };
            let slope = grad.dot(&step);
            if !(slope < -1e-30) {
                break;
            }
            let f0 = penalty_value(&w, &a, p, c);
            let mut t = 1.0;
            let mut moved = false;
            while t > 1e-16 {
                let cand = &w + t * &step;
                if penalty_value(&cand, &a, p, c) <= f0 + 1e-4 * t * slope {
                    moved = (t * step.amax()) > 1e-16 * w.amax();
                    w = cand;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        c *= 2.0;
    }
    let m = (&a * &w).min();
    if !(m > 0.0) || d == 0 {
        return Err(Error::NotSeparable(
            "penalty solution misclassifies a sample".into(),
        ));
    }
    w /= m;
    let kkt = margin_residual(&a, &w, p);
    let feas = margin_feasibility(&a, &w);
    let mut sol = Solution::finish(w, p, kkt, feas, used, &SolverOptions::default());
    sol.objective = lp_norm(&sol.w, p);
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn small_budget_is_refused() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let y = DVector::from_vec(vec![1.0]);
        assert!(oracle_min_lp_norm(&x, &y, 1.5, 10).is_err());
        assert!(oracle_max_lp_margin(&x, &y, 1.5, 10).is_err());
    }

    #[test]
    fn interpolation_oracle_examples() {
        let x = DMatrix::from_row_slice(1, 2, &[2.0, 1.0]);
        let y = DVector::from_vec(vec![1.0]);
        let s = oracle_min_lp_norm(&x, &y, 1.5, ORACLE_MIN_BUDGET).unwrap();
        assert_relative_eq!(
            s.w,
            DVector::from_vec(vec![4.0 / 9.0, 1.0 / 9.0]),
            epsilon = 1e-5
        );
        let s2 = oracle_min_lp_norm(&x, &y, 2.0, ORACLE_MIN_BUDGET).unwrap();
        assert_relative_eq!(s2.w, DVector::from_vec(vec![0.4, 0.2]), epsilon = 1e-6);
        let id = DMatrix::identity(2, 2);
        let s3 = oracle_min_lp_norm(
            &id,
            &DVector::from_vec(vec![3.0, 4.0]),
            1.3,
            ORACLE_MIN_BUDGET,
        )
        .unwrap();
        assert_relative_eq!(s3.w, DVector::from_vec(vec![3.0, 4.0]), epsilon = 1e-10);
    }

    #[test]
    fn margin_oracle_examples() {
        let x = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let y = DVector::from_vec(vec![1.0]);
        let s = oracle_max_lp_margin(&x, &y, 1.5, ORACLE_MIN_BUDGET).unwrap();
        assert_relative_eq!(s.objective, 1.0, epsilon = 1e-8);
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, -1.0, -1.0]);
        let y = DVector::from_vec(vec![1.0, -1.0]);
        let s = oracle_max_lp_margin(&x, &y, 2.0, ORACLE_MIN_BUDGET).unwrap();
        assert_relative_eq!(s.w, DVector::from_vec(vec![0.5, 0.5]), epsilon = 1e-8);
    }
}
