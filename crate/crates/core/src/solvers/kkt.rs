//! Optimality certificates, computed from the primal point alone (plus the
//! ADMM multiplier at `p = 1`).

use nalgebra::{DMatrix, DVector};

use crate::linalg::{scale_rows, signed_pow, RowSpace};

/// Rows with margin at most `1 + ACTIVE_TOL` count as active.
pub const ACTIVE_TOL: f64 = 1e-6;

/// Gradient of `||w||_p^p`: `p sign(w) |w|^(p-1)`.
pub fn lp_gradient(w: &DVector<f64>, p: f64) -> DVector<f64> {
    w.map(|v| p * signed_pow(v, p - 1.0))
}

/// Orthogonal projector onto the row space of `x`, falling back to the SVD
/// when `x` is rank deficient or has more rows than columns.
fn row_projector(x: &DMatrix<f64>) -> Box<dyn Fn(&DVector<f64>) -> DVector<f64>> {
    if let Ok(rs) = RowSpace::new(x) {
        return Box::new(move |g| rs.project(g));
    }
    let svd = x.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let tol = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol)
        .collect();
    let basis = vt.select_rows(&keep);
    Box::new(move |g| basis.transpose() * (&basis * g))
}

/// `||(I - P_row) g||_2 / max(1, ||g||_2)` for `g = grad ||w||_p^p`, where
/// `P_row` projects onto the row space of `x`. Zero exactly at the
/// minimum-lp-norm interpolator (`1 < p <= 2`).
pub fn kkt_residual_interpolation(x: &DMatrix<f64>, w: &DVector<f64>, p: f64) -> f64 {
    let g = lp_gradient(w, p);
    let proj = row_projector(x);
    (&g - proj(&g)).norm() / g.norm().max(1.0)
}

pub(crate) fn interpolation_residual(rs: &RowSpace, w: &DVector<f64>, p: f64) -> f64 {
    let g = lp_gradient(w, p);
    (&g - rs.project(&g)).norm() / g.norm().max(1.0)
}

/// Subgradient certificate for basis pursuit. `nu` is any vector whose
/// row-space projection should be a subgradient of `||w||_1`; the residual is
/// the largest violation of `nu'_j = sign(w_j)` on the support and
/// `|nu'_j| <= 1` off it.
pub fn kkt_residual_basis_pursuit(x: &DMatrix<f64>, w: &DVector<f64>, nu: &DVector<f64>) -> f64 {
    let proj = row_projector(x);
    bp_violation(w, &proj(nu))
}

pub(crate) fn basis_pursuit_residual(rs: &RowSpace, w: &DVector<f64>, nu: &DVector<f64>) -> f64 {
    bp_violation(w, &rs.project(nu))
}

fn bp_violation(w: &DVector<f64>, nu: &DVector<f64>) -> f64 {
    let thresh = 1e-12 * w.amax();
    w.iter()
        .zip(nu.iter())
        .map(|(&wj, &vj)| {
            if wj.abs() > thresh {
                (vj - wj.signum()).abs()
            } else {
                (vj.abs() - 1.0).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Stationarity residual for `min ||w||_p s.t. y_i <x_i, w> >= 1`.
///
/// Fits `g = grad ||w||_p^p` by a least-squares combination of the active
/// rows of `A = diag(y) X`, clamps negative multipliers to zero and reports
/// `||g - A_S^T mu_+||_2 / max(1, ||g||_2)`.
pub fn kkt_residual_margin(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>, p: f64) -> f64 {
    margin_residual(&scale_rows(x, y), w, p)
}

pub(crate) fn margin_residual(a: &DMatrix<f64>, w: &DVector<f64>, p: f64) -> f64 {
    let g = lp_gradient(w, p);
    let scale = g.norm().max(1.0);
    let margins = a * w;
    let active: Vec<usize> = (0..a.nrows())
        .filter(|&i| margins[i] <= 1.0 + ACTIVE_TOL)
        .collect();
    if active.is_empty() {
        return g.norm() / scale;
    }
    let ast = a.select_rows(&active).transpose();
    let mu = match RowSpace::new(&ast.transpose()) {
        Ok(rs) => rs.from_q_multipliers(&(rs.qt() * &g)),
        Err(_) => match ast.clone().svd(true, true).solve(&g, 1e-12) {
            Ok(mu) => mu,
            Err(_) => return g.norm() / scale,
        },
    };
    let mu_plus = mu.map(|m| m.max(0.0));
    (&g - ast * mu_plus).norm() / scale
}
