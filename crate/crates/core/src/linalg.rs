//! Dense helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Rank threshold relative to the largest absolute entry of the design.
pub const RANK_TOL: f64 = 1e-10;

/// Orthonormal basis of the row space of a full-row-rank `n x d` matrix,
/// from the thin QR factorization `X^T = Q R`.
#[derive(Clone, Debug)]
pub struct RowSpace {
    q: DMatrix<f64>,
    qt: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl RowSpace {
    /// Factorizes `x`. Fails with [`Error::Degenerate`] when `n > d` or the
    /// smallest singular value of `X` is below `RANK_TOL * max|X_ij|`.
    pub fn new(x: &DMatrix<f64>) -> Result<Self> {
        let (n, d) = x.shape();
        if n == 0 {
            return Err(Error::Degenerate("design has no rows".into()));
        }
        if n > d {
            return Err(Error::Degenerate(format!("{n} rows exceed dimension {d}")));
        }
        let scale = x.amax();
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Degenerate("design is zero or non-finite".into()));
        }
        let qr = x.transpose().qr();
        let r = qr.r();
        // singular values of R are those of X
        let smin = r.singular_values().min();
        if smin <= RANK_TOL * scale {
            return Err(Error::Degenerate(format!(
                "smallest singular value {smin:.3e} below threshold {:.3e}",
                RANK_TOL * scale
            )));
        }
        let q = qr.q();
        let qt = q.transpose();
        Ok(Self { q, qt, r })
    }

    /// `d x n` orthonormal basis.
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn qt(&self) -> &DMatrix<f64> {
        &self.qt
    }

    /// `n x n` upper triangular factor.
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Orthogonal projection onto the row space.
    pub fn project(&self, g: &DVector<f64>) -> DVector<f64> {
        &self.q * (&self.qt * g)
    }

    /// `R^{-T} y`: the constraint `X w = y` is equivalent to `Q^T w = R^{-T} y`.
    pub fn transformed_rhs(&self, y: &DVector<f64>) -> DVector<f64> {
        self.r
            .tr_solve_upper_triangular(y)
            .expect("R is nonsingular after the rank check")
    }

    /// Minimum-l2-norm solution of `X w = y`.
    pub fn min_norm_solution(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.q * self.transformed_rhs(y)
    }

    /// Maps multipliers `lambda` for `X` to multipliers for `Q^T` (`mu = R lambda`).
    pub fn to_q_multipliers(&self, lambda: &DVector<f64>) -> DVector<f64> {
        &self.r * lambda
    }

    /// Inverse of [`Self::to_q_multipliers`].
    pub fn from_q_multipliers(&self, mu: &DVector<f64>) -> DVector<f64> {
        self.r
            .solve_upper_triangular(mu)
            .expect("R is nonsingular after the rank check")
    }
}

/// Solves a symmetric positive (semi)definite system. Falls back to an SVD
/// pseudo-inverse when Cholesky fails.
pub fn solve_psd(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        let x = ch.solve(rhs);
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    let eps = 1e-14 * h.amax().max(f64::MIN_POSITIVE);
    h.clone()
        .svd(true, true)
        .solve(rhs, eps)
        .ok()
        .filter(|x| x.iter().all(|v| v.is_finite()))
}

/// `sign(v) |v|^e`, with `0 -> 0`.
#[inline]
pub fn signed_pow(v: f64, e: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum() * v.abs().powf(e)
    }
}

/// `(sum |w_j|^p)^(1/p)`; `max |w_j|` for infinite `p`.
pub fn lp_norm(w: &DVector<f64>, p: f64) -> f64 {
    if p.is_infinite() {
        return w.amax();
    }
    if p == 2.0 {
        return w.norm();
    }
    if p == 1.0 {
        return w.lp_norm(1);
    }
    // rescale to avoid overflow for large p
    let m = w.amax();
    if m == 0.0 {
        return 0.0;
    }
    m * w
        .iter()
        .map(|v| (v.abs() / m).powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

/// `sum |w_j|^p`.
pub fn lp_power(w: &DVector<f64>, p: f64) -> f64 {
    w.iter().map(|v| v.abs().powf(p)).sum()
}

/// `diag(s) M` for a row scaling `s`.
pub fn scale_rows(m: &DMatrix<f64>, s: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (i, &si) in s.iter().enumerate() {
        out.row_mut(i).scale_mut(si);
    }
    out
}

/// `A diag(h) A^T` for `A` given together with its transpose.
pub fn weighted_gram(a: &DMatrix<f64>, at: &DMatrix<f64>, h: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = a.clone();
    for (j, &hj) in h.iter().enumerate() {
        scaled.column_mut(j).scale_mut(hj);
    }
    scaled * at
}
