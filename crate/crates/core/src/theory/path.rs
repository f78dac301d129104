use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{domain, Result};
use crate::rng::{stream, Purpose};

/// Standard normal survival function `P(Z > t)`.
pub fn normal_sf(t: f64) -> f64 {
    0.5 * erfc(t / std::f64::consts::SQRT_2)
}

/// The `t >= 0` solving `2 P(Z > t) = s / d`, by bisection.
pub fn t_s_solve(s: usize, d: usize) -> Result<f64> {
    if s == 0 || s > d {
        return domain(format!("need 1 <= s <= d, got s = {s}, d = {d}"));
    }
    if s == d {
        return Ok(0.0);
    }
    let target = s as f64 / d as f64;
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if 2.0 * normal_sf(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Minimum-l2-norm path `gamma(alpha) = argmin ||g||_2^2` subject to
/// `<g, h> >= ||h||_inf`, `g >= 0`, `sum(g) = alpha`, for `h` sorted in
/// strictly decreasing order.
///
/// On `[alpha_s, alpha_{s+1}]` the support is the top `s` coordinates and
/// `g_i = a h_i + c` there, with `(a, c)` fixed by the two equality
/// constraints. The breakpoints are
/// `alpha_s = (S1_s - s h_s) h_1 / (S2_s - S1_s h_s)` with prefix sums
/// `S1_s`, `S2_s` of `h` and `h^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct L1Path {
    pub h: DVector<f64>,
    /// `(s, alpha_s)` for `s = 2..=d`.
    pub breakpoints: Vec<(usize, f64)>,
    pub t_table: BTreeMap<usize, f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl L1Path {
    pub fn new(h_sorted: DVector<f64>) -> Result<Self> {
        let d = h_sorted.len();
        if d < 2 {
            return domain("the path needs d >= 2");
        }
        if h_sorted[d - 1] <= 0.0 || (1..d).any(|i| !(h_sorted[i] < h_sorted[i - 1])) {
            return domain("h must be positive and strictly decreasing");
        }
        // s1[k] = sum of the top k entries
        let mut s1 = vec![0.0; d + 1];
        let mut s2 = vec![0.0; d + 1];
        for k in 0..d {
            s1[k + 1] = s1[k] + h_sorted[k];
            s2[k + 1] = s2[k] + h_sorted[k] * h_sorted[k];
        }
        let hinf = h_sorted[0];
        let breakpoints = (2..=d)
            .map(|s| {
                let hs = h_sorted[s - 1];
                (s, (s1[s] - s as f64 * hs) * hinf / (s2[s] - s1[s] * hs))
            })
            .collect();
        Ok(Self {
            h: h_sorted,
            breakpoints,
            t_table: BTreeMap::new(),
            s1,
            s2,
        })
    }

    pub fn d(&self) -> usize {
        self.h.len()
    }

    pub fn h_inf(&self) -> f64 {
        self.h[0]
    }

    /// `d ||h||_inf / ||h||_1`, the uniform end of the path.
    pub fn alpha_max(&self) -> f64 {
        self.d() as f64 * self.h_inf() / self.s1[self.d()]
    }

    pub fn alpha(&self, s: usize) -> f64 {
        self.breakpoints[s - 2].1
    }

    /// Fills `t_table` for the given sparsity levels.
    pub fn tabulate_t(&mut self, s_list: &[usize]) -> Result<()> {
        for &s in s_list {
            self.t_table.insert(s, t_s_solve(s, self.d())?);
        }
        Ok(())
    }

    pub fn gamma(&self, alpha: f64) -> Result<DVector<f64>> {
        let (lo, hi) = (1.0, self.alpha_max());
        if !(alpha >= lo * (1.0 - 1e-12) && alpha <= hi * (1.0 + 1e-12)) {
            return domain(format!("alpha = {alpha} outside [1, {hi}]"));
        }
        let d = self.d();
        // largest s with alpha_s <= alpha; breakpoints are nondecreasing
        let idx = self.breakpoints.partition_point(|&(_, a)| a <= alpha);
        let s = if idx == 0 {
            2
        } else {
            self.breakpoints[idx - 1].0
        };
        let (sf, t1, t2) = (s as f64, self.s1[s], self.s2[s]);
        // a t2 + c t1 = h_inf,  a t1 + c s = alpha
        let det = t2 * sf - t1 * t1;
        let a = (self.h_inf() * sf - t1 * alpha) / det;
        let c = (t2 * alpha - t1 * self.h_inf()) / det;
        let mut g = DVector::zeros(d);
        for i in 0..s {
            g[i] = (a * self.h[i] + c).max(0.0);
        }
        Ok(g)
    }

    /// `gamma(alpha_s)` in the closed form `a (h_i - h_s)` on the top `s`.
    pub fn gamma_at_breakpoint(&self, s: usize) -> Result<DVector<f64>> {
        if s < 2 || s > self.d() {
            return domain(format!("breakpoint index {s} outside 2..={}", self.d()));
        }
        let hs = self.h[s - 1];
        let a = self.h_inf() / (self.s2[s] - self.s1[s] * hs);
        let mut g = DVector::zeros(self.d());
        for i in 0..s {
            g[i] = a * (self.h[i] - hs);
        }
        Ok(g)
    }
}

/// `gamma(alpha)` for a sorted `h`.
pub fn gamma_path(h_sorted: &DVector<f64>, alpha: f64) -> Result<DVector<f64>> {
    L1Path::new(h_sorted.clone())?.gamma(alpha)
}

/// Exhaustive reference for tiny `d`: on every support, try the minimizer
/// with both equalities active and the one with only the sum constraint,
/// keep the feasible ones and return the smallest norm.
pub fn gamma_qp_oracle(h: &DVector<f64>, alpha: f64) -> Result<DVector<f64>> {
    let d = h.len();
    if d == 0 || d > 16 {
        return domain("the exhaustive oracle handles 1 <= d <= 16");
    }
    let hinf = h.amax();
    let tol = 1e-12 * (1.0 + alpha);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 1u32..(1 << d) {
        let sup: Vec<usize> = (0..d).filter(|&i| mask & (1 << i) != 0).collect();
        let k = sup.len() as f64;
        let t1: f64 = sup.iter().map(|&i| h[i]).sum();
        let t2: f64 = sup.iter().map(|&i| h[i] * h[i]).sum();
        let mut cands = vec![(0.0, alpha / k)];
        let det = t2 * k - t1 * t1;
        if det.abs() > 1e-14 * t2 * k {
            cands.push((
                (hinf * k - t1 * alpha) / det,
                (t2 * alpha - t1 * hinf) / det,
            ));
        }
        for (a, c) in cands {
            let mut g = DVector::zeros(d);
            for &i in &sup {
                g[i] = a * h[i] + c;
            }
            if g.iter().any(|&v| v < -tol) || g.dot(h) < hinf - tol {
                continue;
            }
            let val = g.norm_squared();
            if best.as_ref().is_none_or(|(b, _)| val < *b) {
                best = Some((val, g));
            }
        }
    }
    best.map(|(_, g)| g.map(|v| v.max(0.0)))
        .ok_or_else(|| crate::error::Error::Domain(format!("alpha = {alpha} is infeasible")))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PathReportRow {
    pub s: usize,
    pub t_s: f64,
    pub alpha_s: f64,
    /// `||gamma(alpha_s)||_1 t_s / ||H||_inf`
    pub ratio1: f64,
    /// `||gamma(alpha_s)||_2^2 s t_s^2 / (2 ||H||_inf^2)`
    pub ratio2: f64,
    pub l1_residual: f64,
    pub inner_residual: f64,
}

/// Draws `H` with i.i.d. `|N(0,1)|` entries, sorts it, and reports the
/// normalized l1 and l2 sizes of `gamma(alpha_s)` for each `s`.
pub fn path_concentration_report(
    d: usize,
    s_list: &[usize],
    seed: u64,
) -> Result<Vec<PathReportRow>> {
    if s_list.iter().any(|&s| s < 2 || s >= d) {
        return domain("each s must satisfy 2 <= s < d (t_s vanishes at s = d)");
    }
    let mut rng = stream(seed, Purpose::Auxiliary);
    let mut h: Vec<f64> = (0..d)
        .map(|_| rng.sample::<f64, _>(StandardNormal).abs())
        .collect();
    h.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut path = L1Path::new(DVector::from_vec(h))?;
    path.tabulate_t(s_list)?;
    let hinf = path.h_inf();
    s_list
        .iter()
        .map(|&s| {
            let t = path.t_table[&s];
            let alpha = path.alpha(s);
            let g = path.gamma_at_breakpoint(s)?;
            let l1 = g.sum();
            Ok(PathReportRow {
                s,
                t_s: t,
                alpha_s: alpha,
                ratio1: l1 * t / hinf,
                ratio2: g.norm_squared() / (hinf * hinf) * s as f64 * t * t / 2.0,
                l1_residual: (l1 - alpha).abs(),
                inner_residual: (g.dot(&path.h) - hinf).abs(),
            })
        })
        .collect()
}
