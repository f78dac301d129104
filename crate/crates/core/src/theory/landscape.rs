use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::moments::lambda_q;
use crate::datagen::{conjugate, sample_label_sign, NoiseModel};
use crate::error::{config, domain, Error, Result};
use crate::linalg::signed_pow;
use crate::par::map_indexed;
use crate::rng::{mix_seed, stream, Purpose};

/// Search interval for the population minimizer; a minimizer outside it is
/// treated as a violation of the positivity assumption on the noise.
pub const NU_RANGE: (f64, f64) = (1e-3, 50.0);
const CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PopulationRiskProfile {
    pub noise: NoiseModel,
    pub nu_bar: f64,
    pub nu_bar_stderr: f64,
    pub f_star: f64,
    pub zeta_nn: f64,
    pub zeta_ee: f64,
    pub kappa_noise: f64,
    pub mc_samples: usize,
    /// Standard error of `f_star`.
    pub mc_stderr: f64,
}

/// `f_n(nu, eta) = mean_i (1 - xi_i |z_i| nu - eta g_i)_+^2` and its minimizer
/// along `eta = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalLandscape {
    pub abs_z: DVector<f64>,
    pub xi: DVector<f64>,
    pub g: DVector<f64>,
    pub nu_bar_n: f64,
    pub f_star_n: f64,
    pub zeta_nn_n: f64,
    pub zeta_ee_n: f64,
}

impl EmpiricalLandscape {
    pub fn n(&self) -> usize {
        self.abs_z.len()
    }

    pub fn f_n(&self, nu: f64, eta: f64) -> f64 {
        let s: f64 = (0..self.n())
            .map(|i| {
                (1.0 - self.xi[i] * self.abs_z[i] * nu - eta * self.g[i])
                    .max(0.0)
                    .powi(2)
            })
            .sum();
        s / self.n() as f64
    }

    /// `2 f* / (zeta_ee nu_bar^2)`.
    pub fn kappa(&self) -> f64 {
        2.0 * self.f_star_n / (self.zeta_ee_n * self.nu_bar_n * self.nu_bar_n)
    }
}

/// Exact minimizer of `nu -> sum_i (1 - a_i nu)_+^2`.
///
/// The function is convex and piecewise quadratic with kinks at `1 / a_i`.
/// After flipping signs so that the minimizer is nonnegative, terms with
/// `a_i > 0` switch off in order of decreasing `a_i`; on each piece the
/// stationary point is `S1 / S2` over the active terms.
fn argmin_piecewise(a: &[f64]) -> Result<f64> {
    let total: f64 = a.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let sign = total.signum();
    let mut pos: Vec<f64> = a.iter().map(|v| v * sign).filter(|&v| v > 0.0).collect();
    let (neg1, neg2) = a
        .iter()
        .map(|v| v * sign)
        .filter(|&v| v < 0.0)
        .fold((0.0, 0.0), |acc, v| (acc.0 + v, acc.1 + v * v));
    if neg2 == 0.0 {
        return Err(Error::Unbounded(
            "all products xi_i |z_i| share one sign; f_n reaches 0 only along a ray".into(),
        ));
    }
    pos.sort_unstable_by(|x, y| y.total_cmp(x));
    // suffix sums: terms k.. are still active past the k-th kink
    let m = pos.len();
    let mut suf1 = vec![0.0; m + 1];
    let mut suf2 = vec![0.0; m + 1];
    for k in (0..m).rev() {
        suf1[k] = suf1[k + 1] + pos[k];
        suf2[k] = suf2[k + 1] + pos[k] * pos[k];
    }
    let mut left = 0.0;
    for k in 0..m {
        let right = 1.0 / pos[k];
        let (s1, s2) = (neg1 + suf1[k], neg2 + suf2[k]);
        let nu = s1 / s2;
        if nu <= right {
            return Ok(sign * nu.max(left));
        }
        left = right;
    }
    Ok(sign * left)
}

fn active(a: f64, nu: f64) -> bool {
    1.0 - a * nu > 0.0
}

pub fn empirical_landscape(
    abs_z: &DVector<f64>,
    xi: &DVector<f64>,
    g: &DVector<f64>,
) -> Result<EmpiricalLandscape> {
    let n = abs_z.len();
    if xi.len() != n || g.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: if xi.len() != n { xi.len() } else { g.len() },
        });
    }
    if n < 2 {
        return config("the landscape needs at least two samples");
    }
    if abs_z.iter().any(|&v| !(v >= 0.0)) || xi.iter().any(|&v| v != 1.0 && v != -1.0) {
        return domain("abs_z must be nonnegative and xi must be +-1");
    }
    let a: Vec<f64> = (0..n).map(|i| xi[i] * abs_z[i]).collect();
    let nu = argmin_piecewise(&a)?;
    let nf = n as f64;
    let (mut f, mut znn, mut zee) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let r = 1.0 - a[i] * nu;
        if r > 0.0 {
            f += r * r;
            znn += abs_z[i] * abs_z[i];
            zee += 1.0;
        }
    }
    Ok(EmpiricalLandscape {
        abs_z: abs_z.clone(),
        xi: xi.clone(),
        g: g.clone(),
        nu_bar_n: nu,
        f_star_n: f / nf,
        zeta_nn_n: 2.0 * znn / nf,
        zeta_ee_n: 2.0 * zee / nf,
    })
}

/// Draws `(|Z_1|, xi, Z_2)` triples for `n` samples under `noise`.
pub fn sample_landscape(noise: &NoiseModel, n: usize, seed: u64) -> Result<EmpiricalLandscape> {
    let noise = noise.validated()?;
    if !noise.is_classification() {
        return config("the landscape needs a label-noise model");
    }
    let mut rng = stream(seed, Purpose::Auxiliary);
    let mut abs_z = DVector::zeros(n);
    let mut xi = DVector::zeros(n);
    let mut g = DVector::zeros(n);
    for i in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        abs_z[i] = z.abs();
        xi[i] = sample_label_sign(&noise, z.abs(), &mut rng)?;
        g[i] = rng.sample(StandardNormal);
    }
    empirical_landscape(&abs_z, &xi, &g)
}

/// Population quantities by Monte Carlo: `nu_bar` minimizes the sample
/// average of `(1 - xi nu |Z|)_+^2` over one common set of draws (so the
/// whole curve shares its random numbers), then `f*`, `zeta*_nn`, `zeta*_ee`
/// are the indicator averages at `nu_bar`.
pub fn population_profile(
    noise: &NoiseModel,
    mc_samples: usize,
    seed: u64,
) -> Result<PopulationRiskProfile> {
    let noise = noise.validated()?;
    if !noise.is_classification() {
        return config("population profile needs a label-noise model");
    }
    if mc_samples < 2 {
        return config("population profile needs at least two samples");
    }
    let chunks = mc_samples.div_ceil(CHUNK);
    let parts = map_indexed(chunks, |c| -> Result<Vec<(f64, f64)>> {
        let mut rng = stream(mix_seed(seed, &[c as u64]), Purpose::MonteCarlo);
        let count = CHUNK.min(mc_samples - c * CHUNK);
        (0..count)
            .map(|_| {
                let z: f64 = rng.sample::<f64, _>(StandardNormal).abs();
                Ok((sample_label_sign(&noise, z, &mut rng)? * z, z))
            })
            .collect()
    });
    let mut draws = Vec::with_capacity(mc_samples);
    for p in parts {
        draws.extend(p?);
    }
    let a: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let nu = match argmin_piecewise(&a) {
        Ok(v) => v,
        Err(Error::Unbounded(m)) => return Err(Error::AssumptionViolation(m)),
        Err(e) => return Err(e),
    };
    if !(NU_RANGE.0..=NU_RANGE.1).contains(&nu) {
        return Err(Error::AssumptionViolation(format!(
            "population minimizer {nu:.4e} outside [{}, {}]",
            NU_RANGE.0, NU_RANGE.1
        )));
    }
    let m = mc_samples as f64;
    let (mut f1, mut f2, mut h2, mut znn, mut zee) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(ai, z) in &draws {
        let r = (1.0 - ai * nu).max(0.0);
        f1 += r * r;
        f2 += r.powi(4);
        // derivative of the summand in nu; its mean vanishes at nu_bar
        let h = -2.0 * ai * r;
        h2 += h * h;
        if active(ai, nu) {
            znn += z * z;
            zee += 1.0;
        }
    }
    let f_star = f1 / m;
    let f_var = ((f2 - m * f_star * f_star) / (m - 1.0)).max(0.0);
    let zeta_nn = 2.0 * znn / m;
    let zeta_ee = 2.0 * zee / m;
    Ok(PopulationRiskProfile {
        noise,
        nu_bar: nu,
        nu_bar_stderr: (h2 / m).sqrt() / (m.sqrt() * zeta_nn),
        f_star,
        zeta_nn,
        zeta_ee,
        kappa_noise: 2.0 * f_star / (zeta_ee * nu * nu),
        mc_samples,
        mc_stderr: (f_var / m).sqrt(),
    })
}

/// Largest `c` with `f_n(nu, eta) >= c (nu^2 + eta^2)` on the grid, i.e. the
/// minimum of `f_n / (nu^2 + eta^2)`. The origin is skipped. Both returned
/// constants are this single `c`; the bound holds when it is positive.
pub fn quadratic_lower_bound_check(
    land: &EmpiricalLandscape,
    grid: &[(f64, f64)],
) -> Result<(f64, f64, bool)> {
    let theta = grid
        .iter()
        .filter(|(nu, eta)| *nu != 0.0 || *eta != 0.0)
        .map(|&(nu, eta)| land.f_n(nu, eta) / (nu * nu + eta * eta))
        .fold(f64::INFINITY, f64::min);
    if theta.is_infinite() {
        return domain("grid has no point other than the origin");
    }
    Ok((theta, theta, theta > 0.0))
}

/// Where `lambda_q = E ||H||_q` comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaSource {
    MonteCarlo {
        samples: usize,
        seed: u64,
    },
    /// `sqrt(q) d^(1/q)`, correct only up to constants.
    Proxy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LocalizationPredictors {
    /// Regression: `-sigma^2 (lambda_q^2 / (n sigma^2))^(p/2)`.
    pub nu0: f64,
    pub lambda_q: f64,
    pub lambda_is_proxy: bool,
    pub n: usize,
    pub p: f64,
}

impl LocalizationPredictors {
    /// Classification: `-2 nu_bar^(p-1) f* lambda_q^p / (zeta_nn (n f*)^(p/2))`
    /// from the empirical landscape.
    pub fn delta_nu0(&self, land: &EmpiricalLandscape) -> f64 {
        let n = self.n as f64;
        let p = self.p;
        -2.0 * signed_pow(land.nu_bar_n, p - 1.0) * land.f_star_n * self.lambda_q.powf(p)
            / (land.zeta_nn_n * (n * land.f_star_n).powf(p / 2.0))
    }
}

pub fn localization_predictors(
    sigma_xi: f64,
    n: usize,
    d: usize,
    p: f64,
    source: LambdaSource,
) -> Result<LocalizationPredictors> {
    if !(p > 1.0 && p <= 2.0) {
        return domain(format!("p = {p} must lie in (1, 2]"));
    }
    if n == 0 || d == 0 || !(sigma_xi >= 0.0) {
        return config("n, d must be positive and sigma nonnegative");
    }
    let q = conjugate(p);
    let (lam, proxy) = match source {
        LambdaSource::MonteCarlo { samples, seed } => {
            (lambda_q(d, q, samples, seed)?.estimate, false)
        }
        LambdaSource::Proxy => (q.sqrt() * (d as f64).powf(1.0 / q), true),
    };
    // written as -sigma^(2-p) lambda^p n^(-p/2) so that sigma = 0 is allowed
    let nu0 = -sigma_xi.powf(2.0 - p) * lam.powf(p) * (n as f64).powf(-p / 2.0);
    Ok(LocalizationPredictors {
        nu0,
        lambda_q: lam,
        lambda_is_proxy: proxy,
        n,
        p,
    })
}
