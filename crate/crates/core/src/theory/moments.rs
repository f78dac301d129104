use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{config, domain, Result};
use crate::linalg::lp_norm;
use crate::par::map_indexed;
use crate::rng::{mix_seed, stream, Purpose};

/// Samples per substream. Fixed so results do not depend on the worker count.
const CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Mean and standard error of `stat(H)` over `samples` draws `H ~ N(0, I_d)`.
fn gaussian_mean<F>(d: usize, samples: usize, seed: u64, stat: F) -> McEstimate
where
    F: Fn(&DVector<f64>) -> f64 + Sync + Send,
{
    let chunks = samples.div_ceil(CHUNK);
    let partial = map_indexed(chunks, |c| {
        let mut rng = stream(mix_seed(seed, &[c as u64]), Purpose::MonteCarlo);
        let count = CHUNK.min(samples - c * CHUNK);
        let mut h = DVector::zeros(d);
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..count {
            for v in h.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let x = stat(&h);
            s1 += x;
            s2 += x * x;
        }
        (s1, s2)
    });
    let (s1, s2) = partial
        .iter()
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let m = samples as f64;
    let mean = s1 / m;
    let var = if samples > 1 {
        ((s2 - m * mean * mean) / (m - 1.0)).max(0.0)
    } else {
        0.0
    };
    McEstimate {
        estimate: mean,
        stderr: (var / m).sqrt(),
        samples,
    }
}

/// Monte-Carlo estimate of `E ||H||_q` for `H ~ N(0, I_d)`; of order
/// `sqrt(q) d^(1/q)` when `q <= log d`.
pub fn lambda_q(d: usize, q: f64, mc_samples: usize, seed: u64) -> Result<McEstimate> {
    if !(q >= 2.0) {
        return domain(format!("q = {q} must be at least 2"));
    }
    if d == 0 || mc_samples < 2 {
        return config("lambda_q needs d >= 1 and at least two samples");
    }
    Ok(gaussian_mean(d, mc_samples, seed, |h| lp_norm(h, q)))
}

/// Monte-Carlo estimate of `E (||H||_{2q/p} / ||H||_q)^{2q/p}`, the squared
/// l2 norm of the gradient of `||.||_q` at `H`.
pub fn mu_tilde(d: usize, q: f64, p: f64, mc_samples: usize, seed: u64) -> Result<McEstimate> {
    if (1.0 / p + 1.0 / q - 1.0).abs() > 1e-9 {
        return domain(format!("p = {p} and q = {q} are not conjugate"));
    }
    if d == 0 || mc_samples < 2 {
        return config("mu_tilde needs d >= 1 and at least two samples");
    }
    let r = 2.0 * q / p;
    Ok(gaussian_mean(d, mc_samples, seed, |h| {
        (lp_norm(h, r) / lp_norm(h, q)).powf(r)
    }))
}
