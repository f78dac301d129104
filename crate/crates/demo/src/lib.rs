//! WebAssembly bindings for the static page in `www/`.
//!
//! Each exported function has a plain-Rust twin returning `Result<_, String>`
//! so the logic can be tested natively; the wrappers only convert errors.

use lpinterp::datagen::{generate, NoiseModel, ProblemSpec, Task};
use lpinterp::harness::{fit, run_sweep, SweepConfig};
use lpinterp::metrics::{directional_error, estimation_error};
use lpinterp::solvers::SolverOptions;
use lpinterp::theory::{
    koehler_exponent, rate_exponent_classification, rate_exponent_regression, RateQuery,
};
use wasm_bindgen::prelude::*;

fn task_of(name: &str) -> Result<Task, String> {
    name.parse()
        .map_err(|e: lpinterp::error::Error| e.to_string())
}

/// Exponent `alpha` at each `beta`: the upper bound for `task`, followed (for
/// regression) by the uniform-convergence exponent, as one flat array of
/// length `betas.len()` or `2 * betas.len()`.
pub fn rate_curves_impl(task: &str, p: f64, betas: &[f64]) -> Result<Vec<f64>, String> {
    let task = task_of(task)?;
    let mut main = Vec::with_capacity(betas.len());
    let mut koehler = Vec::new();
    for &b in betas {
        let q = RateQuery::new(b, p, task).map_err(|e| e.to_string())?;
        let a = match task {
            Task::Regression => {
                koehler.push(koehler_exponent(&q).map_err(|e| e.to_string())?);
                rate_exponent_regression(&q)
            }
            Task::Classification => rate_exponent_classification(&q),
        };
        main.push(a.map_err(|e| e.to_string())?);
    }
    main.extend(koehler);
    Ok(main)
}

/// One synthetic draw and one fit. Returns
/// `[risk, objective, kkt_residual, converged, w_0, ..., w_{d-1}]`, where risk
/// is the estimation error (regression) or directional error (classification).
pub fn fit_once_impl(
    task: &str,
    n: usize,
    d: usize,
    p: f64,
    sigma: f64,
    seed: u64,
) -> Result<Vec<f64>, String> {
    let task = task_of(task)?;
    let noise = match task {
        Task::Regression => NoiseModel::gaussian(sigma),
        Task::Classification => NoiseModel::random_flips(sigma),
    }
    .map_err(|e| e.to_string())?;
    let spec = ProblemSpec {
        n,
        d,
        p,
        noise,
        task,
        seed,
    }
    .validated()
    .map_err(|e| e.to_string())?;
    let ds = generate(&spec).map_err(|e| e.to_string())?;
    let sol = fit(&ds, task, p, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let truth = ds.truth().expect("synthetic data");
    let risk = match task {
        Task::Regression => estimation_error(&sol.w, truth),
        Task::Classification => directional_error(&sol.w, truth),
    }
    .map_err(|e| e.to_string())?;
    let mut out = vec![
        risk,
        sol.objective,
        sol.kkt_residual,
        if sol.converged { 1.0 } else { 0.0 },
    ];
    out.extend(sol.w.iter());
    Ok(out)
}

/// Small sweep over `ps`. Returns `[p, mean, stderr, bias^2, variance]` per p,
/// flattened; NaN marks a missing value.
pub fn risk_vs_p_impl(
    task: &str,
    n: usize,
    d: usize,
    sigma: f64,
    trials: usize,
    seed: u64,
    ps: &[f64],
) -> Result<Vec<f64>, String> {
    let task = task_of(task)?;
    let noise = match task {
        Task::Regression => NoiseModel::gaussian(sigma),
        Task::Classification => NoiseModel::random_flips(sigma),
    }
    .map_err(|e| e.to_string())?;
    let cfg = SweepConfig {
        task,
        p_grid: ps.to_vec(),
        n,
        d,
        noise,
        trials,
        base_seed: seed,
        solver: SolverOptions::default(),
        output_path: None,
    };
    let res = run_sweep(&cfg).map_err(|e| e.to_string())?;
    let nan = f64::NAN;
    Ok(res
        .summary
        .iter()
        .flat_map(|s| {
            [
                s.p,
                s.risk.unwrap_or(nan),
                s.risk_stderr.unwrap_or(nan),
                s.bias_sq.unwrap_or(nan),
                s.variance.unwrap_or(nan),
            ]
        })
        .collect())
}

#[wasm_bindgen]
pub fn rate_curves(task: &str, p: f64, betas: &[f64]) -> Result<Vec<f64>, JsError> {
    rate_curves_impl(task, p, betas).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn fit_once(
    task: &str,
    n: usize,
    d: usize,
    p: f64,
    sigma: f64,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    fit_once_impl(task, n, d, p, sigma, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn risk_vs_p(
    task: &str,
    n: usize,
    d: usize,
    sigma: f64,
    trials: usize,
    seed: u32,
    ps: &[f64],
) -> Result<Vec<f64>, JsError> {
    risk_vs_p_impl(task, n, d, sigma, trials, seed as u64, ps).map_err(|e| JsError::new(&e))
}
