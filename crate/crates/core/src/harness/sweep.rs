//! Seeded experiment sweeps over a grid of p and the versioned result CSV.
//!
//! Row `(p_index, trial)` draws its dataset from
//! `mix_seed(base_seed, [p_index, trial])`, so adding a p value never moves
//! the seeds of the other rows and every row can be recomputed on its own.

use std::io::{Read, Write};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::config::SweepConfig;
use crate::datagen::{generate, Dataset, ProblemSpec, Task};
use crate::error::{Error, Result};
use crate::metrics::{
    bias_variance, directional_error, estimation_error, zero_one_from_directional,
};
use crate::par::map_indexed;
use crate::rng::mix_seed;
use crate::solvers::{
    solve_max_l1_margin_approx, solve_max_lp_margin, solve_min_lp_norm, Solution, SolverOptions,
};

pub const SCHEMA_LINE: &str = "# schema=v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowType {
    Trial,
    Summary,
}

/// One CSV line. Trial rows fill the per-fit columns, summary rows the
/// aggregate ones; the rest stay empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub row_type: RowType,
    pub task: Task,
    pub p: f64,
    pub trial: Option<usize>,
    pub seed: Option<u64>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub kkt_residual: Option<f64>,
    pub feasibility_residual: Option<f64>,
    pub norm_p: Option<f64>,
    /// Estimation error for regression, directional error for classification.
    /// Mean over converged trials on summary rows.
    pub risk: Option<f64>,
    pub zero_one: Option<f64>,
    pub risk_stderr: Option<f64>,
    pub bias_sq: Option<f64>,
    pub variance: Option<f64>,
    pub count: Option<usize>,
    pub error: Option<String>,
}

impl SweepRecord {
    fn empty(row_type: RowType, task: Task, p: f64) -> Self {
        Self {
            row_type,
            task,
            p,
            trial: None,
            seed: None,
            converged: None,
            iterations: None,
            kkt_residual: None,
            feasibility_residual: None,
            norm_p: None,
            risk: None,
            zero_one: None,
            risk_stderr: None,
            bias_sq: None,
            variance: None,
            count: None,
            error: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub task: Task,
    /// `|p_grid| * trials` rows ordered by `(p_index, trial)`.
    pub rows: Vec<SweepRecord>,
    /// One row per p, in grid order.
    pub summary: Vec<SweepRecord>,
}

impl SweepResult {
    pub fn records(&self) -> impl Iterator<Item = &SweepRecord> {
        self.rows.iter().chain(self.summary.iter())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_records(self.records(), out)
    }

    /// `(p, mean risk, stderr)` for every p with at least one converged trial.
    pub fn risk_curve(&self) -> Vec<(f64, f64, f64)> {
        self.summary
            .iter()
            .filter_map(|r| Some((r.p, r.risk?, r.risk_stderr?)))
            .collect()
    }
}

pub fn row_seed(base_seed: u64, p_index: usize, trial: usize) -> u64 {
    mix_seed(base_seed, &[p_index as u64, trial as u64])
}

/// Fits the estimator the task calls for at exponent `p`.
pub fn fit(ds: &Dataset, task: Task, p: f64, opts: &SolverOptions) -> Result<Solution> {
    match task {
        Task::Regression => {
            if ds.d() < ds.n() {
                return crate::error::config(format!(
                    "interpolation needs d >= n (got n={}, d={})",
                    ds.n(),
                    ds.d()
                ));
            }
            solve_min_lp_norm(&ds.x, &ds.y, p, opts)
        }
        Task::Classification if p == 1.0 => solve_max_l1_margin_approx(&ds.x, &ds.y, opts),
        Task::Classification => solve_max_lp_margin(&ds.x, &ds.y, p, opts),
    }
}

struct TrialOutcome {
    record: SweepRecord,
    /// Solution used for bias-variance (normalized for classification).
    w: Option<DVector<f64>>,
}

fn run_trial(cfg: &SweepConfig, p_index: usize, trial: usize) -> TrialOutcome {
    let p = cfg.p_grid[p_index];
    let seed = row_seed(cfg.base_seed, p_index, trial);
    let mut record = SweepRecord::empty(RowType::Trial, cfg.task, p);
    record.trial = Some(trial);
    record.seed = Some(seed);
    record.converged = Some(false);
    match trial_metrics(cfg, p, seed) {
        Ok((sol, risk, zero_one, w)) => {
            record.converged = Some(sol.converged);
            record.iterations = Some(sol.iterations);
            record.kkt_residual = Some(sol.kkt_residual);
            record.feasibility_residual = Some(sol.feasibility_residual);
            record.norm_p = Some(sol.objective);
            record.risk = Some(risk);
            record.zero_one = zero_one;
            let w = sol.converged.then_some(w);
            TrialOutcome { record, w }
        }
        Err(e) => {
            log::warn!("p = {p}, trial {trial}: {e}");
            record.error = Some(e.to_string());
            TrialOutcome { record, w: None }
        }
    }
}

fn trial_metrics(
    cfg: &SweepConfig,
    p: f64,
    seed: u64,
) -> Result<(Solution, f64, Option<f64>, DVector<f64>)> {
    let spec = ProblemSpec {
        n: cfg.n,
        d: cfg.d,
        p,
        noise: cfg.noise,
        task: cfg.task,
        seed,
    }
    .validated()?;
    let ds = generate(&spec)?;
    let truth = ds.truth().expect("synthetic dataset carries its truth");
    let sol = fit(&ds, cfg.task, p, &cfg.solver)?;
    match cfg.task {
        Task::Regression => {
            let risk = estimation_error(&sol.w, truth)?;
            let w = sol.w.clone();
            Ok((sol, risk, None, w))
        }
        Task::Classification => {
            let risk = directional_error(&sol.w, truth)?;
            let w = sol.w.normalize();
            Ok((sol, risk, Some(zero_one_from_directional(risk)?), w))
        }
    }
}

fn summarize(cfg: &SweepConfig, p: f64, outcomes: &[TrialOutcome]) -> Result<SweepRecord> {
    let mut rec = SweepRecord::empty(RowType::Summary, cfg.task, p);
    let kept: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.w.is_some()).collect();
    rec.count = Some(kept.len());
    if kept.is_empty() {
        return Ok(rec);
    }
    let m = kept.len() as f64;
    let risks: Vec<f64> = kept.iter().map(|o| o.record.risk.unwrap()).collect();
    let mean = risks.iter().sum::<f64>() / m;
    rec.risk = Some(mean);
    rec.risk_stderr = Some(if kept.len() > 1 {
        (risks.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
    } else {
        0.0
    });
    if cfg.task == Task::Classification {
        rec.zero_one = Some(kept.iter().map(|o| o.record.zero_one.unwrap()).sum::<f64>() / m);
    }
    if kept.len() >= 2 {
        let ws: Vec<DVector<f64>> = kept.iter().map(|o| o.w.clone().unwrap()).collect();
        let (b, v) = bias_variance(&ws, &crate::datagen::GroundTruth::e1(cfg.d))?;
        rec.bias_sq = Some(b);
        rec.variance = Some(v);
    }
    Ok(rec)
}

/// Runs every `(p, trial)` pair. Failed or unconverged fits are kept as rows
/// with `converged = false` and left out of the summaries.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    let cfg = cfg.clone().validated()?;
    let t = cfg.trials;
    let outcomes = map_indexed(cfg.p_grid.len() * t, |k| run_trial(&cfg, k / t, k % t));
    let mut summary = Vec::with_capacity(cfg.p_grid.len());
    for (i, &p) in cfg.p_grid.iter().enumerate() {
        summary.push(summarize(&cfg, p, &outcomes[i * t..(i + 1) * t])?);
    }
    Ok(SweepResult {
        task: cfg.task,
        rows: outcomes.into_iter().map(|o| o.record).collect(),
        summary,
    })
}

pub fn write_records<'a, W: Write>(
    records: impl Iterator<Item = &'a SweepRecord>,
    out: W,
) -> Result<()> {
    super::write_table(records, out)
}

/// Checks the schema comment and returns the CSV body that follows it.
pub(crate) fn strip_schema_line(text: &str, what: &str) -> Result<String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l.trim() == SCHEMA_LINE => Ok(lines.collect::<Vec<_>>().join("\n")),
        _ => Err(Error::Schema(format!(
            "{what} CSV must start with '{SCHEMA_LINE}'"
        ))),
    }
}

pub fn read_records<R: Read>(mut input: R) -> Result<Vec<SweepRecord>> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let body = strip_schema_line(&text, "sweep")?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let expected = csv::StringRecord::from(SWEEP_COLUMNS.to_vec());
    if r.headers()? != &expected {
        return Err(Error::Schema(
            "sweep CSV header does not match schema v1".into(),
        ));
    }
    r.deserialize()
        .map(|rec| rec.map_err(|e| Error::Schema(format!("sweep CSV: {e}"))))
        .collect()
}

pub const SWEEP_COLUMNS: [&str; 17] = [
    "row_type",
    "task",
    "p",
    "trial",
    "seed",
    "converged",
    "iterations",
    "kkt_residual",
    "feasibility_residual",
    "norm_p",
    "risk",
    "zero_one",
    "risk_stderr",
    "bias_sq",
    "variance",
    "count",
    "error",
];
