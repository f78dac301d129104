//! Repeated train/test evaluation of the max-lp-margin classifier on a fixed
//! labelled dataset, with optional label flips on the training part only.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use serde::Serialize;

use super::config::check_p_grid;
use super::sweep::fit;
use crate::datagen::{Dataset, Task};
use crate::error::{config, Error, Result};
use crate::par::map_indexed;
use crate::rng::{mix_seed, stream, Purpose};
use crate::solvers::SolverOptions;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub split_seed: u64,
    pub train_frac: f64,
    pub p_grid: Vec<f64>,
    /// Fraction of training labels flipped; `floor(flip_frac * n_train)` of
    /// them, chosen without replacement.
    pub flip_frac: f64,
    pub splits: usize,
    pub solver: SolverOptions,
}

impl EvalConfig {
    pub fn validated(self) -> Result<Self> {
        check_p_grid(&self.p_grid)?;
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return config(format!(
                "train_frac = {} must lie in (0, 1)",
                self.train_frac
            ));
        }
        if !(0.0..0.5).contains(&self.flip_frac) {
            return config(format!(
                "flip_frac = {} must lie in [0, 0.5)",
                self.flip_frac
            ));
        }
        if self.splits == 0 {
            return config("splits must be at least 1");
        }
        self.solver.validated()?;
        Ok(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalRecord {
    pub row_type: &'static str,
    pub p: f64,
    pub split: Option<usize>,
    pub n_train: Option<usize>,
    pub flipped: Option<usize>,
    /// Non-separable or failed training splits are flagged and carry no error.
    pub flagged: Option<bool>,
    pub test_error: Option<f64>,
    pub stderr: Option<f64>,
    pub count: Option<usize>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalTable {
    /// Ordered by `(split, p_index)`.
    pub rows: Vec<EvalRecord>,
    /// One row per p; flagged splits are excluded.
    pub summary: Vec<EvalRecord>,
}

impl EvalTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        super::write_table(self.rows.iter().chain(&self.summary), out)
    }
}

struct Split {
    train: Vec<usize>,
    test: Vec<usize>,
    y_train: DVector<f64>,
    flipped: usize,
}

fn make_split(ds: &Dataset, cfg: &EvalConfig, s: usize) -> Split {
    let n = ds.n();
    let seed = mix_seed(cfg.split_seed, &[s as u64]);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream(seed, Purpose::Split));
    let n_train = ((cfg.train_frac * n as f64).round() as usize).clamp(1, n - 1);
    let test = perm.split_off(n_train);
    let train = perm;
    let mut y_train = DVector::from_iterator(n_train, train.iter().map(|&i| ds.y[i]));
    let flipped = (cfg.flip_frac * n_train as f64).floor() as usize;
    for i in index::sample(&mut stream(seed, Purpose::Flip), n_train, flipped) {
        y_train[i] = -y_train[i];
    }
    Split {
        train,
        test,
        y_train,
        flipped,
    }
}

fn rows_of(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)])
}

/// Fraction of test points with `y <x, w> <= 0`.
pub fn test_error(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let margins = x * w;
    let wrong = margins
        .iter()
        .zip(y.iter())
        .filter(|(m, y)| *m * *y <= 0.0)
        .count();
    wrong as f64 / y.len() as f64
}

pub fn train_test_eval(ds: &Dataset, cfg: &EvalConfig) -> Result<EvalTable> {
    let cfg = cfg.clone().validated()?;
    if !ds.has_sign_labels() {
        return config("evaluation needs labels in {-1, +1}");
    }
    if ds.n() < 2 {
        return config("evaluation needs at least two samples");
    }
    let np = cfg.p_grid.len();
    let rows = map_indexed(cfg.splits * np, |k| {
        let (s, pi) = (k / np, k % np);
        let p = cfg.p_grid[pi];
        let sp = make_split(ds, &cfg, s);
        let mut rec = EvalRecord {
            row_type: "split",
            p,
            split: Some(s),
            n_train: Some(sp.train.len()),
            flipped: Some(sp.flipped),
            flagged: Some(false),
            test_error: None,
            stderr: None,
            count: None,
            note: None,
        };
        let train = Dataset {
            x: rows_of(&ds.x, &sp.train),
            y: sp.y_train,
            origin: ds.origin.clone(),
        };
        match fit(&train, Task::Classification, p, &cfg.solver) {
            Ok(sol) => {
                let y_test =
                    DVector::from_iterator(sp.test.len(), sp.test.iter().map(|&i| ds.y[i]));
                rec.test_error = Some(test_error(&rows_of(&ds.x, &sp.test), &y_test, &sol.w));
                if !sol.converged {
                    rec.note = Some("not converged".into());
                }
            }
            Err(e) => {
                rec.flagged = Some(true);
                rec.note = Some(match e {
                    Error::NotSeparable(_) => "not separable".into(),
                    other => other.to_string(),
                });
            }
        }
        rec
    });
    let summary = cfg
        .p_grid
        .iter()
        .map(|&p| {
            let errs: Vec<f64> = rows
                .iter()
                .filter(|r| r.p == p && r.flagged == Some(false))
                .filter_map(|r| r.test_error)
                .collect();
            let m = errs.len() as f64;
            let mean = (m > 0.0).then(|| errs.iter().sum::<f64>() / m);
            let stderr = mean.map(|mu| {
                if errs.len() > 1 {
                    (errs.iter().map(|e| (e - mu).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
                } else {
                    0.0
                }
            });
            EvalRecord {
                row_type: "summary",
                p,
                split: None,
                n_train: None,
                flipped: None,
                flagged: None,
                test_error: mean,
                stderr,
                count: Some(errs.len()),
                note: None,
            }
        })
        .collect();
    Ok(EvalTable { rows, summary })
}
