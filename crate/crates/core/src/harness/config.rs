//! TOML configuration. Every section is optional and every key inside a
//! section is optional; command-line flags override file values.
//!
//! ```toml
//! [sweep]
//! task = "regression"        # or "classification"
//! n = 100
//! d = 5000
//! trials = 50
//! base_seed = 1
//! p_grid = [1.05, 1.1, 1.2, 1.3, 1.5, 1.75, 2.0]
//! output = "results/regression.csv"
//!
//! [noise]
//! kind = "gaussian"          # gaussian | flips | logistic | prequant
//! sigma = 1.0
//!
//! [solver]
//! tol_kkt = 1e-8
//! tol_feas = 1e-10
//!
//! [eval]
//! label_column = "label"
//! splits = 100
//! train_frac = 0.9
//! flip_frac = 0.0
//! split_seed = 0
//! p_grid = [1.1, 1.5, 2.0]
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::datagen::{NoiseModel, Task};
use crate::error::{config, Error, Result};
use crate::solvers::SolverOptions;

pub const DEFAULT_P_GRID: [f64; 7] = [1.05, 1.1, 1.2, 1.3, 1.5, 1.75, 2.0];
/// Flip rate used for classification sweeps when none is given.
pub const DEFAULT_FLIP_RATE: f64 = 0.15;

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub task: Option<Task>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub trials: Option<usize>,
    pub base_seed: Option<u64>,
    pub p_grid: Option<Vec<f64>>,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: Option<String>,
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol_kkt: Option<f64>,
    pub tol_feas: Option<f64>,
    pub max_iters: Option<usize>,
    pub barrier_mu0: Option<f64>,
    pub barrier_shrink: Option<f64>,
    pub admm_rho: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub label_column: Option<String>,
    pub splits: Option<usize>,
    pub train_frac: Option<f64>,
    pub flip_frac: Option<f64>,
    pub split_seed: Option<u64>,
    pub p_grid: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub sweep: SweepSection,
    pub noise: NoiseSection,
    pub solver: SolverSection,
    pub eval: EvalSection,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),+) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )+
    };
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Values set in `top` replace those in `self`.
    pub fn overlay(mut self, top: &ConfigFile) -> Self {
        overlay!(self.sweep, top.sweep, task, n, d, trials, base_seed, p_grid, output);
        overlay!(self.noise, top.noise, kind, sigma);
        overlay!(
            self.solver,
            top.solver,
            tol_kkt,
            tol_feas,
            max_iters,
            barrier_mu0,
            barrier_shrink,
            admm_rho
        );
        overlay!(
            self.eval,
            top.eval,
            label_column,
            splits,
            train_frac,
            flip_frac,
            split_seed,
            p_grid
        );
        self
    }

    pub fn solver_options(&self) -> Result<SolverOptions> {
        let mut o = SolverOptions::default();
        let s = &self.solver;
        if let Some(v) = s.tol_kkt {
            o.tol_kkt = v;
        }
        if let Some(v) = s.tol_feas {
            o.tol_feas = v;
        }
        if let Some(v) = s.max_iters {
            o.max_iters = v;
        }
        if let Some(v) = s.barrier_mu0 {
            o.barrier_mu0 = v;
        }
        if let Some(v) = s.barrier_shrink {
            o.barrier_shrink = v;
        }
        if let Some(v) = s.admm_rho {
            o.admm_rho = v;
        }
        o.validated()
    }

    /// Noise model for `task`; defaults to `N(0, 1)` for regression and
    /// 15% random flips for classification.
    pub fn noise_model(&self, task: Task) -> Result<NoiseModel> {
        let (kind, sigma) = match task {
            Task::Regression => ("gaussian", 1.0),
            Task::Classification => ("flips", DEFAULT_FLIP_RATE),
        };
        let kind = self.noise.kind.as_deref().unwrap_or(kind);
        NoiseModel::from_name(kind, self.noise.sigma.unwrap_or(sigma))
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        let s = &self.sweep;
        let task = s.task.unwrap_or(Task::Regression);
        SweepConfig {
            task,
            p_grid: s.p_grid.clone().unwrap_or_else(|| DEFAULT_P_GRID.to_vec()),
            n: s.n.unwrap_or(100),
            d: s.d.unwrap_or(5000),
            noise: self.noise_model(task)?,
            trials: s.trials.unwrap_or(50),
            base_seed: s.base_seed.unwrap_or(0),
            solver: self.solver_options()?,
            output_path: s.output.clone(),
        }
        .validated()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub task: Task,
    pub p_grid: Vec<f64>,
    pub n: usize,
    pub d: usize,
    pub noise: NoiseModel,
    pub trials: usize,
    pub base_seed: u64,
    pub solver: SolverOptions,
    pub output_path: Option<PathBuf>,
}

pub(crate) fn check_p_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return config("p_grid must not be empty");
    }
    if let Some(p) = grid.iter().find(|p| !(1.0..=2.0).contains(*p)) {
        return config(format!("p_grid value {p} outside [1, 2]"));
    }
    Ok(())
}

impl SweepConfig {
    pub fn validated(self) -> Result<Self> {
        if self.trials == 0 {
            return config("trials must be at least 1");
        }
        check_p_grid(&self.p_grid)?;
        if self.n == 0 || self.d < self.n {
            return config(format!(
                "need 1 <= n <= d, got n = {}, d = {}",
                self.n, self.d
            ));
        }
        if self.task == Task::Classification
            && self.noise.sigma() >= 0.5
            && self.noise.name() == "flips"
        {
            return config("flip rate must be below 0.5");
        }
        match (self.task, self.noise.is_classification()) {
            (Task::Regression, false) | (Task::Classification, true) => {}
            _ => {
                return config(format!(
                    "noise '{}' does not fit task {}",
                    self.noise.name(),
                    self.task
                ))
            }
        }
        self.solver.validated()?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let text = r#"
            [sweep]
            task = "classification"
            n = 20
            d = 50
            trials = 3
            p_grid = [1.1, 2.0]
            [noise]
            kind = "flips"
            sigma = 0.2
            [solver]
            tol_kkt = 1e-7
        "#;
        let cfg = ConfigFile::parse(text).unwrap().sweep_config().unwrap();
        assert_eq!(cfg.task, Task::Classification);
        assert_eq!(cfg.noise, NoiseModel::random_flips(0.2).unwrap());
        assert_eq!(cfg.solver.tol_kkt, 1e-7);
        assert_eq!(cfg.p_grid, vec![1.1, 2.0]);
    }

    #[test]
    fn defaults_follow_task() {
        let cfg = ConfigFile::default().sweep_config().unwrap();
        assert_eq!((cfg.n, cfg.d, cfg.trials), (100, 5000, 50));
        assert_eq!(cfg.noise, NoiseModel::gaussian(1.0).unwrap());
        let mut f = ConfigFile::default();
        f.sweep.task = Some(Task::Classification);
        assert_eq!(
            f.sweep_config().unwrap().noise,
            NoiseModel::random_flips(0.15).unwrap()
        );
    }

    #[test]
    fn overlay_prefers_top() {
        let base = ConfigFile::parse("[sweep]\nn = 10\nd = 40\n[noise]\nsigma = 0.5").unwrap();
        let mut top = ConfigFile::default();
        top.sweep.n = Some(20);
        let merged = base.overlay(&top);
        assert_eq!(merged.sweep.n, Some(20));
        assert_eq!(merged.sweep.d, Some(40));
        assert_eq!(merged.noise.sigma, Some(0.5));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(ConfigFile::parse("[sweep]\nunknown = 1").is_err());
        assert!(ConfigFile::parse("[sweep]\ntrials = 0")
            .unwrap()
            .sweep_config()
            .is_err());
        assert!(ConfigFile::parse("[sweep]\np_grid = []")
            .unwrap()
            .sweep_config()
            .is_err());
        assert!(ConfigFile::parse("[sweep]\np_grid = [2.5]")
            .unwrap()
            .sweep_config()
            .is_err());
        assert!(ConfigFile::parse("[sweep]\nn = 10\nd = 5")
            .unwrap()
            .sweep_config()
            .is_err());
        assert!(ConfigFile::parse("[noise]\nkind = \"flips\"")
            .unwrap()
            .sweep_config()
            .is_err());
    }
}
