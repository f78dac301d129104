use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use lpinterp::datagen::{self, ProblemSpec, Task};
use lpinterp::error::Error;
use lpinterp::harness::{self, ConfigFile, EvalConfig, PlotKind};
use lpinterp::theory;

#[derive(Parser)]
#[command(
    name = "lpinterp",
    version,
    about = "Minimum-lp-norm interpolation and max-lp-margin experiments"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw a synthetic dataset
    Gen(GenArgs),
    /// Fit one estimator to a dataset CSV
    Fit(FitArgs),
    /// Run a seeded sweep over a p grid
    Sweep(SweepArgs),
    /// Closed-form rate exponents
    #[command(subcommand)]
    Theory(TheoryCmd),
    /// Auxiliary quantities of the classification analysis
    #[command(subcommand)]
    Cgmt(CgmtCmd),
    /// Standardize a labelled CSV into the dataset format
    Ingest(IngestArgs),
    /// Repeated train/test evaluation on a labelled CSV
    Eval(EvalArgs),
    /// Render a result CSV as SVG (plus .dat)
    Plot(PlotArgs),
}

/// Flags shared with the `[sweep]`, `[noise]` and `[solver]` config sections.
#[derive(Args, Clone, Default)]
struct Common {
    /// TOML config; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<Task>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    /// gaussian | flips | logistic | prequant
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol_kkt: Option<f64>,
    #[arg(long)]
    tol_feas: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

impl Common {
    fn resolve(&self) -> lpinterp::error::Result<ConfigFile> {
        let base = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let mut top = ConfigFile::default();
        top.sweep.task = self.task;
        top.sweep.n = self.n;
        top.sweep.d = self.d;
        top.sweep.base_seed = self.seed;
        top.noise.kind = self.noise.clone();
        top.noise.sigma = self.sigma;
        top.solver.tol_kkt = self.tol_kkt;
        top.solver.tol_feas = self.tol_feas;
        top.solver.max_iters = self.max_iters;
        Ok(base.overlay(&top))
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: Common,
    /// Exponent recorded with the dataset (generation does not depend on it)
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Dataset in the `x_0,...,x_{d-1},y` format
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    p: f64,
    /// Write the fitted weights here, one per line
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated list, e.g. 1.05,1.5,2
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TheoryCmd {
    /// Rate exponent table `task,beta,p,alpha,source`
    Rates {
        #[arg(long, default_value = "regression")]
        task: Task,
        /// `start:stop:step` or a comma-separated list
        #[arg(long, default_value = "1.05:4:0.05")]
        betas: String,
        #[arg(long, value_delimiter = ',', default_value = "1.01,1.1,1.3,1.5,2")]
        ps: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CgmtCmd {
    /// Empirical and population squared-hinge landscape
    Landscape {
        #[arg(long, default_value = "flips")]
        noise: String,
        #[arg(long, default_value_t = 0.3)]
        sigma: f64,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        mc_samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Concentration of the l1 path gamma(alpha_s)
    Path {
        #[arg(long, default_value_t = 100_000)]
        d: usize,
        #[arg(long, value_delimiter = ',', default_value = "50,100,200,400")]
        s: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Labelled CSV (raw or already ingested)
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    splits: Option<usize>,
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long)]
    flip_frac: Option<f64>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    input: PathBuf,
    /// rates | risk_vs_p | bias_variance
    #[arg(long)]
    kind: PlotKind,
    /// SVG path; the .dat file goes beside it
    #[arg(long)]
    out: PathBuf,
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            ))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse_range(s: &str) -> anyhow::Result<Vec<f64>> {
    let bad = || Error::Config(format!("cannot parse '{s}' as start:stop:step or a list"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts
            .iter()
            .map(|x| x.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        let (a, b, h) = (v[0], v[1], v[2]);
        if !(h > 0.0) || b < a {
            return Err(bad().into());
        }
        let k = ((b - a) / h + 1e-9).floor() as usize;
        return Ok((0..=k).map(|i| a + i as f64 * h).collect());
    }
    Ok(s.split(',')
        .map(|x| x.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?)
}

/// Marks errors that should exit with status 3.
#[derive(Debug)]
struct SolverFailure(String);

impl std::fmt::Display for SolverFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SolverFailure {}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Gen(a) => {
            let cfg = a.common.resolve()?;
            let task = cfg.sweep.task.unwrap_or(Task::Regression);
            let spec = ProblemSpec {
                n: cfg.sweep.n.unwrap_or(100),
                d: cfg.sweep.d.unwrap_or(5000),
                p: a.p,
                noise: cfg.noise_model(task)?,
                task,
                seed: cfg.sweep.base_seed.unwrap_or(0),
            }
            .validated()?;
            let ds = datagen::generate(&spec)?;
            datagen::write_csv(&ds, output(a.out.as_deref())?)?;
        }
        Cmd::Fit(a) => {
            let cfg = a.common.resolve()?;
            let opts = cfg.solver_options()?;
            let ds = datagen::read_csv(
                File::open(&a.data).with_context(|| format!("opening {}", a.data.display()))?,
            )?;
            let task = match cfg.sweep.task {
                Some(t) => t,
                None if ds.has_sign_labels() => Task::Classification,
                None => Task::Regression,
            };
            let sol = harness::fit(&ds, task, a.p, &opts).map_err(|e| match e {
                e @ (Error::Config(_) | Error::Dimension { .. }) => anyhow::Error::from(e),
                e => SolverFailure(e.to_string()).into(),
            })?;
            println!(
                "task={task} p={} objective={} kkt_residual={:e} feasibility_residual={:e} iterations={} converged={} approx_l1={}",
                sol.p, sol.objective, sol.kkt_residual, sol.feasibility_residual, sol.iterations, sol.converged, sol.approx_l1
            );
            if let Some(path) = a.out.as_deref() {
                let mut w = output(Some(path))?;
                for v in sol.w.iter() {
                    writeln!(w, "{v}")?;
                }
                w.flush()?;
            }
            if !sol.converged {
                return Err(
                    SolverFailure("solver did not reach the requested tolerances".into()).into(),
                );
            }
        }
        Cmd::Sweep(a) => {
            let mut cfg = a.common.resolve()?;
            if a.trials.is_some() {
                cfg.sweep.trials = a.trials;
            }
            if a.p_grid.is_some() {
                cfg.sweep.p_grid = a.p_grid;
            }
            if a.out.is_some() {
                cfg.sweep.output = a.out;
            }
            let sweep = cfg.sweep_config()?;
            let res = harness::run_sweep(&sweep)?;
            let mut w = output(sweep.output_path.as_deref())?;
            res.write_csv(&mut w)?;
            w.flush()?;
            for s in &res.summary {
                log::info!(
                    "p={} mean risk={:?} stderr={:?} count={:?}",
                    s.p,
                    s.risk,
                    s.risk_stderr,
                    s.count
                );
            }
        }
        Cmd::Theory(TheoryCmd::Rates {
            task,
            betas,
            ps,
            out,
        }) => {
            let rows = theory::rate_table(task, &parse_range(&betas)?, &ps)?;
            let mut w = output(out.as_deref())?;
            harness::write_rates_csv(&rows, &mut w)?;
            w.flush()?;
        }
        Cmd::Cgmt(CgmtCmd::Landscape {
            noise,
            sigma,
            n,
            seed,
            mc_samples,
            out,
        }) => {
            let model = datagen::NoiseModel::from_name(&noise, sigma)?;
            let pop = theory::population_profile(&model, mc_samples, seed)?;
            let land = theory::sample_landscape(&model, n, seed)?;
            let mut grid = Vec::new();
            for i in 0..=60 {
                for j in 0..=60 {
                    grid.push((-3.0 + 0.1 * i as f64, -3.0 + 0.1 * j as f64));
                }
            }
            let (theta, _, holds) = theory::quadratic_lower_bound_check(&land, &grid)?;
            let rows: Vec<(&str, f64, f64)> = vec![
                ("nu_bar", pop.nu_bar, pop.nu_bar_stderr),
                ("f_star", pop.f_star, pop.mc_stderr),
                ("zeta_nn", pop.zeta_nn, f64::NAN),
                ("zeta_ee", pop.zeta_ee, f64::NAN),
                ("kappa_noise", pop.kappa_noise, f64::NAN),
                ("nu_bar_n", land.nu_bar_n, f64::NAN),
                ("f_star_n", land.f_star_n, f64::NAN),
                ("zeta_nn_n", land.zeta_nn_n, f64::NAN),
                ("zeta_ee_n", land.zeta_ee_n, f64::NAN),
                ("kappa_n", land.kappa(), f64::NAN),
                ("quadratic_theta", theta, f64::NAN),
                (
                    "quadratic_bound_holds",
                    if holds { 1.0 } else { 0.0 },
                    f64::NAN,
                ),
            ];
            #[derive(serde::Serialize)]
            struct Row<'a> {
                quantity: &'a str,
                value: f64,
                stderr: f64,
            }
            let mut w = output(out.as_deref())?;
            harness::write_table(
                rows.iter().map(|&(quantity, value, stderr)| Row {
                    quantity,
                    value,
                    stderr,
                }),
                &mut w,
            )?;
            w.flush()?;
        }
        Cmd::Cgmt(CgmtCmd::Path { d, s, seed, out }) => {
            let rows = theory::path_concentration_report(d, &s, seed)?;
            let mut w = output(out.as_deref())?;
            harness::write_table(&rows, &mut w)?;
            w.flush()?;
        }
        Cmd::Ingest(a) => {
            let ds = harness::ingest_csv(&a.input, &a.label_column)?;
            datagen::write_csv(&ds, output(a.out.as_deref())?)?;
        }
        Cmd::Eval(a) => {
            let mut file = match &a.config {
                Some(p) => ConfigFile::load(p)?,
                None => ConfigFile::default(),
            };
            let e = &mut file.eval;
            macro_rules! take {
                ($($f:ident),+) => { $( if a.$f.is_some() { e.$f = a.$f.clone(); } )+ };
            }
            take!(
                label_column,
                splits,
                train_frac,
                flip_frac,
                split_seed,
                p_grid
            );
            let label = e.label_column.clone().unwrap_or_else(|| "label".into());
            let cfg = EvalConfig {
                split_seed: e.split_seed.unwrap_or(0),
                train_frac: e.train_frac.unwrap_or(0.9),
                p_grid: e
                    .p_grid
                    .clone()
                    .unwrap_or_else(|| harness::DEFAULT_P_GRID.to_vec()),
                flip_frac: e.flip_frac.unwrap_or(0.0),
                splits: e.splits.unwrap_or(100),
                solver: file.solver_options()?,
            }
            .validated()?;
            let ds = harness::ingest_csv(&a.input, &label)?;
            let table = harness::train_test_eval(&ds, &cfg)?;
            let mut w = output(a.out.as_deref())?;
            table.write_csv(&mut w)?;
            w.flush()?;
        }
        Cmd::Plot(a) => {
            let dat = harness::emit_plots(&a.input, a.kind, &a.out)?;
            eprintln!("wrote {} and {}", a.out.display(), dat.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<SolverFailure>().is_some() {
                return ExitCode::from(3);
            }
            match e.downcast_ref::<Error>() {
                Some(Error::Config(_) | Error::Parse(_) | Error::Schema(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
