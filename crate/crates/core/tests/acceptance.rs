//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 1 5 13`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use lpinterp::datagen::{
    gaussian_design, gen_regression_with_truth, GroundTruth, NoiseModel, ProblemSpec, Task,
};
use lpinterp::harness::{self, run_sweep, SweepConfig, SweepResult, DEFAULT_P_GRID};
use lpinterp::metrics::estimation_error;
use lpinterp::rng::{mix_seed, stream, Purpose};
use lpinterp::solvers::*;
use lpinterp::theory::{self, RateQuery};
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sweep_cfg(task: Task, noise: NoiseModel, d: usize, trials: usize) -> SweepConfig {
    SweepConfig {
        task,
        p_grid: DEFAULT_P_GRID.to_vec(),
        n: 100,
        d,
        noise,
        trials,
        base_seed: 0,
        solver: SolverOptions::default(),
        output_path: None,
    }
}

fn curve(res: &SweepResult) -> String {
    res.summary
        .iter()
        .map(|s| {
            format!(
                "{}:{:.4}±{:.4}",
                s.p,
                s.risk.unwrap_or(f64::NAN),
                s.risk_stderr.unwrap_or(f64::NAN)
            )
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Interior argmin beating both endpoints by two combined standard errors.
fn interior_minimum(res: &SweepResult) -> Outcome {
    let c = res.risk_curve();
    if c.len() != res.summary.len() {
        return Err(format!("missing summaries: {}", curve(res)));
    }
    let k = (0..c.len())
        .min_by(|&a, &b| c[a].1.total_cmp(&c[b].1))
        .unwrap();
    let last = c.len() - 1;
    let gap = |e: usize| (c[e].1 - c[k].1) / (c[e].2.powi(2) + c[k].2.powi(2)).sqrt();
    let interior = k != 0 && k != last;
    let (g0, g1) = if interior {
        (gap(0), gap(last))
    } else {
        (0.0, 0.0)
    };
    check(
        interior && g0 >= 2.0 && g1 >= 2.0,
        format!(
            "argmin p={} gaps {g0:.2}/{g1:.2} SE; {}",
            c[k].0,
            curve(res)
        ),
    )
}

fn c1_oracle() -> Outcome {
    let t0 = Instant::now();
    let opts = SolverOptions::default();
    let mut worst: (f64, f64) = (0.0, 0.0);
    for p in [1.1f64, 1.5, 2.0] {
        for i in 0..100u64 {
            let mut rng = stream(mix_seed(101, &[i, p.to_bits()]), Purpose::Design);
            let n = rng.random_range(1..=5);
            let d = rng.random_range(n + 1..=8);
            let x = gaussian_design(n, d, &mut rng);
            let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let s = solve_min_lp_norm(&x, &y, p, &opts).map_err(|e| e.to_string())?;
            let o = oracle_min_lp_norm(&x, &y, p, ORACLE_MIN_BUDGET).map_err(|e| e.to_string())?;
            worst.0 = worst.0.max((s.objective - o.objective).abs() / o.objective);
            let labels = y.map(|v| if v < 0.0 { -1.0 } else { 1.0 });
            let s = solve_max_lp_margin(&x, &labels, p, &opts).map_err(|e| e.to_string())?;
            let o = oracle_max_lp_margin(&x, &labels, p, ORACLE_MIN_BUDGET)
                .map_err(|e| e.to_string())?;
            worst.1 = worst.1.max((s.objective - o.objective).abs() / o.objective);
        }
    }
    let el = t0.elapsed();
    check(
        worst.0 <= 1e-5 && worst.1 <= 1e-5 && el < Duration::from_secs(120),
        format!(
            "max rel gap interp {:.1e}, margin {:.1e}; {:.1?}",
            worst.0, worst.1, el
        ),
    )
}

fn c2_closed_form() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..50u64 {
        let mut rng = stream(mix_seed(202, &[i]), Purpose::Design);
        let x = gaussian_design(20, 60, &mut rng);
        let y = DVector::from_fn(20, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w = solve_min_lp_norm(&x, &y, 2.0, &SolverOptions::default())
            .map_err(|e| e.to_string())?
            .w;
        let ls = x.clone().pseudo_inverse(1e-12).unwrap() * &y;
        worst = worst.max((w - ls).norm());
    }
    check(worst <= 1e-8, format!("max l2 gap {worst:.1e}"))
}

fn c3_kkt() -> Outcome {
    let opts = SolverOptions::default();
    let (mut converged, mut bad) = (0, Vec::new());
    for i in 0..200u64 {
        let mut rng = stream(mix_seed(303, &[i]), Purpose::Design);
        let n = rng.random_range(5..=30);
        let d = rng.random_range(n + 1..=3 * n);
        let p = rng.random_range(1.05..=2.0);
        let x = gaussian_design(n, d, &mut rng);
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let (sol, kkt) = if i % 2 == 0 {
            let s = solve_min_lp_norm(&x, &y, p, &opts).map_err(|e| e.to_string())?;
            let k = kkt_residual_interpolation(&x, &s.w, p);
            (s, k)
        } else {
            let y = y.map(|v| if v < 0.0 { -1.0 } else { 1.0 });
            let s = solve_max_lp_margin(&x, &y, p, &opts).map_err(|e| e.to_string())?;
            let k = kkt_residual_margin(&x, &y, &s.w, p);
            (s, k)
        };
        if sol.converged {
            converged += 1;
            if !(kkt <= 1e-8 && sol.feasibility_residual <= 1e-10) {
                bad.push(format!(
                    "#{i} kkt {kkt:.1e} feas {:.1e}",
                    sol.feasibility_residual
                ));
            }
        }
    }
    check(
        bad.is_empty() && converged >= 190,
        format!(
            "{converged}/200 converged, {} certificate failures {:?}",
            bad.len(),
            bad
        ),
    )
}

fn c4_l1_recovery() -> Outcome {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let spec = ProblemSpec::regression(50, 200, 1.0, 0.0, seed).unwrap();
        let ds = gen_regression_with_truth(&spec, GroundTruth::e1(200)).unwrap();
        let s = solve_min_lp_norm(&ds.x, &ds.y, 1.0, &SolverOptions::default())
            .map_err(|e| e.to_string())?;
        worst = worst.max(estimation_error(&s.w, ds.truth().unwrap()).unwrap());
    }
    let el = t0.elapsed();
    check(
        worst <= 1e-10 && el < Duration::from_secs(30),
        format!("max estimation error {worst:.1e}; {el:.1?}"),
    )
}

fn c5(res: &SweepResult) -> Outcome {
    interior_minimum(res)
}

fn c6(res: &SweepResult) -> Outcome {
    let c = res.risk_curve();
    let viol: Vec<String> = c
        .windows(2)
        .filter(|w| w[1].1 < w[0].1 - w[0].2.max(w[1].2))
        .map(|w| format!("{}->{}", w[0].0, w[1].0))
        .collect();
    check(
        c.len() == DEFAULT_P_GRID.len() && viol.is_empty(),
        format!("violations {viol:?}; {}", curve(res)),
    )
}

fn c8(sweeps: &[&SweepResult]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for r in sweeps {
        for s in &r.summary {
            if let (Some(b), Some(v), Some(m)) = (s.bias_sq, s.variance, s.risk) {
                worst = worst.max((b + v - m).abs());
                count += 1;
            }
        }
    }
    check(
        count > 0 && worst <= 1e-12,
        format!("{count} summaries, max |bias²+var-mean| {worst:.1e}"),
    )
}

fn c9_rates() -> Outcome {
    let reg = |b, p| {
        theory::rate_exponent_regression(&RateQuery::new(b, p, Task::Regression).unwrap()).unwrap()
    };
    let cla = |b, p| {
        theory::rate_exponent_classification(&RateQuery::new(b, p, Task::Classification).unwrap())
            .unwrap()
    };
    let a = reg(2.0, 1.01);
    let b = cla(3.0, 1.05);
    let (u, v) = (reg(1.5, 1.05), cla(1.5, 1.05));
    check(
        (-1.0..=-0.95).contains(&a)
            && b == -1.0
            && (u + 0.5).abs() < 1e-12
            && (v + 0.5).abs() < 1e-12,
        format!("reg(2,1.01)={a}, cla(3,1.05)={b}, reg(1.5,1.05)={u}, cla(1.5,1.05)={v}"),
    )
}

fn c10_lambda_q() -> Outcome {
    let d = 10_000usize;
    let mut parts = Vec::new();
    let mut ok = true;
    for q in [2.0f64, 4.0, 8.0] {
        let e = theory::lambda_q(d, q, 2000, 10).map_err(|e| e.to_string())?;
        let ratio = e.estimate / (q.sqrt() * (d as f64).powf(1.0 / q));
        let rel = e.stderr / e.estimate;
        ok &= (0.5..=2.0).contains(&ratio) && rel <= 0.01;
        parts.push(format!("q={q}: ratio {ratio:.3}, rel stderr {rel:.1e}"));
    }
    check(ok, parts.join("; "))
}

fn c11_nu_bar() -> Outcome {
    let noise = NoiseModel::random_flips(0.3).unwrap();
    let pop = theory::population_profile(&noise, 1_000_000, 11).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let land = theory::sample_landscape(&noise, 10_000, seed).map_err(|e| e.to_string())?;
        worst = worst.max((land.nu_bar_n - pop.nu_bar).abs());
    }
    check(
        worst <= 0.05,
        format!("nu_bar {:.4}, max deviation {worst:.4}", pop.nu_bar),
    )
}

fn c12_quadratic() -> Outcome {
    let noise = NoiseModel::random_flips(0.2).unwrap();
    let grid: Vec<(f64, f64)> = (0..=60)
        .flat_map(|i| (0..=60).map(move |j| (-3.0 + 0.1 * i as f64, -3.0 + 0.1 * j as f64)))
        .collect();
    let mut thetas = Vec::new();
    let mut holds = 0;
    for seed in 0..10 {
        let land = theory::sample_landscape(&noise, 5000, seed).map_err(|e| e.to_string())?;
        let (t, _, ok) =
            theory::quadratic_lower_bound_check(&land, &grid).map_err(|e| e.to_string())?;
        holds += ok as usize;
        thetas.push(t);
    }
    let min = thetas.iter().copied().fold(f64::INFINITY, f64::min);
    check(holds == 10, format!("{holds}/10 seeds, min theta {min:.4}"))
}

fn c13_path() -> Outcome {
    let rows = theory::path_concentration_report(100_000, &[200], 13).map_err(|e| e.to_string())?;
    let r = rows[0];
    let mut worst_qp: f64 = 0.0;
    for i in 0..20u64 {
        let mut rng = stream(mix_seed(1313, &[i]), Purpose::Auxiliary);
        let mut h: Vec<f64> = (0..6)
            .map(|_| rng.sample::<f64, _>(StandardNormal).abs())
            .collect();
        h.sort_by(|a, b| b.total_cmp(a));
        let h = DVector::from_vec(h);
        let path = theory::L1Path::new(h.clone()).map_err(|e| e.to_string())?;
        let alpha = 1.0 + rng.random::<f64>() * (path.alpha_max() - 1.0);
        let g = path.gamma(alpha).map_err(|e| e.to_string())?;
        let o = theory::gamma_qp_oracle(&h, alpha).map_err(|e| e.to_string())?;
        worst_qp = worst_qp.max((g - o).amax());
    }
    check(
        r.l1_residual <= 1e-9 && r.inner_residual <= 1e-9 && (0.8..=1.2).contains(&r.ratio2) && worst_qp <= 1e-8,
        format!(
            "l1 residual {:.1e}, inner residual {:.1e}, ratio2 {:.4} (second-order prediction {:.4}), ratio1 {:.4}, QP gap {worst_qp:.1e}",
            r.l1_residual,
            r.inner_residual,
            r.ratio2,
            (1.0 + 2.0 / (r.t_s * r.t_s)).powi(-2),
            r.ratio1
        ),
    )
}

fn c14_t_s() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rng = stream(1414, Purpose::Auxiliary);
    for _ in 0..100 {
        let d = rng.random_range(2..=1_000_000usize);
        let s = rng.random_range(1..d);
        let t = theory::t_s_solve(s, d).map_err(|e| e.to_string())?;
        worst = worst.max((2.0 * theory::normal_sf(t) - s as f64 / d as f64).abs());
    }
    let full = theory::t_s_solve(500, 500).map_err(|e| e.to_string())?;
    check(
        worst <= 1e-10 && full == 0.0,
        format!("max |2Φ̄(t_s)-s/d| {worst:.1e}, t_d = {full}"),
    )
}

fn c15_determinism() -> Outcome {
    let toml = "[sweep]\ntask = \"classification\"\nn = 15\nd = 60\ntrials = 3\np_grid = [1.3, 2.0]\n[noise]\nkind = \"flips\"\nsigma = 0.1\n";
    let run = || -> lpinterp::error::Result<Vec<u8>> {
        let cfg = harness::ConfigFile::parse(toml)?.sweep_config()?;
        let mut out = Vec::new();
        run_sweep(&cfg)?.write_csv(&mut out)?;
        let rows = theory::rate_table(Task::Regression, &[1.5, 2.0], &[1.1, 1.5])?;
        harness::write_rates_csv(&rows, &mut out)?;
        harness::write_table(
            theory::path_concentration_report(1000, &[10, 50], 3)?,
            &mut out,
        )?;
        Ok(out)
    };
    let a = run().map_err(|e| e.to_string())?;
    let b = run().map_err(|e| e.to_string())?;
    check(a == b, format!("{} bytes, identical: {}", a.len(), a == b))
}

fn c16_l1_trend() -> Outcome {
    let n = 100usize;
    let mut vals = Vec::new();
    for k in [3.0f64, 4.0, 5.0] {
        let d = (k.exp() * n as f64).round() as usize;
        let cfg = SweepConfig {
            p_grid: vec![1.05],
            ..sweep_cfg(
                Task::Classification,
                NoiseModel::random_flips(0.15).unwrap(),
                d,
                20,
            )
        };
        let res = run_sweep(&cfg).map_err(|e| e.to_string())?;
        let m = res.summary[0].risk.ok_or("no converged trials")?;
        vals.push((d, m, m * (d as f64 / n as f64).ln()));
    }
    let hi = vals.iter().map(|v| v.2).fold(f64::NEG_INFINITY, f64::max);
    let lo = vals.iter().map(|v| v.2).fold(f64::INFINITY, f64::min);
    let spread = (hi - lo) / lo;
    check(
        spread < 0.5,
        format!(
            "risk·log(d/n) spread {:.0}%: {}",
            100.0 * spread,
            vals.iter()
                .map(|v| format!("d={}: {:.4}", v.0, v.2))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

const NAMES: [&str; 16] = [
    "solver-oracle equivalence",
    "p=2 closed form",
    "KKT certification",
    "exact l1 noiseless recovery",
    "noisy regression U-shape",
    "noiseless regression monotone in p",
    "classification interior optimum",
    "bias-variance identity",
    "rate-curve anchors",
    "lambda_q scaling",
    "nu_bar_n concentration",
    "quadratic lower bound",
    "gamma-path invariants and concentration",
    "t_s correctness",
    "end-to-end determinism",
    "l1-limit classification trend (slow)",
];

fn main() -> ExitCode {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let want = |k: usize| args.is_empty() || args.contains(&k);
    let mut failed = 0;
    let mut report = |k: usize, f: &mut dyn FnMut() -> Outcome| {
        if !want(k) {
            return;
        }
        let t0 = Instant::now();
        let out = f();
        let el = t0.elapsed();
        let (tag, detail) = match out {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {k:>2} {}: {detail} ({el:.1?})", NAMES[k - 1]);
    };

    report(1, &mut c1_oracle);
    report(2, &mut c2_closed_form);
    report(3, &mut c3_kkt);
    report(4, &mut c4_l1_recovery);

    let need = |ks: &[usize]| ks.iter().any(|&k| want(k));
    let noisy = need(&[5, 8]).then(|| {
        run_sweep(&sweep_cfg(
            Task::Regression,
            NoiseModel::gaussian(1.0).unwrap(),
            5000,
            50,
        ))
    });
    let clean = need(&[6, 8]).then(|| {
        run_sweep(&sweep_cfg(
            Task::Regression,
            NoiseModel::gaussian(0.0).unwrap(),
            5000,
            50,
        ))
    });
    let class = need(&[7, 8]).then(|| {
        run_sweep(&sweep_cfg(
            Task::Classification,
            NoiseModel::random_flips(0.15).unwrap(),
            5000,
            50,
        ))
    });
    let get = |r: &Option<lpinterp::error::Result<SweepResult>>| -> Result<SweepResult, String> {
        match r {
            Some(Ok(r)) => Ok(r.clone()),
            Some(Err(e)) => Err(e.to_string()),
            None => Err("not run".into()),
        }
    };
    report(5, &mut || c5(&get(&noisy)?));
    report(6, &mut || c6(&get(&clean)?));
    report(7, &mut || interior_minimum(&get(&class)?));
    report(8, &mut || {
        let (a, b, c) = (get(&noisy)?, get(&clean)?, get(&class)?);
        c8(&[&a, &b, &c])
    });
    report(9, &mut c9_rates);
    report(10, &mut c10_lambda_q);
    report(11, &mut c11_nu_bar);
    report(12, &mut c12_quadratic);
    report(13, &mut c13_path);
    report(14, &mut c14_t_s);
    report(15, &mut c15_determinism);
    report(16, &mut c16_l1_trend);

    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
