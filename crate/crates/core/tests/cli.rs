use std::path::Path;
use std::process::{Command, Output};

fn lpinterp(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpinterp"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn gen_then_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    ok(&lpinterp(
        &[
            "gen", "--n", "8", "--d", "40", "--seed", "3", "--out", "data.csv",
        ],
        dir.path(),
    ));
    ok(&lpinterp(
        &["fit", "--data", "data.csv", "--p", "1.5", "--out", "w.txt"],
        dir.path(),
    ));
    let w = std::fs::read_to_string(dir.path().join("w.txt")).unwrap();
    assert_eq!(w.lines().filter(|l| !l.starts_with('#')).count(), 40);
}

#[test]
fn sweep_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec![
            "sweep", "--n", "6", "--d", "30", "--trials", "3", "--p-grid", "1.2,2", "--seed", "9",
            "--out", out,
        ]
    };
    ok(&lpinterp(&args("a.csv"), dir.path()));
    ok(&lpinterp(&args("b.csv"), dir.path()));
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with(b"# schema=v1\nrow_type,task,p,trial,seed"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "[sweep]\nn = 5\nd = 25\ntrials = 2\np_grid = [1.5]\n[noise]\nkind = \"gaussian\"\nsigma = 0.5\n",
    )
    .unwrap();
    ok(&lpinterp(
        &[
            "sweep", "--config", "run.toml", "--d", "20", "--out", "s.csv",
        ],
        dir.path(),
    ));
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let trials = text.lines().filter(|l| l.starts_with("trial,")).count();
    assert_eq!(trials, 2);
}

#[test]
fn bad_input_exits_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = lpinterp(
        &[
            "sweep", "--n", "50", "--d", "10", "--trials", "1", "--out", "x.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(dir.path().join("bad.toml"), "[sweep]\nunknown_key = 1\n").unwrap();
    let out = lpinterp(&["sweep", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unconverged_fit_exits_with_status_three() {
    let dir = tempfile::tempdir().unwrap();
    ok(&lpinterp(
        &["gen", "--n", "8", "--d", "40", "--out", "data.csv"],
        dir.path(),
    ));
    let out = lpinterp(
        &[
            "fit",
            "--data",
            "data.csv",
            "--p",
            "1.1",
            "--max-iters",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn rates_table_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    ok(&lpinterp(
        &[
            "theory", "rates", "--betas", "1.5,2,3", "--ps", "1.1,2", "--out", "r.csv",
        ],
        dir.path(),
    ));
    ok(&lpinterp(
        &[
            "plot", "--input", "r.csv", "--kind", "rates", "--out", "r.svg",
        ],
        dir.path(),
    ));
    let svg = std::fs::read_to_string(dir.path().join("r.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(dir.path().join("r.dat").exists());
}
