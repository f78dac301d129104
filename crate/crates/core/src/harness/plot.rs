//! Self-contained SVG figures with a gnuplot-readable `.dat` beside each one.
//!
//! `rates` reads the table written by [`write_rates_csv`]; `risk_vs_p` and
//! `bias_variance` read the summary rows of a sweep CSV.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::sweep::{read_records, strip_schema_line, RowType};
use crate::datagen::Task;
use crate::error::{config, Error, Result};
use crate::theory::RateRow;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Rates,
    RiskVsP,
    BiasVariance,
}

impl std::str::FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rates" => Ok(Self::Rates),
            "risk_vs_p" => Ok(Self::RiskVsP),
            "bias_variance" => Ok(Self::BiasVariance),
            other => config(format!("unknown plot kind '{other}'")),
        }
    }
}

pub const RATE_COLUMNS: [&str; 5] = ["task", "beta", "p", "alpha", "source"];

pub fn write_rates_csv<W: Write>(rows: &[RateRow], out: W) -> Result<()> {
    super::write_table(rows, out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub task: Task,
    pub beta: f64,
    pub p: f64,
    pub alpha: f64,
    pub source: String,
}

pub fn read_rates_csv<R: Read>(mut input: R) -> Result<Vec<RateRecord>> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let body = strip_schema_line(&text, "rates")?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    if r.headers()? != &csv::StringRecord::from(RATE_COLUMNS.to_vec()) {
        return Err(Error::Schema(
            "rates CSV header does not match schema v1".into(),
        ));
    }
    r.deserialize()
        .map(|rec| rec.map_err(|e| Error::Schema(format!("rates CSV: {e}"))))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dash {
    Solid,
    Dashed,
    Dotted,
}

impl Dash {
    fn attr(self) -> &'static str {
        match self {
            Dash::Solid => "",
            Dash::Dashed => " stroke-dasharray=\"8 5\"",
            Dash::Dotted => " stroke-dasharray=\"2 4\"",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    /// `(x, y, stderr)`; a band of +-1 stderr is drawn when present.
    pub points: Vec<(f64, f64, Option<f64>)>,
    pub dash: Dash,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HLine {
    pub y: f64,
    pub label: String,
    pub dash: Dash,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Figure {
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    pub series: Vec<Series>,
    pub hlines: Vec<HLine>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const W: f64 = 720.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

fn nice_step(range: f64) -> f64 {
    let raw = range / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    mag * if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        let h = 0.5 * lo.abs().max(1.0);
        (lo - h, hi + h)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn tick_label(t: f64, step: f64) -> String {
    if step >= 1e-4 && step < 1e6 {
        let digits = (-step.log10().floor()).max(0.0) as usize;
        let v = (t / step).round() * step;
        // avoid "-0"
        format!("{:.*}", digits, if v == 0.0 { 0.0 } else { v })
    } else {
        format!("{t:.2e}")
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl Figure {
    fn is_empty(&self) -> bool {
        self.series.iter().all(|s| s.points.is_empty())
    }

    fn bounds(&self) -> ((f64, f64), (f64, f64)) {
        let (mut x0, mut x1, mut y0, mut y1) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for s in &self.series {
            for &(x, y, e) in &s.points {
                let e = e.unwrap_or(0.0);
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y - e);
                y1 = y1.max(y + e);
            }
        }
        for h in &self.hlines {
            y0 = y0.min(h.y);
            y1 = y1.max(h.y);
        }
        (padded(x0, x1), padded(y0, y1))
    }

    pub fn to_svg(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.bounds();
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;
        let mut o = String::new();
        let _ = writeln!(
            o,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">"
        );
        let _ = writeln!(o, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
        let _ = writeln!(
            o,
            "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
            LEFT + pw / 2.0,
            esc(&self.title)
        );
        // axes and ticks
        let _ = writeln!(
            o,
            "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>"
        );
        for (lo, hi, horizontal) in [(x0, x1, true), (y0, y1, false)] {
            let step = nice_step(hi - lo);
            let mut t = (lo / step).ceil() * step;
            while t <= hi + 1e-9 * step {
                let label = tick_label(t, step);
                if horizontal {
                    let x = sx(t);
                    let _ = writeln!(
                        o,
                        "<line x1=\"{x:.2}\" y1=\"{}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"black\"/><text x=\"{x:.2}\" y=\"{}\" text-anchor=\"middle\">{label}</text>",
                        TOP + ph,
                        TOP + ph + 5.0,
                        TOP + ph + 19.0
                    );
                } else {
                    let y = sy(t);
                    let _ = writeln!(
                        o,
                        "<line x1=\"{}\" y1=\"{y:.2}\" x2=\"{LEFT}\" y2=\"{y:.2}\" stroke=\"black\"/><text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{label}</text>",
                        LEFT - 5.0,
                        LEFT - 8.0,
                        y + 4.0
                    );
                }
                t += step;
            }
        }
        let _ = writeln!(
            o,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            LEFT + pw / 2.0,
            H - 12.0,
            esc(&self.xlabel)
        );
        let _ = writeln!(
            o,
            "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>",
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            esc(&self.ylabel)
        );

        let mut legend: Vec<(String, String, Dash)> = Vec::new();
        for h in &self.hlines {
            let y = sy(h.y);
            let _ = writeln!(
                o,
                "<line x1=\"{LEFT}\" y1=\"{y:.2}\" x2=\"{}\" y2=\"{y:.2}\" stroke=\"gray\" stroke-width=\"1.5\"{}/>",
                LEFT + pw,
                h.dash.attr()
            );
            legend.push((h.label.clone(), "gray".into(), h.dash));
        }
        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let mut pts = s.points.clone();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            if pts.iter().any(|p| p.2.is_some()) && pts.len() > 1 {
                let upper = pts
                    .iter()
                    .map(|&(x, y, e)| (sx(x), sy(y + e.unwrap_or(0.0))));
                let lower = pts
                    .iter()
                    .rev()
                    .map(|&(x, y, e)| (sx(x), sy(y - e.unwrap_or(0.0))));
                let poly: Vec<String> = upper
                    .chain(lower)
                    .map(|(a, b)| format!("{a:.2},{b:.2}"))
                    .collect();
                let _ = writeln!(
                    o,
                    "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.18\" stroke=\"none\"/>",
                    poly.join(" ")
                );
            }
            for &(x, y, e) in &pts {
                if let Some(e) = e {
                    let (cx, lo, hi) = (sx(x), sy(y - e), sy(y + e));
                    let _ = writeln!(
                        o,
                        "<path d=\"M{cx:.2},{lo:.2}V{hi:.2}M{:.2},{lo:.2}h8M{:.2},{hi:.2}h8\" stroke=\"{color}\" fill=\"none\"/>",
                        cx - 4.0,
                        cx - 4.0
                    );
                }
            }
            if pts.len() > 1 {
                let path: Vec<String> = pts
                    .iter()
                    .map(|&(x, y, _)| format!("{:.2},{:.2}", sx(x), sy(y)))
                    .collect();
                let _ = writeln!(
                    o,
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"{}/>",
                    path.join(" "),
                    s.dash.attr()
                );
            }
            if pts.len() <= 12 {
                for &(x, y, _) in &pts {
                    let _ = writeln!(
                        o,
                        "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>",
                        sx(x),
                        sy(y)
                    );
                }
            }
            legend.push((s.label.clone(), color.into(), s.dash));
        }
        for (i, (label, color, dash)) in legend.iter().enumerate() {
            let y = TOP + 10.0 + 18.0 * i as f64;
            let x = LEFT + pw + 12.0;
            let _ = writeln!(
                o,
                "<line x1=\"{x}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{color}\" stroke-width=\"2\"{}/><text x=\"{}\" y=\"{}\">{}</text>",
                x + 24.0,
                dash.attr(),
                x + 30.0,
                y + 4.0,
                esc(label)
            );
        }
        o.push_str("</svg>\n");
        o
    }

    /// One block per series (`x y stderr`), blocks separated by two blank
    /// lines so gnuplot can address them with `index`.
    pub fn to_dat(&self) -> String {
        let mut o = String::new();
        for h in &self.hlines {
            let _ = writeln!(o, "# hline {} y={}", h.label, h.y);
        }
        for s in &self.series {
            let _ = writeln!(o, "# {}\n# {} {} stderr", s.label, self.xlabel, self.ylabel);
            for &(x, y, e) in &s.points {
                let _ = writeln!(
                    o,
                    "{x} {y} {}",
                    e.map_or("NaN".to_string(), |e| e.to_string())
                );
            }
            o.push_str("\n\n");
        }
        o
    }
}

fn rates_figure(rows: &[RateRecord]) -> Figure {
    let task = rows.first().map(|r| r.task);
    let mut fig = Figure {
        title: format!(
            "rate exponents ({})",
            task.map_or("none".into(), |t| t.to_string())
        ),
        xlabel: "beta".into(),
        ylabel: "alpha".into(),
        ..Default::default()
    };
    for r in rows {
        let label = if r.p.is_nan() {
            r.source.clone()
        } else {
            format!("{} p={}", r.source, r.p)
        };
        if r.source == "minimax" {
            continue;
        }
        match fig.series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push((r.beta, r.alpha, None)),
            None => fig.series.push(Series {
                label,
                points: vec![(r.beta, r.alpha, None)],
                dash: if r.source == "koehler" {
                    Dash::Dashed
                } else {
                    Dash::Solid
                },
            }),
        }
    }
    if !fig.is_empty() {
        fig.hlines.push(HLine {
            y: -1.0,
            label: "minimax".into(),
            dash: Dash::Dotted,
        });
        fig.hlines.push(HLine {
            y: 0.0,
            label: "alpha = 0".into(),
            dash: Dash::Dashed,
        });
    }
    fig
}

fn sweep_figure(path: &Path, kind: PlotKind) -> Result<Figure> {
    let recs = read_records(std::fs::File::open(path)?)?;
    let summary: Vec<_> = recs
        .iter()
        .filter(|r| r.row_type == RowType::Summary)
        .collect();
    let task = summary
        .first()
        .map_or("none".to_string(), |r| r.task.to_string());
    let mut fig = Figure {
        xlabel: "p".into(),
        ..Default::default()
    };
    let risk = Series {
        label: "mean risk".into(),
        points: summary
            .iter()
            .filter_map(|r| Some((r.p, r.risk?, Some(r.risk_stderr?))))
            .collect(),
        dash: Dash::Solid,
    };
    match kind {
        PlotKind::RiskVsP => {
            fig.title = format!("risk vs p ({task})");
            fig.ylabel = "risk".into();
            fig.series.push(risk);
        }
        _ => {
            fig.title = format!("bias and variance ({task})");
            fig.ylabel = "squared error".into();
            fig.series.push(risk);
            for (label, get) in [
                (
                    "bias^2",
                    (|r: &super::sweep::SweepRecord| r.bias_sq) as fn(&_) -> _,
                ),
                ("variance", |r: &super::sweep::SweepRecord| r.variance),
            ] {
                fig.series.push(Series {
                    label: label.into(),
                    points: summary
                        .iter()
                        .filter_map(|r| Some((r.p, get(r)?, None)))
                        .collect(),
                    dash: Dash::Dashed,
                });
            }
        }
    }
    Ok(fig)
}

/// Builds the figure of `kind` from `csv_path` and writes `svg_path` plus a
/// `.dat` file with the same stem. Nothing is written when the CSV holds no
/// plottable data.
pub fn emit_plots(csv_path: &Path, kind: PlotKind, svg_path: &Path) -> Result<PathBuf> {
    let fig = match kind {
        PlotKind::Rates => rates_figure(&read_rates_csv(std::fs::File::open(csv_path)?)?),
        _ => sweep_figure(csv_path, kind)?,
    };
    if fig.is_empty() {
        return Err(Error::Degenerate(format!(
            "{} holds no data to plot",
            csv_path.display()
        )));
    }
    let dat = svg_path.with_extension("dat");
    std::fs::write(svg_path, fig.to_svg())?;
    std::fs::write(&dat, fig.to_dat())?;
    Ok(dat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::rate_table;

    fn rates_file(dir: &Path, rows: &[RateRow]) -> PathBuf {
        let path = dir.join("rates.csv");
        let mut buf = Vec::new();
        write_rates_csv(rows, &mut buf).unwrap();
        std::fs::write(&path, buf).unwrap();
        path
    }

    #[test]
    fn rates_plot_has_reference_lines() {
        let dir = tempfile::tempdir().unwrap();
        let rows = rate_table(Task::Regression, &[1.5, 2.0, 3.0], &[1.1, 1.5]).unwrap();
        let csv = rates_file(dir.path(), &rows);
        let svg = dir.path().join("rates.svg");
        let dat = emit_plots(&csv, PlotKind::Rates, &svg).unwrap();
        let text = std::fs::read_to_string(&svg).unwrap();
        assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"));
        assert!(text.contains("stroke-dasharray=\"2 4\""));
        assert!(text.contains("stroke-dasharray=\"8 5\""));
        assert!(text.contains("minimax"));
        assert!(std::fs::read_to_string(dat).unwrap().contains("thm1 p=1.1"));
    }

    #[test]
    fn rates_round_trip() {
        let rows = rate_table(Task::Classification, &[2.0], &[1.5]).unwrap();
        let mut buf = Vec::new();
        write_rates_csv(&rows, &mut buf).unwrap();
        let back = read_rates_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), rows.len());
        assert_eq!(back[0].alpha, rows[0].alpha);
        assert!(back[1].p.is_nan());
    }

    #[test]
    fn empty_data_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let csv = rates_file(dir.path(), &[]);
        let svg = dir.path().join("empty.svg");
        assert!(emit_plots(&csv, PlotKind::Rates, &svg).is_err());
        assert!(!svg.exists() && !svg.with_extension("dat").exists());
    }

    #[test]
    fn single_point_gets_error_bar() {
        let fig = Figure {
            series: vec![Series {
                label: "mean risk".into(),
                points: vec![(1.5, 0.3, Some(0.02))],
                dash: Dash::Solid,
            }],
            ..Default::default()
        };
        let svg = fig.to_svg();
        assert_eq!(svg.matches("<path d=").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 1);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("bad.csv");
        std::fs::write(&csv, "a,b\n1,2\n").unwrap();
        let svg = dir.path().join("bad.svg");
        for kind in [PlotKind::Rates, PlotKind::RiskVsP, PlotKind::BiasVariance] {
            assert!(matches!(
                emit_plots(&csv, kind, &svg),
                Err(Error::Schema(_))
            ));
        }
        assert!(!svg.exists());
    }
}
