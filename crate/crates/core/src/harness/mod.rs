//! Configuration, sweeps, dataset ingestion, train/test evaluation and plots.
//!
//! Every CSV written here starts with a `# schema=v1` comment line.

mod config;
mod eval;
mod ingest;
mod plot;
mod sweep;

pub use config::{
    ConfigFile, EvalSection, NoiseSection, SolverSection, SweepConfig, SweepSection,
    DEFAULT_FLIP_RATE, DEFAULT_P_GRID,
};
pub use eval::{test_error, train_test_eval, EvalConfig, EvalRecord, EvalTable};
pub use ingest::{ingest_csv, ingest_reader};
pub use plot::{
    emit_plots, read_rates_csv, write_rates_csv, Dash, Figure, HLine, PlotKind, RateRecord, Series,
    RATE_COLUMNS,
};
pub use sweep::{
    fit, read_records, row_seed, run_sweep, write_records, RowType, SweepRecord, SweepResult,
    SCHEMA_LINE, SWEEP_COLUMNS,
};

use std::io::Write;

/// Writes `rows` as a versioned CSV: the schema comment, a header derived
/// from `T`, one line per row.
pub fn write_table<T: serde::Serialize, W: Write>(
    rows: impl IntoIterator<Item = T>,
    mut out: W,
) -> crate::error::Result<()> {
    writeln!(out, "{SCHEMA_LINE}")?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
