//! Report files. Every write goes to a temporary file in the target
//! directory and is renamed into place.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use crate::pipeline::{StageOutcome, Table};
use crate::scenario::Scenario;

pub const TOOL: &str = "platecont";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn atomic_write(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| e.error)?;
    Ok(())
}

/// The output directory is left out so reports do not depend on where they were written.
pub fn envelope(sc: &Scenario, stage: &str, pass: bool, report: Value) -> Value {
    let sc = Scenario { out: None, ..sc.clone() };
    json!({
        "tool": TOOL,
        "version": VERSION,
        "scenario": sc,
        "stage": stage,
        "pass": pass,
        "report": report,
    })
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> std::io::Result<()> {
    atomic_write(dir, name, text.as_bytes())
}

pub fn write_json(dir: &Path, name: &str, value: &Value) -> std::io::Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    atomic_write(dir, name, s.as_bytes())
}

pub fn write_csv(dir: &Path, table: &Table) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| format!("{v:e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    atomic_write(dir, &format!("{}.csv", table.name), &bytes)
}

pub fn write_stage(dir: &Path, sc: &Scenario, outcome: &StageOutcome) -> std::io::Result<()> {
    write_json(dir, &format!("{}.json", outcome.stage), &envelope(sc, outcome.stage, outcome.pass, outcome.report.clone()))?;
    for t in &outcome.tables {
        write_csv(dir, t)?;
    }
    Ok(())
}
