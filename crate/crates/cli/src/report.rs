//! CSV and JSON emission.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde_json::json;

use crate::run::{ReportBundle, Row, Status};

pub const CSV_HEADER: &str = "x,estimate,std_error,n,method,seed,target,pass";

fn float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// CSV body for a set of rows; floats carry 17 significant digits.
pub fn rows_to_csv(rows: &[Row]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let pass = match r.pass {
            Some(true) => "true",
            Some(false) => "false",
            None => "",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            float(r.x),
            float(r.estimate),
            float(r.std_error),
            r.n,
            r.method,
            r.seed,
            float(r.target),
            pass
        );
    }
    out
}

/// Summary document: per-experiment status, rules, details, wall clock and seed.
pub fn summary_json(bundle: &ReportBundle) -> serde_json::Value {
    let ran: Vec<_> = bundle.experiments.iter().filter(|e| e.status != Status::Skipped).collect();
    let failing_rows = |e: &crate::run::ExperimentReport| -> Vec<serde_json::Value> {
        e.rows
            .iter()
            .filter(|r| r.pass == Some(false))
            .map(|r| json!({ "x": r.x, "method": r.method, "estimate": r.estimate, "target": r.target, "std_error": r.std_error }))
            .collect()
    };
    json!({
        "scenario": bundle.scenario,
        "seed": bundle.seed,
        "wall_clock_s": bundle.wall_clock_s,
        "status": if bundle.passed() { "pass" } else { "fail" },
        "failed": bundle.failed(),
        "skipped": if ran.is_empty() { json!("all") } else {
            json!(bundle.experiments.iter().filter(|e| e.status == Status::Skipped).map(|e| &e.name).collect::<Vec<_>>())
        },
        "experiments": bundle.experiments.iter().map(|e| {
            let mut v = serde_json::to_value(e).unwrap_or_default();
            v["failing_rows"] = json!(failing_rows(e));
            v
        }).collect::<Vec<_>>(),
    })
}

/// Writes `<experiment>.csv` files and `summary.json` into `dir`; returns the exit status
/// (0 iff every experiment that ran passed).
pub fn emit_report(bundle: &ReportBundle, dir: &Path) -> io::Result<i32> {
    fs::create_dir_all(dir)?;
    for e in &bundle.experiments {
        if e.status == Status::Skipped {
            continue;
        }
        fs::write(dir.join(format!("{}.csv", e.name)), rows_to_csv(&e.rows))?;
    }
    let summary = serde_json::to_string_pretty(&summary_json(bundle)).map_err(io::Error::other)?;
    fs::write(dir.join("summary.json"), summary + "\n")?;
    Ok(if bundle.passed() { 0 } else { 1 })
}
