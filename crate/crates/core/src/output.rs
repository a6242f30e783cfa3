//! Trace and metrics files.
//!
//! `trace.csv` has the fixed header [`TRACE_HEADER`] and one row per
//! (sample, agent): pursuers `P1..PN` in index order, then the target `T`.
//! Absent values are empty cells. Floats use Rust's shortest round-trip
//! formatting; lines end in LF.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde_json::{Map, Value};

use crate::sim::{EngagementMetrics, SimulationTrace};

pub const TRACE_HEADER: &str = "t,agent,x,y,gamma_deg,V,a_cmd,tgo_true,tgo_est,obs_err,r";
pub const TRACE_COLUMNS: usize = 11;

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn write_trace<W: Write>(trace: &SimulationTrace, mut w: W) -> io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for s in &trace.samples {
        for (i, a) in s.pursuers.iter().enumerate() {
            writeln!(
                w,
                "{},P{},{},{},{},{},{},{},{},{},{}",
                s.t,
                i + 1,
                a.x,
                a.y,
                a.gamma_deg,
                a.speed,
                a.a_cmd,
                cell(a.tgo_true),
                cell(a.tgo_est),
                cell(a.obs_err),
                cell(a.r),
            )?;
        }
        writeln!(w, "{},T,{},{},,,,,,,", s.t, s.target.0, s.target.1)?;
    }
    Ok(())
}

fn number(v: Option<f64>) -> Value {
    v.map_or(Value::Null, Value::from)
}

/// Flat key/value view of the metrics. Per-pursuer fields are keyed
/// `<field>_P<k>`; absent values are `null`.
pub fn metrics_document(scenario: &str, m: &EngagementMetrics) -> Value {
    let mut map = Map::new();
    map.insert("scenario".into(), Value::from(scenario));
    map.insert("n_pursuers".into(), Value::from(m.intercept_times.len()));
    for (i, t) in m.intercept_times.iter().enumerate() {
        map.insert(format!("intercept_time_P{}", i + 1), number(*t));
    }
    for (i, d) in m.miss_distances.iter().enumerate() {
        map.insert(format!("miss_distance_P{}", i + 1), number(*d));
    }
    for (i, f) in m.failed.iter().enumerate() {
        map.insert(format!("failure_time_P{}", i + 1), number(*f));
    }
    map.insert("mean_intercept_time".into(), number(m.mean_intercept_time));
    map.insert("spread".into(), number(m.spread));
    map.insert("consensus_time".into(), number(m.consensus_time));
    map.insert("observer_convergence_time".into(), number(m.observer_convergence_time));
    map.insert("timed_out".into(), Value::from(m.timed_out));
    map.insert(
        "missed".into(),
        Value::from(m.missed.iter().map(|i| format!("P{}", i + 1)).collect::<Vec<_>>()),
    );
    map.insert("warnings".into(), Value::from(m.warnings.clone()));
    Value::Object(map)
}

pub fn write_metrics<W: Write>(scenario: &str, m: &EngagementMetrics, mut w: W) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut w, &metrics_document(scenario, m))?;
    writeln!(w)
}

/// Writes `trace.csv` and `metrics.json` into `dir`, creating it if needed.
pub fn emit(dir: &Path, scenario: &str, trace: &SimulationTrace, m: &EngagementMetrics) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut csv = io::BufWriter::new(fs::File::create(dir.join("trace.csv"))?);
    write_trace(trace, &mut csv)?;
    csv.flush()?;
    let mut json = io::BufWriter::new(fs::File::create(dir.join("metrics.json"))?);
    write_metrics(scenario, m, &mut json)?;
    json.flush()
}
