//! Scenario files, the echo and the output formats.

use std::path::PathBuf;

use coguide::output::{emit, metrics_document, write_trace, TRACE_COLUMNS, TRACE_HEADER};
use coguide::scenario::{parse_scenario, warnings, ScenarioError};
use coguide::sim::run;

fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn bundled(name: &str) -> String {
    std::fs::read_to_string(scenarios_dir().join(format!("{name}.toml"))).unwrap()
}

const VALID: [&str; 3] = ["scenario1", "scenario1-p3-failure", "scenario3"];

#[test]
fn bundled_scenarios_validate_cleanly() {
    for name in VALID {
        let c = parse_scenario(&bundled(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(c.name, name);
        assert!(warnings(&c).is_empty(), "{name}: {:?}", warnings(&c));
    }
}

#[test]
fn removed_actuation_edge_is_rejected() {
    let err = parse_scenario(&bundled("scenario1-p3-removed-from-actuation")).unwrap_err();
    assert!(err.to_string().contains("actuation graph not strongly connected"), "{err}");
}

#[test]
fn echo_round_trips() {
    for name in VALID {
        let c = parse_scenario(&bundled(name)).unwrap();
        let echo = c.echo();
        let again = parse_scenario(&echo).unwrap_or_else(|e| panic!("{name}: {e}\n{echo}"));
        assert_eq!(again, c, "{name}");
        assert_eq!(again.echo(), echo);
    }
}

#[test]
fn echo_states_the_resolved_defaults() {
    let c = parse_scenario(&bundled("scenario1")).unwrap();
    let echo = c.echo();
    for key in ["dt = 0.001", "sample_interval = 0.01", "capture_radius = 1.0", "accel_frame = \"estimated_los\""] {
        assert!(echo.contains(key), "missing {key} in\n{echo}");
    }
    // gains default to 1.5 times their floors
    assert!((c.gains.m2 - 1.5 * c.design.m2_min).abs() < 1e-12);
    assert!((c.gains.k2 - 1.5 * c.design.observer.k2_min).abs() < 1e-12);
}

#[test]
fn syntax_errors_carry_line_and_column() {
    let text = bundled("scenario1").replace("speed = 57.0", "speed = 57.0.0");
    match parse_scenario(&text).unwrap_err() {
        ScenarioError::Syntax { line, .. } => {
            let expected = text.lines().position(|l| l.contains("57.0.0")).unwrap() + 1;
            assert_eq!(line, expected);
        }
        other => panic!("expected a syntax error, got {other}"),
    }
}

#[test]
fn missing_fields_are_named() {
    let text = bundled("scenario1").replace("t_a = 3.0", "");
    let err = parse_scenario(&text).unwrap_err();
    assert!(matches!(&err, ScenarioError::MissingField { field, .. } if field == "t_a"), "{err}");
}

#[test]
fn every_violation_is_reported() {
    let text = bundled("scenario1")
        .replace("speed = 57.0", "speed = -57.0")
        .replace("t_a = 3.0", "t_a = 3.0\ndt = 0.0")
        .replace("a_max_g = 7.0", "a_max_g = 0.0");
    let ScenarioError::Invalid(list) = parse_scenario(&text).unwrap_err() else {
        panic!("expected constraint violations");
    };
    assert!(list.iter().any(|v| v.contains("pursuer 2: speed must be positive")), "{list:?}");
    assert!(list.iter().any(|v| v.contains("dt must be positive")), "{list:?}");
    assert!(list.iter().any(|v| v.contains("a_max_g must be positive")), "{list:?}");
}

#[test]
fn gains_below_their_floors_are_rejected() {
    let text = bundled("scenario1").replace("[times]", "[gains]\nm2 = 0.5\n\n[times]");
    let err = parse_scenario(&text).unwrap_err().to_string();
    assert!(err.contains("consensus gain M2 = 0.5"), "{err}");
}

#[test]
fn bad_failure_events_are_rejected() {
    let text = format!("{}\n[[failures]]\npursuer = 9\nt = 1.0\n", bundled("scenario1"));
    let err = parse_scenario(&text).unwrap_err().to_string();
    assert!(err.contains("failure event names pursuer 9"), "{err}");
}

#[test]
fn trace_schema_is_fixed() {
    let text = bundled("scenario1").replace("t_a = 3.0", "t_a = 3.0\nt_max = 0.05");
    let out = run(&parse_scenario(&text).unwrap()).unwrap();
    let mut buf = Vec::new();
    write_trace(&out.trace, &mut buf).unwrap();
    let csv = String::from_utf8(buf).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,agent,x,y,gamma_deg,V,a_cmd,tgo_true,tgo_est,obs_err,r"));
    assert_eq!(TRACE_HEADER.split(',').count(), TRACE_COLUMNS);
    let rows: Vec<&str> = lines.collect();
    // five samples at 0, 0.01, ..., 0.04 with four pursuers and the target each
    assert_eq!(rows.len(), 5 * 5);
    let agents: Vec<&str> = rows[..5].iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(agents, ["P1", "P2", "P3", "P4", "T"]);
    for row in &rows {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), TRACE_COLUMNS, "{row}");
        assert!(!row.contains('e') && !row.contains("NaN"), "{row}");
    }
    assert_eq!(rows[0].split(',').take(4).collect::<Vec<_>>(), ["0", "P1", "0", "0"]);
    assert_eq!(rows[4], "0,T,2500,0,,,,,,,");
}

#[test]
fn metrics_document_keys() {
    let text = format!("{}\n[[failures]]\npursuer = 3\nt = 1.0\n", bundled("scenario1"));
    let out = run(&parse_scenario(&text).unwrap()).unwrap();
    let doc = metrics_document("scenario1-p3-failure", &out.metrics);
    let map = doc.as_object().unwrap();
    assert_eq!(map["n_pursuers"], 4);
    assert!(map["intercept_time_P3"].is_null());
    assert_eq!(map["failure_time_P3"], 1.0);
    assert!(map["intercept_time_P1"].as_f64().unwrap() > 30.0);
    assert_eq!(map["timed_out"], false);
    let keys: Vec<&String> = map.keys().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn emitted_files_are_byte_identical_across_runs() {
    let c = parse_scenario(&bundled("scenario1-p3-failure")).unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let out = run(&c).unwrap();
        emit(dir.path(), &c.name, &out.trace, &out.metrics).unwrap();
    }
    for file in ["trace.csv", "metrics.json"] {
        let a = std::fs::read(dirs[0].path().join(file)).unwrap();
        let b = std::fs::read(dirs[1].path().join(file)).unwrap();
        assert!(!a.is_empty());
        assert!(a == b, "{file} differs between runs");
    }
}
