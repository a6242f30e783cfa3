//! Scenario documents: parsing, validation with defaults, and the echo used by
//! `validate`.
//!
//! Documents are TOML (see `docs/scenario-format.md`). Angles are degrees at
//! this boundary; everything downstream is SI with radians. The resolved
//! [`ScenarioConfig`] keeps the document's units so an echoed config parses
//! back to an identical value.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::dynamics::{relative_kinematics, PursuerTruth, TargetState};
use crate::graph::{
    controller_gain_floor, mirror_fiedler, observer_gain_floors, sensing_spectra, target_drift,
    zero_mean_floor, ObserverFloors, SensingSpectra, Topology,
};
use crate::guidance::{time_to_go, STANDARD_GRAVITY};
use crate::observer::{default_guard, spectral_radius};

pub const GAIN_MARGIN: f64 = 1.5;
pub const DEFAULT_M1: f64 = 1.0;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 1e-2;
pub const DEFAULT_CAPTURE_RADIUS: f64 = 1.0;
pub const DEFAULT_C_FACTOR: f64 = 3.0;
pub const DEFAULT_A_MAX_G: f64 = 7.0;

/// Direction in which a pursuer applies its lateral command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AccelFrame {
    /// Normal to the line of sight the pursuer believes in (its estimate).
    #[default]
    EstimatedLos,
    /// Normal to the true line of sight.
    TrueLos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetDoc {
    pub position: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PursuerDoc {
    pub position: [f64; 2],
    pub speed: f64,
    pub heading_deg: f64,
    #[serde(default)]
    pub sensor: bool,
    /// Initial estimate `[x, y, vx, vy]` of the target state.
    pub estimate: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphsDoc {
    /// Node 0 is the target, pursuers are 1..=N.
    pub sensing: Vec<[usize; 2]>,
    /// Pursuers are 1..=N.
    pub actuation: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimesDoc {
    pub t_o: f64,
    pub t_a: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_interval: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observer_guard: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consensus_guard: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureDoc {
    /// 1-based pursuer number.
    pub pursuer: usize,
    pub t: f64,
}

/// The on-disk document. Scalars come first so the TOML serializer can emit
/// them ahead of the tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_max_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capture_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accel_frame: Option<AccelFrame>,
    pub target: TargetDoc,
    pub pursuers: Vec<PursuerDoc>,
    pub graphs: GraphsDoc,
    #[serde(default)]
    pub gains: GainsDoc,
    pub times: TimesDoc,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<FailureDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains {
    pub k1: f64,
    pub k2: f64,
    pub m1: f64,
    pub m2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Times {
    pub t_o: f64,
    pub t_a: f64,
    pub dt: f64,
    pub t_max: f64,
    pub sample_interval: f64,
    pub observer_guard: f64,
    pub consensus_guard: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureEvent {
    /// 0-based pursuer index.
    pub pursuer: usize,
    pub t: f64,
}

/// Spectral quantities and gain floors derived from a sensing/actuation pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GainDesign {
    pub sensing: SensingSpectra,
    pub observer: ObserverFloors,
    /// `None` for a single pursuer, where consensus is vacuous.
    pub fiedler: Option<f64>,
    pub m2_min: f64,
    pub sensing_radius: f64,
    pub actuation_radius: f64,
}

/// Spectra and floors for a leader sensing graph and a leaderless actuation
/// graph over the same pursuers.
pub fn design_gains(sensing: &Topology, actuation: &Topology) -> Result<GainDesign, String> {
    if !sensing
        .has_spanning_tree(0)
        .map_err(|e| e.to_string())?
    {
        return Err("sensing graph has no directed spanning tree rooted at the target".into());
    }
    let sensing_bundle = sensing.laplacian_bundle();
    let block = sensing_bundle
        .pursuer_block
        .ok_or("sensing graph has no leader partition")?;
    let spectra = sensing_spectra(&block).map_err(|e| e.to_string())?;
    let observer = observer_gain_floors(&spectra, &target_drift()).map_err(|e| e.to_string())?;
    let laplacian = actuation.laplacian_bundle().laplacian;
    let (fiedler, m2_min) = if actuation.n_nodes() >= 2 {
        if !actuation.is_strongly_connected() {
            return Err("actuation graph not strongly connected".into());
        }
        let f = mirror_fiedler(&laplacian).map_err(|e| e.to_string())?;
        (Some(f), controller_gain_floor(f).map_err(|e| e.to_string())?)
    } else {
        (None, 0.0)
    };
    Ok(GainDesign {
        sensing_radius: spectral_radius(&block),
        actuation_radius: spectral_radius(&laplacian),
        sensing: spectra,
        observer,
        fiedler,
        m2_min,
    })
}

/// A validated scenario with every default resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub target: TargetDoc,
    pub pursuers: Vec<PursuerDoc>,
    pub sensing: Topology,
    pub actuation: Topology,
    pub gains: Gains,
    pub times: Times,
    pub c_factor: f64,
    pub a_max_g: f64,
    pub capture_radius: f64,
    pub accel_frame: AccelFrame,
    pub failures: Vec<FailureEvent>,
    pub design: GainDesign,
}

const DEG: f64 = PI / 180.0;

impl ScenarioConfig {
    pub fn n_pursuers(&self) -> usize {
        self.pursuers.len()
    }

    pub fn a_max(&self) -> f64 {
        self.a_max_g * STANDARD_GRAVITY
    }

    pub fn initial_target(&self) -> TargetState {
        target_state(&self.target)
    }

    pub fn initial_pursuers(&self) -> Vec<PursuerTruth> {
        self.pursuers
            .iter()
            .map(|p| PursuerTruth::new(p.position[0], p.position[1], p.heading_deg * DEG, p.speed))
            .collect()
    }

    pub fn initial_estimates(&self) -> Vec<Vector4<f64>> {
        self.pursuers
            .iter()
            .map(|p| Vector4::from_column_slice(&p.estimate))
            .collect()
    }

    /// Back to a document with every resolved value written out.
    pub fn to_doc(&self) -> ScenarioDoc {
        ScenarioDoc {
            name: Some(self.name.clone()),
            c_factor: Some(self.c_factor),
            a_max_g: Some(self.a_max_g),
            capture_radius: Some(self.capture_radius),
            accel_frame: Some(self.accel_frame),
            target: self.target.clone(),
            pursuers: self.pursuers.clone(),
            graphs: GraphsDoc {
                sensing: self.sensing.edges().iter().map(|&(a, b)| [a, b]).collect(),
                actuation: self
                    .actuation
                    .edges()
                    .iter()
                    .map(|&(a, b)| [a + 1, b + 1])
                    .collect(),
            },
            gains: GainsDoc {
                k1: Some(self.gains.k1),
                k2: Some(self.gains.k2),
                m1: Some(self.gains.m1),
                m2: Some(self.gains.m2),
            },
            times: TimesDoc {
                t_o: self.times.t_o,
                t_a: self.times.t_a,
                dt: Some(self.times.dt),
                t_max: Some(self.times.t_max),
                sample_interval: Some(self.times.sample_interval),
                observer_guard: Some(self.times.observer_guard),
                consensus_guard: Some(self.times.consensus_guard),
            },
            failures: self
                .failures
                .iter()
                .map(|f| FailureDoc {
                    pursuer: f.pursuer + 1,
                    t: f.t,
                })
                .collect(),
        }
    }

    /// The effective configuration as a scenario document.
    pub fn echo(&self) -> String {
        toml::to_string(&self.to_doc()).expect("scenario documents always serialize")
    }

    /// Initial true time-to-go per pursuer.
    pub fn initial_true_tgo(&self) -> Vec<Option<f64>> {
        let target = self.initial_target();
        self.initial_pursuers()
            .iter()
            .map(|p| {
                let e = relative_kinematics(p, &target).ok()?;
                let c = self.c_factor * (p.speed + target.speed());
                time_to_go(e.r, e.v_r, e.v_theta, c).ok()
            })
            .collect()
    }

    /// Initial estimate-based time-to-go per pursuer, with `c` built from the
    /// estimated target speed.
    pub fn initial_estimated_tgo(&self) -> Vec<Option<f64>> {
        self.initial_pursuers()
            .iter()
            .zip(self.initial_estimates())
            .map(|(p, est)| {
                let e = crate::dynamics::estimated_engagement(&est, p).ok()?;
                let c = self.c_factor * (p.speed + e.target_speed);
                time_to_go(e.r, e.v_r, e.v_theta, c).ok()
            })
            .collect()
    }
}

fn target_state(doc: &TargetDoc) -> TargetState {
    let [x, y] = doc.position;
    match (doc.velocity, doc.speed, doc.heading_deg) {
        (Some([vx, vy]), _, _) => TargetState::new(x, y, vx, vy),
        (None, Some(speed), Some(heading)) => TargetState::from_speed_heading(x, y, speed, heading * DEG),
        _ => TargetState::new(x, y, 0.0, 0.0),
    }
}

/// Why a scenario document was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    Syntax { line: usize, column: usize, message: String },
    MissingField { line: usize, column: usize, field: String },
    Invalid(Vec<String>),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Syntax { line, column, message } => {
                write!(f, "syntax error at line {line}, column {column}: {message}")
            }
            Self::MissingField { line, column, field } => {
                write!(f, "missing required field `{field}` (line {line}, column {column})")
            }
            Self::Invalid(violations) => {
                write!(f, "{} violation(s):", violations.len())?;
                for v in violations {
                    write!(f, "\n  - {v}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ScenarioError {}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, column)
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    resolve(parse_document(text)?)
}

/// Parses the document structure only, without defaults or constraint checks.
pub fn parse_document(text: &str) -> Result<ScenarioDoc, ScenarioError> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        let message = e.message().to_string();
        match message
            .strip_prefix("missing field `")
            .and_then(|rest| rest.split('`').next())
        {
            Some(field) => ScenarioError::MissingField {
                line,
                column,
                field: field.to_string(),
            },
            None => ScenarioError::Syntax { line, column, message },
        }
    })
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

/// Applies defaults and checks every constraint, reporting all violations.
pub fn resolve(doc: ScenarioDoc) -> Result<ScenarioConfig, ScenarioError> {
    let mut bad = Vec::new();
    let n = doc.pursuers.len();
    if n == 0 {
        bad.push("at least one pursuer is required".to_string());
    }

    let t = &doc.target;
    match (t.velocity, t.speed, t.heading_deg) {
        (Some(v), None, None) if v.iter().all(|c| c.is_finite()) => {}
        (None, Some(s), Some(h)) if s.is_finite() && s >= 0.0 && h.is_finite() => {}
        (None, None, None) => bad.push("target needs either `speed` + `heading_deg` or `velocity`".into()),
        _ => bad.push(
            "target motion must be given as finite `speed` >= 0 with `heading_deg`, or as `velocity`, not both"
                .into(),
        ),
    }
    if !t.position.iter().all(|c| c.is_finite()) {
        bad.push("target position must be finite".into());
    }

    for (k, p) in doc.pursuers.iter().enumerate() {
        if !positive(p.speed) {
            bad.push(format!("pursuer {}: speed must be positive, got {}", k + 1, p.speed));
        }
        let finite = p.position.iter().chain(&p.estimate).all(|c| c.is_finite()) && p.heading_deg.is_finite();
        if !finite {
            bad.push(format!("pursuer {}: position, heading and estimate must be finite", k + 1));
        }
        if p.position == t.position {
            bad.push(format!("pursuer {} starts on the target", k + 1));
        }
        if p.estimate[0] == p.position[0] && p.estimate[1] == p.position[1] {
            bad.push(format!("pursuer {}: initial estimate coincides with its own position", k + 1));
        }
    }

    let sensing_edges: Vec<_> = doc.graphs.sensing.iter().map(|&[a, b]| (a, b)).collect();
    let sensing = match Topology::new(n + 1, &sensing_edges, true) {
        Ok(s) => {
            if !s.has_spanning_tree(0).unwrap_or(false) {
                bad.push("sensing graph has no directed spanning tree rooted at the target (node 0)".into());
            }
            for (k, p) in doc.pursuers.iter().enumerate() {
                let senses = s.edges().contains(&(0, k + 1));
                if p.sensor != senses {
                    bad.push(format!(
                        "pursuer {}: sensor flag {} disagrees with the sensing graph (target edge {})",
                        k + 1,
                        p.sensor,
                        if senses { "present" } else { "absent" }
                    ));
                }
            }
            Some(s)
        }
        Err(e) => {
            bad.push(format!("sensing graph: {e}"));
            None
        }
    };

    let mut actuation_edges = Vec::new();
    for &[a, b] in &doc.graphs.actuation {
        if a == 0 || b == 0 {
            bad.push(format!("actuation edge ({a}, {b}): pursuers are numbered from 1"));
        } else {
            actuation_edges.push((a - 1, b - 1));
        }
    }
    let actuation = match Topology::new(n, &actuation_edges, false) {
        Ok(a) => {
            if !a.is_strongly_connected() {
                bad.push("actuation graph not strongly connected".into());
            }
            Some(a)
        }
        Err(e) => {
            bad.push(format!("actuation graph: {e}"));
            None
        }
    };

    let tm = &doc.times;
    if !(positive(tm.t_o) && tm.t_a.is_finite() && tm.t_a > tm.t_o) {
        bad.push(format!(
            "prescribed times must satisfy T_a > T_o > 0 (got T_o = {}, T_a = {})",
            tm.t_o, tm.t_a
        ));
    }
    let dt = tm.dt.unwrap_or(DEFAULT_DT);
    if !positive(dt) {
        bad.push(format!("dt must be positive, got {dt}"));
    }
    let sample_interval = tm.sample_interval.unwrap_or(DEFAULT_SAMPLE_INTERVAL);
    if !(sample_interval.is_finite() && sample_interval >= dt) {
        bad.push(format!("sample_interval {sample_interval} must be at least dt = {dt}"));
    }
    if let Some(t_max) = tm.t_max {
        if !(t_max.is_finite() && t_max >= 0.0) {
            bad.push(format!("t_max must be non-negative, got {t_max}"));
        }
    }

    let c_factor = doc.c_factor.unwrap_or(DEFAULT_C_FACTOR);
    if !(c_factor.is_finite() && c_factor > 0.5) {
        bad.push(format!(
            "c_factor {c_factor} must exceed 0.5 so that c_i is well above (V_P + V_T)/2"
        ));
    }
    let a_max_g = doc.a_max_g.unwrap_or(DEFAULT_A_MAX_G);
    if !positive(a_max_g) {
        bad.push(format!("a_max_g must be positive, got {a_max_g}"));
    }
    let capture_radius = doc.capture_radius.unwrap_or(DEFAULT_CAPTURE_RADIUS);
    if !positive(capture_radius) {
        bad.push(format!("capture_radius must be positive, got {capture_radius}"));
    }

    let mut failures = Vec::new();
    for f in &doc.failures {
        if f.pursuer == 0 || f.pursuer > n {
            bad.push(format!("failure event names pursuer {} (valid: 1..={n})", f.pursuer));
        } else if !(f.t.is_finite() && f.t >= 0.0) {
            bad.push(format!("failure time {} must be non-negative", f.t));
        } else {
            failures.push(FailureEvent {
                pursuer: f.pursuer - 1,
                t: f.t,
            });
        }
    }

    let design = match (&sensing, &actuation) {
        (Some(s), Some(a)) if bad.is_empty() => match design_gains(s, a) {
            Ok(d) => Some(d),
            Err(e) => {
                bad.push(e);
                None
            }
        },
        _ => None,
    };
    let Some(design) = design else {
        return Err(ScenarioError::Invalid(bad));
    };

    let g = &doc.gains;
    let gains = Gains {
        k1: g.k1.unwrap_or(GAIN_MARGIN * design.observer.k1_min),
        k2: g.k2.unwrap_or(GAIN_MARGIN * design.observer.k2_min),
        m1: g.m1.unwrap_or(DEFAULT_M1),
        m2: g.m2.unwrap_or(GAIN_MARGIN * design.m2_min),
    };
    if !(gains.k1.is_finite() && gains.k1 > design.observer.k1_min) {
        bad.push(format!(
            "observer gain K1 = {} must exceed 2‖R⊗A_T‖/λ1(Q) = {}",
            gains.k1, design.observer.k1_min
        ));
    }
    if !(gains.k2.is_finite() && gains.k2 >= design.observer.k2_min) {
        bad.push(format!(
            "observer gain K2 = {} must be at least 2λmax(R)/λ1(Q) = {}",
            gains.k2, design.observer.k2_min
        ));
    }
    if !positive(gains.m1) {
        bad.push(format!("consensus gain M1 = {} must be positive", gains.m1));
    }
    if !(gains.m2.is_finite() && gains.m2 >= design.m2_min) {
        bad.push(format!(
            "consensus gain M2 = {} must be at least 1/λ2 of the mirror graph = {}",
            gains.m2, design.m2_min
        ));
    }

    let observer_guard = tm
        .observer_guard
        .unwrap_or_else(|| default_guard(dt, gains.k1, gains.k2, design.sensing_radius));
    let consensus_guard = tm
        .consensus_guard
        .unwrap_or_else(|| default_guard(dt, gains.m1, gains.m2, design.actuation_radius));
    if !(observer_guard > 0.0 && observer_guard < tm.t_o) {
        bad.push(format!(
            "observer guard {observer_guard} s must lie in (0, T_o); reduce dt or the observer gains"
        ));
    }
    if !(consensus_guard > 0.0 && consensus_guard < tm.t_a) {
        bad.push(format!(
            "consensus guard {consensus_guard} s must lie in (0, T_a); reduce dt or the consensus gains"
        ));
    }
    if !bad.is_empty() {
        return Err(ScenarioError::Invalid(bad));
    }

    let mut config = ScenarioConfig {
        name: doc.name.clone().unwrap_or_else(|| "scenario".to_string()),
        target: doc.target.clone(),
        pursuers: doc.pursuers.clone(),
        sensing: sensing.expect("checked above"),
        actuation: actuation.expect("checked above"),
        gains,
        times: Times {
            t_o: tm.t_o,
            t_a: tm.t_a,
            dt,
            t_max: 0.0,
            sample_interval,
            observer_guard,
            consensus_guard,
        },
        c_factor,
        a_max_g,
        capture_radius,
        accel_frame: doc.accel_frame.unwrap_or_default(),
        failures,
        design,
    };
    config.times.t_max = match tm.t_max {
        Some(t) => t,
        None => {
            let tgo = config.initial_true_tgo();
            let largest = tgo.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(largest.is_finite() && largest > 0.0) {
                return Err(ScenarioError::Invalid(vec![
                    "t_max is not given and no pursuer has a positive initial time-to-go".into(),
                ]));
            }
            4.0 * largest
        }
    };
    Ok(config)
}

/// Warnings that do not block a run.
pub fn warnings(config: &ScenarioConfig) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(fiedler) = config.design.fiedler {
        let laplacian = config.actuation.laplacian_bundle().laplacian;
        if let Ok(floor) = zero_mean_floor(&laplacian) {
            if floor < fiedler - 1e-9 * fiedler.max(1.0) {
                out.push(format!(
                    "actuation graph is unbalanced and its zero-mean floor {floor} is below the mirror \
                     Fiedler value {fiedler}; the M2 floor does not carry the consensus guarantee"
                ));
            }
        }
    }
    for (k, p) in config.pursuers.iter().enumerate() {
        if p.estimate[2] == 0.0 && p.estimate[3] == 0.0 && config.initial_target().speed() > 0.0 {
            out.push(format!(
                "pursuer {}: initial velocity estimate is zero; heading estimate starts at 0 rad",
                k + 1
            ));
        }
    }
    for (k, tgo) in config.initial_true_tgo().iter().enumerate() {
        match tgo {
            Some(t) if *t > 0.0 => {}
            _ => out.push(format!("pursuer {}: initial true time-to-go is not positive", k + 1)),
        }
    }
    out
}
