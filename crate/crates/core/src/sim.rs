//! Fixed-step RK4 integration of the coupled truth, observer and guidance
//! loop, with capture detection, failure injection and run metrics.
//!
//! One run is single-threaded and deterministic: pursuers are always visited
//! in index order and every RK4 stage evaluates commands and observer
//! innovations from that stage's own snapshot.

use nalgebra::{DMatrix, Vector4};

use crate::dynamics::{
    estimated_engagement, pursuer_derivatives, relative_kinematics, target_derivative, PursuerTruth,
    TargetState,
};
use crate::error::{Error, Result};
use crate::guidance::{consensus_input, guidance_command, saturate, time_to_go, GuidanceParams};
use crate::observer::{observer_derivative, relative_estimation_error, ObserverParams, ScalingParams};
use crate::scenario::{design_gains, AccelFrame, ScenarioConfig};

/// Capture record for one pursuer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interception {
    pub t: f64,
    pub miss_distance: f64,
}

/// Full engagement state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub step: u64,
    pub t: f64,
    pub target: TargetState,
    pub pursuers: Vec<PursuerTruth>,
    pub estimates: Vec<Vector4<f64>>,
    pub intercepted: Vec<Option<Interception>>,
    pub failed: Vec<Option<f64>>,
    /// Last command that came out of the guidance law unguarded.
    pub last_command: Vec<f64>,
}

impl SimState {
    pub fn initial(config: &ScenarioConfig) -> Self {
        let n = config.n_pursuers();
        Self {
            step: 0,
            t: 0.0,
            target: config.initial_target(),
            pursuers: config.initial_pursuers(),
            estimates: config.initial_estimates(),
            intercepted: vec![None; n],
            failed: vec![None; n],
            last_command: vec![0.0; n],
        }
    }

    pub fn alive(&self) -> Vec<bool> {
        self.pursuers.iter().map(|p| p.alive).collect()
    }

    pub fn any_alive(&self) -> bool {
        self.pursuers.iter().any(|p| p.alive)
    }
}

/// Graph matrices for the pursuers still in play, plus the gains.
#[derive(Debug, Clone)]
pub struct Engine {
    pub sensing_adjacency: DMatrix<f64>,
    pub actuation_laplacian: DMatrix<f64>,
    pub observer: ObserverParams,
    pub guidance: GuidanceParams,
    pub observer_scaling: ScalingParams,
    pub consensus_scaling: ScalingParams,
    pub frame: AccelFrame,
}

impl Engine {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        Ok(Self {
            sensing_adjacency: config.sensing.laplacian_bundle().adjacency,
            actuation_laplacian: config.actuation.laplacian_bundle().laplacian,
            observer: ObserverParams {
                k1: config.gains.k1,
                k2: config.gains.k2,
            },
            guidance: GuidanceParams {
                m1: config.gains.m1,
                m2: config.gains.m2,
                c_factor: config.c_factor,
                a_max: config.a_max(),
            },
            observer_scaling: ScalingParams::new(config.times.t_o, config.times.observer_guard)?,
            consensus_scaling: ScalingParams::new(config.times.t_a, config.times.consensus_guard)?,
            frame: config.accel_frame,
        })
    }

    /// Drops every edge touching a pursuer that is no longer alive.
    pub fn rebuild(&mut self, config: &ScenarioConfig, alive: &[bool]) {
        let dead_sensing: Vec<usize> = (0..alive.len()).filter(|&i| !alive[i]).map(|i| i + 1).collect();
        let dead_actuation: Vec<usize> = (0..alive.len()).filter(|&i| !alive[i]).collect();
        self.sensing_adjacency = config
            .sensing
            .without_edges_of(&dead_sensing)
            .laplacian_bundle()
            .adjacency;
        self.actuation_laplacian = config
            .actuation
            .without_edges_of(&dead_actuation)
            .laplacian_bundle()
            .laplacian;
    }
}

#[derive(Debug, Clone)]
struct Joint {
    target: Vector4<f64>,
    /// `[x, y, gamma, speed]` per pursuer.
    truth: Vec<[f64; 4]>,
    est: Vec<Vector4<f64>>,
}

impl Joint {
    fn from_state(s: &SimState) -> Self {
        Self {
            target: s.target.psi,
            truth: s.pursuers.iter().map(|p| [p.x, p.y, p.gamma, p.speed]).collect(),
            est: s.estimates.clone(),
        }
    }

    fn axpy(&self, rates: &Joint, h: f64) -> Joint {
        Joint {
            target: self.target + rates.target * h,
            truth: self
                .truth
                .iter()
                .zip(&rates.truth)
                .map(|(x, d)| [x[0] + d[0] * h, x[1] + d[1] * h, x[2] + d[2] * h, x[3] + d[3] * h])
                .collect(),
            est: self.est.iter().zip(&rates.est).map(|(x, d)| x + d * h).collect(),
        }
    }

    fn pursuer(&self, i: usize, alive: bool) -> PursuerTruth {
        let [x, y, gamma, speed] = self.truth[i];
        PursuerTruth { x, y, gamma, speed, alive }
    }
}

/// Per-pursuer quantities produced while evaluating one stage.
#[derive(Debug, Clone)]
struct StageOutput {
    commands: Vec<f64>,
    guarded: Vec<bool>,
    tgo_est: Vec<Option<f64>>,
}

fn evaluate(
    t: f64,
    x: &Joint,
    alive: &[bool],
    last_command: &[f64],
    engine: &Engine,
) -> Result<(Joint, StageOutput)> {
    let n = alive.len();
    let mut rates = Joint {
        target: target_derivative(&x.target),
        truth: vec![[0.0; 4]; n],
        est: vec![Vector4::zeros(); n],
    };
    let mut out = StageOutput {
        commands: vec![0.0; n],
        guarded: vec![false; n],
        tgo_est: vec![None; n],
    };

    let mut estimated = Vec::with_capacity(n);
    let mut tgo_hat = vec![0.0; n];
    for i in 0..n {
        if !alive[i] {
            estimated.push(None);
            continue;
        }
        let p = x.pursuer(i, true);
        match estimated_engagement(&x.est[i], &p) {
            Ok(e) => {
                let c = engine.guidance.c_factor * (p.speed + e.target_speed);
                let tgo = time_to_go(e.r, e.v_r, e.v_theta, c).map_err(|_| Error::NonFinite {
                    t,
                    pursuer: i + 1,
                    term: "estimated time-to-go",
                })?;
                tgo_hat[i] = tgo;
                out.tgo_est[i] = Some(tgo);
                estimated.push(Some((e, c)));
            }
            Err(_) => estimated.push(None),
        }
    }

    let a_max = engine.guidance.a_max;
    let psi = x.target;
    let truth_target = TargetState { psi };
    for i in 0..n {
        if !alive[i] {
            continue;
        }
        let p = x.pursuer(i, true);
        let (command, los) = match estimated[i] {
            Some((e, c)) => {
                let u_c = consensus_input(
                    i,
                    &tgo_hat,
                    &engine.actuation_laplacian,
                    t,
                    &engine.guidance,
                    &engine.consensus_scaling,
                );
                let command = guidance_command(&e, u_c, c).ok().flatten();
                (command, e.theta)
            }
            None => (None, p.gamma),
        };
        let a = match command {
            Some(a) if a.is_finite() => saturate(a, a_max),
            _ => {
                log::debug!("t = {t}: pursuer {} inside the collision-course guard", i + 1);
                out.guarded[i] = true;
                if last_command[i] < 0.0 {
                    -a_max
                } else {
                    a_max
                }
            }
        };
        out.commands[i] = a;
        let los = match engine.frame {
            AccelFrame::EstimatedLos => los,
            AccelFrame::TrueLos => relative_kinematics(&p, &truth_target)
                .map(|e| e.theta)
                .unwrap_or(los),
        };
        let r = pursuer_derivatives(&p, los, a).map_err(|_| Error::NonFinite {
            t,
            pursuer: i + 1,
            term: "pursuer speed",
        })?;
        rates.truth[i] = [r.x_dot, r.y_dot, r.gamma_dot, r.speed_dot];

        let delta = relative_estimation_error(i, &x.est, &psi, &engine.sensing_adjacency);
        rates.est[i] = observer_derivative(&x.est[i], &delta, t, &engine.observer, &engine.observer_scaling);
    }
    Ok((rates, out))
}

/// Diagnostics of one step: the stage-one commands and exchanged time-to-go.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub commands: Vec<f64>,
    pub tgo_est: Vec<Option<f64>>,
}

/// One classical RK4 step. Dead pursuers keep their state.
pub fn step(state: &SimState, dt: f64, engine: &Engine) -> Result<(SimState, StepOutput)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("step size must be positive, got {dt}")));
    }
    let alive = state.alive();
    let t = state.t;
    let x = Joint::from_state(state);
    let (k1, out) = evaluate(t, &x, &alive, &state.last_command, engine)?;
    let (k2, _) = evaluate(t + dt / 2.0, &x.axpy(&k1, dt / 2.0), &alive, &state.last_command, engine)?;
    let (k3, _) = evaluate(t + dt / 2.0, &x.axpy(&k2, dt / 2.0), &alive, &state.last_command, engine)?;
    let (k4, _) = evaluate(t + dt, &x.axpy(&k3, dt), &alive, &state.last_command, engine)?;

    let sixth = dt / 6.0;
    let mut next = state.clone();
    next.step = state.step + 1;
    next.t = next.step as f64 * dt;
    next.target.psi = x.target + (k1.target + k2.target * 2.0 + k3.target * 2.0 + k4.target) * sixth;
    for (i, &live) in alive.iter().enumerate() {
        if !live {
            continue;
        }
        let mut s = x.truth[i];
        for (c, v) in s.iter_mut().enumerate() {
            *v += (k1.truth[i][c] + 2.0 * k2.truth[i][c] + 2.0 * k3.truth[i][c] + k4.truth[i][c]) * sixth;
        }
        let p = &mut next.pursuers[i];
        p.x = s[0];
        p.y = s[1];
        p.gamma = s[2];
        p.speed = s[3];
        next.estimates[i] = x.est[i] + (k1.est[i] + k2.est[i] * 2.0 + k3.est[i] * 2.0 + k4.est[i]) * sixth;
        if !out.guarded[i] {
            next.last_command[i] = out.commands[i];
        }
        for (value, term) in [
            (p.x, "x"),
            (p.y, "y"),
            (p.gamma, "flight-path angle"),
            (p.speed, "speed"),
        ] {
            if !value.is_finite() {
                return Err(Error::NonFinite { t: next.t, pursuer: i + 1, term });
            }
        }
        if !p.speed.is_finite() || p.speed <= 0.0 {
            return Err(Error::NonFinite { t: next.t, pursuer: i + 1, term: "speed" });
        }
        if !next.estimates[i].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { t: next.t, pursuer: i + 1, term: "target estimate" });
        }
    }
    Ok((
        next,
        StepOutput {
            commands: out.commands,
            tgo_est: out.tgo_est,
        },
    ))
}

fn relative_position(p: &PursuerTruth, target: &TargetState) -> (f64, f64) {
    (target.psi[0] - p.x, target.psi[1] - p.y)
}

/// Captures inside the step from `prev` to `next`.
///
/// A pursuer is captured when its range drops below `threshold`; the crossing
/// time is interpolated linearly in range. A pursuer that flies through the
/// capture circle inside one step (both endpoints outside) is caught by the
/// closest approach of the straight-line relative motion over the step.
pub fn detect_interception(prev: &SimState, next: &SimState, threshold: f64) -> Vec<(usize, Interception)> {
    let dt = next.t - prev.t;
    let mut found = Vec::new();
    for i in 0..prev.pursuers.len() {
        if !prev.pursuers[i].alive || !next.pursuers[i].alive {
            continue;
        }
        let (x0, y0) = relative_position(&prev.pursuers[i], &prev.target);
        let (x1, y1) = relative_position(&next.pursuers[i], &next.target);
        let (r0, r1) = (x0.hypot(y0), x1.hypot(y1));
        let (dx, dy) = (x1 - x0, y1 - y0);
        let span = dx * dx + dy * dy;
        let s_min = if span > 0.0 {
            (-(x0 * dx + y0 * dy) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let closest = (x0 + s_min * dx).hypot(y0 + s_min * dy);
        let record = if r1 < threshold {
            let s = if r0 > r1 && r0 >= threshold {
                (r0 - threshold) / (r0 - r1)
            } else {
                0.0
            };
            Some(Interception {
                t: prev.t + s * dt,
                miss_distance: closest.min(r1),
            })
        } else if closest < threshold {
            Some(Interception {
                t: prev.t + s_min * dt,
                miss_distance: closest,
            })
        } else {
            None
        };
        if let Some(rec) = record {
            found.push((i, rec));
        }
    }
    found
}

/// Marks `pursuer` failed at `t_fail`. A pursuer that is already out of play
/// is left untouched.
pub fn inject_failure(state: &SimState, pursuer: usize, t_fail: f64) -> SimState {
    let mut next = state.clone();
    if let Some(p) = next.pursuers.get_mut(pursuer) {
        if p.alive {
            p.alive = false;
            next.failed[pursuer] = Some(t_fail);
        }
    }
    next
}

/// Structural problems with the graphs that remain after removing the
/// pursuers that are no longer alive, as human-readable warnings.
pub fn survivor_warnings(config: &ScenarioConfig, alive: &[bool]) -> Vec<String> {
    let survivors: Vec<usize> = (0..alive.len()).filter(|&i| alive[i]).collect();
    if survivors.is_empty() {
        return Vec::new();
    }
    let sensing_keep: Vec<usize> = std::iter::once(0).chain(survivors.iter().map(|i| i + 1)).collect();
    let sensing = config.sensing.induced(&sensing_keep).expect("indices in range");
    let actuation = config.actuation.induced(&survivors).expect("indices in range");
    let mut out = Vec::new();
    if !sensing.has_spanning_tree(0).unwrap_or(false) {
        out.push("survivor sensing graph lost its spanning tree rooted at the target".to_string());
    }
    if !actuation.is_strongly_connected() {
        out.push("survivor actuation graph not strongly connected".to_string());
    }
    if out.is_empty() {
        match design_gains(&sensing, &actuation) {
            Ok(d) => {
                let g = &config.gains;
                if g.k1 <= d.observer.k1_min {
                    out.push(format!("K1 = {} is below the survivor floor {}", g.k1, d.observer.k1_min));
                }
                if g.k2 < d.observer.k2_min {
                    out.push(format!("K2 = {} is below the survivor floor {}", g.k2, d.observer.k2_min));
                }
                if g.m2 < d.m2_min {
                    out.push(format!("M2 = {} is below the survivor floor {}", g.m2, d.m2_min));
                }
            }
            Err(e) => out.push(format!("survivor graphs: {e}")),
        }
    }
    out
}

/// Per-agent row of a trace sample.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSample {
    pub x: f64,
    pub y: f64,
    pub gamma_deg: f64,
    pub speed: f64,
    pub a_cmd: f64,
    pub tgo_true: Option<f64>,
    pub tgo_est: Option<f64>,
    pub obs_err: Option<f64>,
    /// True range; absent once the pursuer is out of play.
    pub r: Option<f64>,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub target: (f64, f64),
    pub pursuers: Vec<AgentSample>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulationTrace {
    pub samples: Vec<Sample>,
}

impl SimulationTrace {
    /// Max pairwise spread of true time-to-go over active pursuers.
    pub fn tgo_spread(sample: &Sample) -> Option<f64> {
        let values: Vec<f64> = sample
            .pursuers
            .iter()
            .filter(|a| a.active)
            .filter_map(|a| a.tgo_true)
            .collect();
        if values.is_empty() {
            return None;
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(hi - lo)
    }

    pub fn max_obs_err(sample: &Sample) -> Option<f64> {
        sample
            .pursuers
            .iter()
            .filter(|a| a.active)
            .filter_map(|a| a.obs_err)
            .reduce(f64::max)
    }

    /// The last sample at or before `t`.
    pub fn sample_at(&self, t: f64) -> Option<&Sample> {
        self.samples.iter().take_while(|s| s.t <= t + 1e-9).last()
    }
}

/// Thresholds used to summarise a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Absolute pairwise time-to-go spread (s).
    pub consensus: f64,
    /// Observer error relative to its initial maximum.
    pub observer: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            consensus: 0.05,
            observer: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EngagementMetrics {
    pub intercept_times: Vec<Option<f64>>,
    pub miss_distances: Vec<Option<f64>>,
    pub failed: Vec<Option<f64>>,
    pub mean_intercept_time: Option<f64>,
    pub spread: Option<f64>,
    pub consensus_time: Option<f64>,
    pub observer_convergence_time: Option<f64>,
    pub timed_out: bool,
    pub missed: Vec<usize>,
    pub warnings: Vec<String>,
}

impl EngagementMetrics {
    pub fn intercepting(&self) -> Vec<f64> {
        self.intercept_times.iter().flatten().copied().collect()
    }
}

/// Summarises a finished run.
pub fn metrics(trace: &SimulationTrace, final_state: &SimState, tol: &Tolerances) -> EngagementMetrics {
    let intercept_times: Vec<_> = final_state.intercepted.iter().map(|r| r.map(|i| i.t)).collect();
    let miss_distances = final_state.intercepted.iter().map(|r| r.map(|i| i.miss_distance)).collect();
    let times: Vec<f64> = intercept_times.iter().flatten().copied().collect();
    let (mean_intercept_time, spread) = if times.is_empty() {
        (None, None)
    } else {
        let lo = times.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (Some(times.iter().sum::<f64>() / times.len() as f64), Some(hi - lo))
    };
    let consensus_time = trace
        .samples
        .iter()
        .find(|s| SimulationTrace::tgo_spread(s).is_some_and(|d| d < tol.consensus))
        .map(|s| s.t);
    let initial = trace.samples.first().and_then(SimulationTrace::max_obs_err);
    let observer_convergence_time = initial.and_then(|e0| {
        trace
            .samples
            .iter()
            .find(|s| SimulationTrace::max_obs_err(s).is_some_and(|e| e <= tol.observer * e0))
            .map(|s| s.t)
    });
    let missed: Vec<usize> = (0..final_state.pursuers.len())
        .filter(|&i| final_state.intercepted[i].is_none() && final_state.failed[i].is_none())
        .collect();
    EngagementMetrics {
        intercept_times,
        miss_distances,
        failed: final_state.failed.clone(),
        mean_intercept_time,
        spread,
        consensus_time,
        observer_convergence_time,
        timed_out: !missed.is_empty(),
        missed,
        warnings: Vec::new(),
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: SimulationTrace,
    pub metrics: EngagementMetrics,
    pub final_state: SimState,
}

fn sample(state: &SimState, config: &ScenarioConfig, out: &StepOutput) -> Sample {
    let target = state.target;
    let target_speed = target.speed();
    let pursuers = state
        .pursuers
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let truth = relative_kinematics(p, &target).ok();
            if !p.alive {
                return AgentSample {
                    x: p.x,
                    y: p.y,
                    gamma_deg: p.gamma.to_degrees(),
                    speed: p.speed,
                    a_cmd: 0.0,
                    tgo_true: None,
                    tgo_est: None,
                    obs_err: None,
                    r: None,
                    active: false,
                };
            }
            let tgo_true = truth.and_then(|e| {
                time_to_go(e.r, e.v_r, e.v_theta, config.c_factor * (p.speed + target_speed)).ok()
            });
            AgentSample {
                x: p.x,
                y: p.y,
                gamma_deg: p.gamma.to_degrees(),
                speed: p.speed,
                a_cmd: out.commands[i],
                tgo_true,
                tgo_est: out.tgo_est[i],
                obs_err: Some((state.estimates[i] - target.psi).norm()),
                r: truth.map(|e| e.r),
                active: true,
            }
        })
        .collect();
    Sample {
        t: state.t,
        target: (target.psi[0], target.psi[1]),
        pursuers,
    }
}

/// Runs a scenario with its configured step, capture radius and horizon.
pub fn run(config: &ScenarioConfig) -> Result<RunOutput> {
    run_with(config, &Tolerances::default())
}

pub fn run_with(config: &ScenarioConfig, tol: &Tolerances) -> Result<RunOutput> {
    let dt = config.times.dt;
    let mut engine = Engine::new(config)?;
    let mut state = SimState::initial(config);
    let mut trace = SimulationTrace::default();
    let mut warnings = Vec::new();
    let stride = ((config.times.sample_interval / dt).round() as u64).max(1);
    let max_steps = (config.times.t_max / dt - 1e-9).ceil().max(0.0) as u64;
    let mut pending: Vec<_> = config.failures.clone();
    pending.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut pending = pending.into_iter().peekable();

    while state.step < max_steps {
        let mut changed = false;
        while let Some(f) = pending.next_if(|f| f.t <= state.t + 1e-9 * dt) {
            if state.pursuers[f.pursuer].alive {
                state = inject_failure(&state, f.pursuer, state.t);
                changed = true;
                let alive = state.alive();
                for w in survivor_warnings(config, &alive) {
                    warnings.push(format!("t = {}: pursuer {} failed; {w}", state.t, f.pursuer + 1));
                }
            }
        }
        if changed {
            engine.rebuild(config, &state.alive());
        }
        if !state.any_alive() {
            break;
        }

        let (mut next, out) = step(&state, dt, &engine)?;
        if state.step.is_multiple_of(stride) {
            trace.samples.push(sample(&state, config, &out));
        }
        let captures = detect_interception(&state, &next, config.capture_radius);
        if !captures.is_empty() {
            for (i, rec) in captures {
                next.intercepted[i] = Some(rec);
                next.pursuers[i].alive = false;
            }
            engine.rebuild(config, &next.alive());
        }
        state = next;
        if !state.any_alive() {
            break;
        }
    }

    let mut m = metrics(&trace, &state, tol);
    m.warnings = warnings;
    Ok(RunOutput {
        trace,
        metrics: m,
        final_state: state,
    })
}
