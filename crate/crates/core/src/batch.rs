//! Independent runs fanned out over threads.
//!
//! Each run stays single-threaded and deterministic; only whole runs are
//! distributed. With the `parallel` feature off, [`map`] falls back to a plain
//! sequential loop and results are identical either way.

use nalgebra::Vector4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::graph::random::rooted_sensing_graph;
use crate::graph::{observer_gain_floors, sensing_spectra, target_drift, Topology};
use crate::observer::{default_guard, simulate_network, spectral_radius, ObserverParams, ScalingParams};
use crate::scenario::ScenarioConfig;
use crate::sim::{run, RunOutput};

/// Applies `f` to every item, in parallel when the `parallel` feature is on.
/// Output order always matches input order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_sequential(items, f)
    }
}

/// The sequential reference path, always available.
pub fn map_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

pub fn run_all(configs: &[ScenarioConfig]) -> Vec<Result<RunOutput>> {
    map(configs, run)
}

/// `count` copies of `base` whose initial target estimates are shifted by
/// uniform noise: up to `position_noise` metres per axis and
/// `velocity_noise` m/s per axis. Seeded, so the set is reproducible.
pub fn perturbed_estimates(
    base: &ScenarioConfig,
    count: usize,
    seed: u64,
    position_noise: f64,
    velocity_noise: f64,
) -> Vec<ScenarioConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let mut c = base.clone();
            c.name = format!("{}-mc{k}", base.name);
            for p in &mut c.pursuers {
                for axis in 0..2 {
                    p.estimate[axis] += rng.random_range(-1.0..=1.0) * position_noise;
                    p.estimate[axis + 2] += rng.random_range(-1.0..=1.0) * velocity_noise;
                }
            }
            c
        })
        .collect()
}

/// A randomised observer-only trial: a rooted sensing graph, a moving target
/// and initial estimate errors of prescribed norms.
#[derive(Debug, Clone)]
pub struct ObserverTrial {
    pub sensing: Topology,
    pub target: Vector4<f64>,
    pub initial_estimates: Vec<Vector4<f64>>,
    pub params: ObserverParams,
    pub scaling: ScalingParams,
    pub dt: f64,
}

/// Outcome of one [`ObserverTrial`].
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverOutcome {
    pub n_pursuers: usize,
    pub initial_errors: Vec<f64>,
    pub final_errors: Vec<f64>,
    pub steps: usize,
}

impl ObserverOutcome {
    /// Worst final error of any pursuer relative to its own initial error.
    pub fn worst_relative(&self) -> f64 {
        self.final_errors
            .iter()
            .zip(&self.initial_errors)
            .map(|(f, i)| f / i)
            .fold(0.0, f64::max)
    }
}

/// Largest step whose default guard is at most `guard_fraction · horizon`,
/// found by halving from `horizon / 1000`.
pub fn step_for_guard(horizon: f64, guard_fraction: f64, k1: f64, k2: f64, radius: f64) -> f64 {
    let mut dt = horizon / 1000.0;
    while default_guard(dt, k1, k2, radius) > guard_fraction * horizon {
        dt /= 2.0;
    }
    dt
}

/// Draws a trial with `N ∈ [2, 20]`, gains at `margin` times their floors,
/// initial error norms up to `max_error` and a horizon in `[0.3, 2]` s.
pub fn random_observer_trial(seed: u64, margin: f64, max_error: f64, guard_fraction: f64) -> ObserverTrial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=20);
    let extra = rng.random_range(0.0..0.3);
    let sensing = rooted_sensing_graph(&mut rng, n, extra);
    let block = sensing
        .laplacian_bundle()
        .pursuer_block
        .expect("leader graph has a pursuer block");
    let spectra = sensing_spectra(&block).expect("rooted graphs have a nonsingular pursuer block");
    let floors = observer_gain_floors(&spectra, &target_drift()).expect("finite floors");
    let params = ObserverParams {
        k1: margin * floors.k1_min,
        k2: margin * floors.k2_min,
    };
    let horizon = rng.random_range(0.3..2.0);
    let dt = step_for_guard(horizon, guard_fraction, params.k1, params.k2, spectral_radius(&block));
    let guard = default_guard(dt, params.k1, params.k2, spectral_radius(&block));
    let target = Vector4::new(
        rng.random_range(-5e3..5e3),
        rng.random_range(-5e3..5e3),
        rng.random_range(-100.0..100.0),
        rng.random_range(-100.0..100.0),
    );
    let initial_estimates = (0..n)
        .map(|_| {
            let dir = Vector4::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize();
            target + dir * rng.random_range(1.0..=max_error)
        })
        .collect();
    ObserverTrial {
        sensing,
        target,
        initial_estimates,
        params,
        scaling: ScalingParams::new(horizon, guard).expect("guard below horizon"),
        dt,
    }
}

pub fn run_observer_trial(trial: &ObserverTrial) -> Result<ObserverOutcome> {
    let horizon = trial.scaling.horizon;
    let steps = (horizon / trial.dt).ceil() as usize;
    let out = simulate_network(
        &trial.sensing,
        trial.target,
        &trial.initial_estimates,
        &trial.params,
        &trial.scaling,
        horizon,
        steps,
    )?;
    Ok(ObserverOutcome {
        n_pursuers: trial.initial_estimates.len(),
        initial_errors: trial
            .initial_estimates
            .iter()
            .map(|e| (e - trial.target).norm())
            .collect(),
        final_errors: out.errors(),
        steps,
    })
}
