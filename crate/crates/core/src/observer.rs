//! Prescribed-time scaling and the distributed target-state observer.
//!
//! The time-varying gain `K1 - K2 φ̇/φ` grows without bound as `t → T⁻`. A
//! fixed-step integrator cannot follow that, so the ratio switches to its
//! terminal value (zero) a guard interval `ε` before the horizon.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector4};

use crate::dynamics::target_derivative;
use crate::error::{Error, Result};
use crate::graph::{eigenvalues, Topology};

/// RK4 stays stable on the real axis up to `|λ dt| ≈ 2.78`; keep a margin.
pub const RK4_STABLE_STEP: f64 = 2.0;

/// Horizon and terminal guard for one prescribed-time gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingParams {
    pub horizon: f64,
    pub guard: f64,
}

impl ScalingParams {
    pub fn new(horizon: f64, guard: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "prescribed horizon must be positive, got {horizon}"
            )));
        }
        if !(guard > 0.0 && guard < horizon) {
            return Err(Error::InvalidParameter(format!(
                "guard {guard} must lie in (0, {horizon})"
            )));
        }
        Ok(Self { horizon, guard })
    }
}

/// Scaling function: `(T/π) sin(πt/T) + t - T` before the horizon, `1` after.
pub fn scaling(t: f64, horizon: f64) -> f64 {
    if t < horizon {
        horizon / PI * (PI * t / horizon).sin() + t - horizon
    } else {
        1.0
    }
}

/// Time derivative of [`scaling`].
pub fn scaling_rate(t: f64, horizon: f64) -> f64 {
    if t < horizon {
        (PI * t / horizon).cos() + 1.0
    } else {
        0.0
    }
}

/// `φ̇/φ`, non-positive before `T - ε` and zero from there on.
pub fn gain_ratio(t: f64, params: &ScalingParams) -> f64 {
    if t < params.horizon - params.guard {
        scaling_rate(t, params.horizon) / scaling(t, params.horizon)
    } else {
        0.0
    }
}

/// Smallest guard that keeps RK4 stable on the stiffest mode of
/// `-(base - ratio_gain·φ̇/φ)·L` with `|φ̇/φ| ≤ 3/τ`. Returns infinity when the
/// constant part alone is already too stiff for `dt`.
pub fn stiffness_guard(dt: f64, base_gain: f64, ratio_gain: f64, spectral_radius: f64) -> f64 {
    let headroom = RK4_STABLE_STEP - base_gain * spectral_radius * dt;
    if headroom <= 0.0 {
        return f64::INFINITY;
    }
    3.0 * ratio_gain * spectral_radius * dt / headroom
}

/// Default guard: ten steps, widened when the gain would otherwise outrun RK4.
pub fn default_guard(dt: f64, base_gain: f64, ratio_gain: f64, spectral_radius: f64) -> f64 {
    (10.0 * dt).max(stiffness_guard(dt, base_gain, ratio_gain, spectral_radius))
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(matrix: &DMatrix<f64>) -> f64 {
    if matrix.is_empty() {
        return 0.0;
    }
    eigenvalues(matrix)
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverParams {
    pub k1: f64,
    pub k2: f64,
}

/// Weighted disagreement of pursuer `i`'s estimate with its in-neighbours.
///
/// `adjacency` is the full sensing adjacency with the target as node 0, so
/// pursuer `i` (0-based) owns row `i + 1`. Only pursuers with a target edge
/// read the true state.
pub fn relative_estimation_error(
    i: usize,
    estimates: &[Vector4<f64>],
    psi: &Vector4<f64>,
    adjacency: &DMatrix<f64>,
) -> Vector4<f64> {
    let row = i + 1;
    let own = &estimates[i];
    let mut delta = Vector4::zeros();
    if adjacency[(row, 0)] != 0.0 {
        delta += adjacency[(row, 0)] * (own - psi);
    }
    for (j, other) in estimates.iter().enumerate() {
        let w = adjacency[(row, j + 1)];
        if w != 0.0 {
            delta += w * (own - other);
        }
    }
    delta
}

/// Observer right-hand side `A ψ̂ - (K1 - K2 φ̇/φ) δ`.
pub fn observer_derivative(
    psi_hat: &Vector4<f64>,
    delta: &Vector4<f64>,
    t: f64,
    params: &ObserverParams,
    scaling: &ScalingParams,
) -> Vector4<f64> {
    let gain = params.k1 - params.k2 * gain_ratio(t, scaling);
    target_derivative(psi_hat) - delta * gain
}

/// Observer-only run over a sensing graph with a constant-velocity target.
#[derive(Debug, Clone)]
pub struct NetworkRun {
    pub target: Vector4<f64>,
    pub estimates: Vec<Vector4<f64>>,
    /// `(t, max_i ‖ψ̂_i - ψ‖)` at every step, starting at `t = 0`.
    pub max_error: Vec<(f64, f64)>,
    /// `(t, ‖δ‖)` over all pursuers at every step.
    pub disagreement: Vec<(f64, f64)>,
}

impl NetworkRun {
    pub fn errors(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| (e - self.target).norm()).collect()
    }
}

fn network_rhs(
    t: f64,
    target: &Vector4<f64>,
    estimates: &[Vector4<f64>],
    adjacency: &DMatrix<f64>,
    params: &ObserverParams,
    scaling: &ScalingParams,
) -> Vec<Vector4<f64>> {
    (0..estimates.len())
        .map(|i| {
            let delta = relative_estimation_error(i, estimates, target, adjacency);
            observer_derivative(&estimates[i], &delta, t, params, scaling)
        })
        .collect()
}

fn stack_disagreement(target: &Vector4<f64>, estimates: &[Vector4<f64>], adjacency: &DMatrix<f64>) -> f64 {
    (0..estimates.len())
        .map(|i| relative_estimation_error(i, estimates, target, adjacency).norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// Integrates the observer network alone with classical RK4 from `t = 0` to
/// `t_end` in `steps` equal steps.
pub fn simulate_network(
    sensing: &Topology,
    target: Vector4<f64>,
    initial_estimates: &[Vector4<f64>],
    params: &ObserverParams,
    scaling: &ScalingParams,
    t_end: f64,
    steps: usize,
) -> Result<NetworkRun> {
    if !sensing.has_leader() || sensing.n_nodes() != initial_estimates.len() + 1 {
        return Err(Error::InvalidTopology(
            "observer network needs a leader graph with one node per pursuer plus the target".into(),
        ));
    }
    if steps == 0 {
        return Err(Error::InvalidParameter("step count must be positive".into()));
    }
    let adjacency = sensing.laplacian_bundle().adjacency;
    let dt = t_end / steps as f64;
    let mut psi = target;
    let mut est = initial_estimates.to_vec();
    let max_err = |psi: &Vector4<f64>, est: &[Vector4<f64>]| {
        est.iter().map(|e| (e - psi).norm()).fold(0.0, f64::max)
    };
    let mut max_error = vec![(0.0, max_err(&psi, &est))];
    let mut disagreement = vec![(0.0, stack_disagreement(&psi, &est, &adjacency))];
    for n in 0..steps {
        let t = n as f64 * dt;
        let shift = |base: &[Vector4<f64>], k: &[Vector4<f64>], h: f64| -> Vec<Vector4<f64>> {
            base.iter().zip(k).map(|(b, d)| b + d * h).collect()
        };
        let p1 = target_derivative(&psi);
        let k1 = network_rhs(t, &psi, &est, &adjacency, params, scaling);
        let psi2 = psi + p1 * (dt / 2.0);
        let e2 = shift(&est, &k1, dt / 2.0);
        let p2 = target_derivative(&psi2);
        let k2 = network_rhs(t + dt / 2.0, &psi2, &e2, &adjacency, params, scaling);
        let psi3 = psi + p2 * (dt / 2.0);
        let e3 = shift(&est, &k2, dt / 2.0);
        let p3 = target_derivative(&psi3);
        let k3 = network_rhs(t + dt / 2.0, &psi3, &e3, &adjacency, params, scaling);
        let psi4 = psi + p3 * dt;
        let e4 = shift(&est, &k3, dt);
        let p4 = target_derivative(&psi4);
        let k4 = network_rhs(t + dt, &psi4, &e4, &adjacency, params, scaling);
        psi += (p1 + p2 * 2.0 + p3 * 2.0 + p4) * (dt / 6.0);
        for (i, e) in est.iter_mut().enumerate() {
            *e += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0);
        }
        let t_next = (n + 1) as f64 * dt;
        max_error.push((t_next, max_err(&psi, &est)));
        disagreement.push((t_next, stack_disagreement(&psi, &est, &adjacency)));
    }
    Ok(NetworkRun {
        target: psi,
        estimates: est,
        max_error,
        disagreement,
    })
}
