//! True proportional navigation with a closed-form time-to-go, and the
//! prescribed-time consensus term that equalises time-to-go across pursuers.

use nalgebra::DMatrix;

use crate::dynamics::EstimatedEngagement;
use crate::error::{Error, Result};
use crate::observer::{gain_ratio, ScalingParams};

pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Below this transverse speed the command has no usable leverage on time-to-go.
pub const V_THETA_GUARD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceParams {
    pub m1: f64,
    pub m2: f64,
    /// `c_i = c_factor · (V_P + V_T)`.
    pub c_factor: f64,
    /// Lateral acceleration limit (m/s²).
    pub a_max: f64,
}

/// Time-to-go together with the drift and control-effectiveness terms of its
/// rate: `d(t_go)/dt + 1 = f + b·a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TgoTerms {
    pub t_go: f64,
    pub f: f64,
    pub b: f64,
}

fn denominator(v_r: f64, v_theta: f64, c: f64) -> Result<f64> {
    let den = v_theta * v_theta + v_r * v_r + 2.0 * c * v_r;
    if den.abs() < 1e-9 * (v_theta * v_theta + v_r * v_r + 1.0) || !den.is_finite() {
        return Err(Error::SingularTimeToGo { denominator: den });
    }
    Ok(den)
}

/// Closed-form TPN time-to-go. Negative values (opening geometry) are returned
/// as computed.
pub fn time_to_go(r: f64, v_r: f64, v_theta: f64, c: f64) -> Result<f64> {
    let den = denominator(v_r, v_theta, c)?;
    Ok(-r * (v_r + 2.0 * c) / den)
}

pub fn tgo_rate_terms(r: f64, v_r: f64, v_theta: f64, c: f64) -> Result<TgoTerms> {
    let den = denominator(v_r, v_theta, c)?;
    let den2 = den * den;
    let lead = v_r + 2.0 * c;
    Ok(TgoTerms {
        t_go: -r * lead / den,
        f: 2.0 * c * lead * v_theta * v_theta / den2,
        b: -2.0 * lead * v_theta * r / den2,
    })
}

/// Consensus input for pursuer `i`: `-(M1 - M2 φ̇/φ) Σ_j L_ij t̂_go,j`.
///
/// The Laplacian annihilates a common offset, so the agreed time-to-go never
/// needs to be known.
pub fn consensus_input(
    i: usize,
    tgo_hat: &[f64],
    laplacian: &DMatrix<f64>,
    t: f64,
    params: &GuidanceParams,
    scaling: &ScalingParams,
) -> f64 {
    let weighted: f64 = laplacian
        .row(i)
        .iter()
        .zip(tgo_hat)
        .filter(|(l, _)| **l != 0.0)
        .map(|(l, tgo)| l * tgo)
        .sum();
    -(params.m1 - params.m2 * gain_ratio(t, scaling)) * weighted
}

/// Unsaturated command `(u_c - F̂)/B̂` evaluated on the estimated engagement.
/// With `u_c = 0` this is the plain TPN term `c·V̂θ/r̂`.
///
/// Returns `Ok(None)` when `|V̂θ|` is inside the collision-course guard.
pub fn guidance_command(est: &EstimatedEngagement, u_c: f64, c: f64) -> Result<Option<f64>> {
    if est.v_theta.abs() < V_THETA_GUARD {
        return Ok(None);
    }
    let terms = tgo_rate_terms(est.r, est.v_r, est.v_theta, c)?;
    Ok(Some((u_c - terms.f) / terms.b))
}

pub fn saturate(a: f64, a_max: f64) -> f64 {
    a.clamp(-a_max, a_max)
}
