//! Planar engagement kinematics between point-mass pursuers and a
//! constant-velocity target.

use std::f64::consts::PI;

use nalgebra::Vector4;

use crate::error::{Error, Result};

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Target position and velocity `[x, y, vx, vy]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetState {
    pub psi: Vector4<f64>,
}

impl TargetState {
    pub fn new(x: f64, y: f64, vx: f64, vy: f64) -> Self {
        Self {
            psi: Vector4::new(x, y, vx, vy),
        }
    }

    /// From speed (m/s) and heading (rad).
    pub fn from_speed_heading(x: f64, y: f64, speed: f64, heading: f64) -> Self {
        Self::new(x, y, speed * heading.cos(), speed * heading.sin())
    }

    pub fn speed(&self) -> f64 {
        self.psi[2].hypot(self.psi[3])
    }
}

/// Ground truth for one pursuer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PursuerTruth {
    pub x: f64,
    pub y: f64,
    /// Flight-path angle (rad).
    pub gamma: f64,
    pub speed: f64,
    pub alive: bool,
}

impl PursuerTruth {
    pub fn new(x: f64, y: f64, gamma: f64, speed: f64) -> Self {
        Self {
            x,
            y,
            gamma,
            speed,
            alive: true,
        }
    }
}

/// Relative range, line-of-sight angle and the two relative velocity components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Engagement {
    pub r: f64,
    pub theta: f64,
    pub v_r: f64,
    pub v_theta: f64,
}

/// Engagement variables a pursuer derives from its own target estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatedEngagement {
    pub r: f64,
    pub theta: f64,
    pub v_r: f64,
    pub v_theta: f64,
    pub target_heading: f64,
    pub target_speed: f64,
}

impl EstimatedEngagement {
    pub fn as_engagement(&self) -> Engagement {
        Engagement {
            r: self.r,
            theta: self.theta,
            v_r: self.v_r,
            v_theta: self.v_theta,
        }
    }
}

/// Time derivatives of a pursuer's truth state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PursuerRates {
    pub gamma_dot: f64,
    pub speed_dot: f64,
    pub x_dot: f64,
    pub y_dot: f64,
}

fn line_of_sight(p: &PursuerTruth, tx: f64, ty: f64) -> Result<(f64, f64)> {
    let (dx, dy) = (tx - p.x, ty - p.y);
    let r = dx.hypot(dy);
    if r == 0.0 {
        return Err(Error::DegenerateGeometry("pursuer coincides with target position"));
    }
    Ok((r, wrap_angle(dy.atan2(dx))))
}

fn project(p: &PursuerTruth, theta: f64, target_speed: f64, target_heading: f64) -> (f64, f64) {
    let v_r = target_speed * (target_heading - theta).cos() - p.speed * (p.gamma - theta).cos();
    let v_theta = target_speed * (target_heading - theta).sin() - p.speed * (p.gamma - theta).sin();
    (v_r, v_theta)
}

fn heading_of(vx: f64, vy: f64) -> f64 {
    if vx == 0.0 && vy == 0.0 {
        0.0
    } else {
        wrap_angle(vy.atan2(vx))
    }
}

/// True relative geometry between a pursuer and the target.
pub fn relative_kinematics(p: &PursuerTruth, target: &TargetState) -> Result<Engagement> {
    let psi = &target.psi;
    let (r, theta) = line_of_sight(p, psi[0], psi[1])?;
    let (v_r, v_theta) = project(p, theta, target.speed(), heading_of(psi[2], psi[3]));
    Ok(Engagement { r, theta, v_r, v_theta })
}

/// Pursuer truth rates under a lateral command `accel` applied normal to the
/// line of sight at angle `los`.
pub fn pursuer_derivatives(p: &PursuerTruth, los: f64, accel: f64) -> Result<PursuerRates> {
    if !(p.speed > 0.0) {
        return Err(Error::NonPositiveSpeed { speed: p.speed });
    }
    let lead = p.gamma - los;
    Ok(PursuerRates {
        gamma_dot: accel * lead.cos() / p.speed,
        speed_dot: accel * lead.sin(),
        x_dot: p.speed * p.gamma.cos(),
        y_dot: p.speed * p.gamma.sin(),
    })
}

/// Constant-velocity target drift: `[vx, vy, 0, 0]`.
pub fn target_derivative(psi: &Vector4<f64>) -> Vector4<f64> {
    Vector4::new(psi[2], psi[3], 0.0, 0.0)
}

/// Engagement variables computed from an estimate of the target state and the
/// pursuer's own (known) position, heading and speed.
pub fn estimated_engagement(psi_hat: &Vector4<f64>, p: &PursuerTruth) -> Result<EstimatedEngagement> {
    let (r, theta) = line_of_sight(p, psi_hat[0], psi_hat[1])
        .map_err(|_| Error::DegenerateGeometry("estimated target coincides with pursuer"))?;
    let target_speed = psi_hat[2].hypot(psi_hat[3]);
    if target_speed == 0.0 {
        log::warn!("estimated target velocity is zero; heading taken as 0 rad");
    }
    let target_heading = heading_of(psi_hat[2], psi_hat[3]);
    let (v_r, v_theta) = project(p, theta, target_speed, target_heading);
    Ok(EstimatedEngagement {
        r,
        theta,
        v_r,
        v_theta,
        target_heading,
        target_speed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const DEG: f64 = PI / 180.0;

    #[test]
    fn moving_target_reference_geometry() {
        let p = PursuerTruth::new(0.0, 0.0, 10.0 * DEG, 55.0);
        let t = TargetState::from_speed_heading(2500.0, 0.0, 50.0, 120.0 * DEG);
        let e = relative_kinematics(&p, &t).unwrap();
        assert_abs_diff_eq!(e.r, 2500.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.theta, 0.0, epsilon = 1e-15);
        // 50 cos 120° - 55 cos 10° and 50 sin 120° - 55 sin 10°
        assert_abs_diff_eq!(e.v_r, -79.164426, epsilon = 1e-5);
        assert_abs_diff_eq!(e.v_theta, 33.750620, epsilon = 1e-5);
    }

    #[test]
    fn collision_course_and_parallel_motion() {
        let p = PursuerTruth::new(0.0, 0.0, 0.3, 40.0);
        let ahead = TargetState::new(1000.0 * 0.3f64.cos(), 1000.0 * 0.3f64.sin(), 0.0, 0.0);
        let e = relative_kinematics(&p, &ahead).unwrap();
        assert_abs_diff_eq!(e.v_r, -40.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.v_theta, 0.0, epsilon = 1e-12);

        let same = TargetState::new(300.0, -200.0, 40.0 * 0.3f64.cos(), 40.0 * 0.3f64.sin());
        let e = relative_kinematics(&p, &same).unwrap();
        assert_abs_diff_eq!(e.v_r, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.v_theta, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn coincident_positions_are_degenerate() {
        let p = PursuerTruth::new(5.0, 5.0, 0.0, 10.0);
        let t = TargetState::new(5.0, 5.0, 1.0, 0.0);
        assert!(matches!(relative_kinematics(&p, &t), Err(Error::DegenerateGeometry(_))));
        assert!(estimated_engagement(&t.psi, &p).is_err());
    }

    #[test]
    fn pursuer_rates() {
        let p = PursuerTruth::new(0.0, 0.0, 0.4, 50.0);
        let free = pursuer_derivatives(&p, 1.0, 0.0).unwrap();
        assert_eq!((free.gamma_dot, free.speed_dot), (0.0, 0.0));
        assert_abs_diff_eq!(free.x_dot, 50.0 * 0.4f64.cos());
        let along = pursuer_derivatives(&p, 0.4, 10.0).unwrap();
        assert_abs_diff_eq!(along.gamma_dot, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(along.speed_dot, 0.0, epsilon = 1e-15);
        let across = pursuer_derivatives(&p, 0.4 - PI / 2.0, 10.0).unwrap();
        assert_abs_diff_eq!(across.gamma_dot, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(across.speed_dot, 10.0, epsilon = 1e-15);
        let stalled = PursuerTruth { speed: 0.0, ..p };
        assert!(pursuer_derivatives(&stalled, 0.0, 1.0).is_err());
    }

    #[test]
    fn target_drift_values() {
        assert_eq!(target_derivative(&Vector4::zeros()), Vector4::zeros());
        let t = TargetState::from_speed_heading(2500.0, 0.0, 50.0, 120.0 * DEG);
        let d = target_derivative(&t.psi);
        assert_abs_diff_eq!(d[0], -25.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d[1], 43.30127, epsilon = 1e-5);
        assert_eq!((d[2], d[3]), (0.0, 0.0));
        let still = TargetState::new(3000.0, 2500.0, 0.0, 0.0);
        assert_eq!(target_derivative(&still.psi), Vector4::zeros());
    }

    #[test]
    fn initial_estimate_of_first_pursuer() {
        let p = PursuerTruth::new(0.0, 0.0, 10.0 * DEG, 55.0);
        let est = estimated_engagement(&Vector4::new(3050.0, 500.0, 25.0, 25.0), &p).unwrap();
        assert_abs_diff_eq!(est.r, 3090.71, epsilon = 0.01);
        assert_abs_diff_eq!(est.theta / DEG, 9.3099, epsilon = 1e-3);
        assert_abs_diff_eq!(est.target_speed, 35.35534, epsilon = 1e-5);
        assert_abs_diff_eq!(est.target_heading, 45.0 * DEG, epsilon = 1e-12);
    }

    #[test]
    fn quadrant_and_zero_velocity_headings() {
        let p = PursuerTruth::new(0.0, 0.0, 0.0, 10.0);
        let est = estimated_engagement(&Vector4::new(100.0, 0.0, 0.0, 3.0), &p).unwrap();
        assert_abs_diff_eq!(est.target_heading, PI / 2.0, epsilon = 1e-15);
        let est = estimated_engagement(&Vector4::new(-100.0, -1.0, -3.0, -3.0), &p).unwrap();
        assert_abs_diff_eq!(est.target_heading, -0.75 * PI, epsilon = 1e-15);
        assert!(est.theta < -PI / 2.0);
        let est = estimated_engagement(&Vector4::new(100.0, 0.0, 0.0, 0.0), &p).unwrap();
        assert_eq!(est.target_heading, 0.0);
    }

    #[test]
    fn wrapping_range() {
        assert_eq!(wrap_angle(-PI), PI);
        assert_eq!(wrap_angle(PI), PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(-7.0), -7.0 + 2.0 * PI, epsilon = 1e-15);
    }
}
