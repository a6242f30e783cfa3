//! Kinematic, time-to-go and observer identities checked against finite
//! differences and closed forms.

use coguide::dynamics::{
    estimated_engagement, pursuer_derivatives, relative_kinematics, PursuerTruth, TargetState,
};
use coguide::graph::{reference_actuation_graph, reference_sensing_graph};
use coguide::guidance::{consensus_input, time_to_go, tgo_rate_terms, GuidanceParams};
use coguide::observer::{gain_ratio, simulate_network, ObserverParams, ScalingParams};
use nalgebra::Vector4;
use proptest::prelude::*;

fn straight(p: &PursuerTruth, t: f64) -> PursuerTruth {
    PursuerTruth {
        x: p.x + p.speed * p.gamma.cos() * t,
        y: p.y + p.speed * p.gamma.sin() * t,
        ..*p
    }
}

fn drift(target: &TargetState, t: f64) -> TargetState {
    let psi = target.psi;
    TargetState::new(psi[0] + psi[2] * t, psi[1] + psi[3] * t, psi[2], psi[3])
}

fn geometry() -> impl Strategy<Value = (PursuerTruth, TargetState)> {
    (
        -3.0f64..3.0,
        20.0f64..90.0,
        500.0f64..6000.0,
        -3.0f64..3.0,
        0.0f64..60.0,
        -3.0f64..3.0,
    )
        .prop_map(|(gamma, speed, range, bearing, vt, heading)| {
            (
                PursuerTruth::new(0.0, 0.0, gamma, speed),
                TargetState::from_speed_heading(range * bearing.cos(), range * bearing.sin(), vt, heading),
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn range_and_los_rates_match_finite_differences((p, target) in geometry()) {
        let h = 1e-4;
        let e = relative_kinematics(&p, &target).unwrap();
        let ahead = relative_kinematics(&straight(&p, h), &drift(&target, h)).unwrap();
        let behind = relative_kinematics(&straight(&p, -h), &drift(&target, -h)).unwrap();
        let r_dot = (ahead.r - behind.r) / (2.0 * h);
        let mut d_theta = ahead.theta - behind.theta;
        d_theta -= (d_theta / std::f64::consts::TAU).round() * std::f64::consts::TAU;
        prop_assert!((r_dot - e.v_r).abs() < 1e-6 * (1.0 + e.v_r.abs()));
        prop_assert!((d_theta / (2.0 * h) - e.v_theta / e.r).abs() < 1e-7);
    }

    #[test]
    fn perfect_estimate_reproduces_truth((p, target) in geometry()) {
        let truth = relative_kinematics(&p, &target).unwrap();
        let est = estimated_engagement(&target.psi, &p).unwrap();
        prop_assert!((est.r - truth.r).abs() < 1e-9 * truth.r);
        prop_assert!((est.v_r - truth.v_r).abs() < 1e-9 * (1.0 + truth.v_r.abs()));
        prop_assert!((est.v_theta - truth.v_theta).abs() < 1e-9 * (1.0 + truth.v_theta.abs()));
        prop_assert!((est.target_speed - target.speed()).abs() < 1e-9 * (1.0 + target.speed()));
    }

    #[test]
    fn collision_course_identity(r in 1.0f64..1e5, v_r in -900.0f64..-1.0, c_scale in 0.6f64..10.0) {
        let c = c_scale * v_r.abs();
        let tgo = time_to_go(r, v_r, 0.0, c).unwrap();
        prop_assert!((tgo + r / v_r).abs() <= 1e-12 * tgo.abs());
    }

    #[test]
    fn zero_command_keeps_speed_and_heading((p, _target) in geometry(), los in -3.0f64..3.0) {
        let rates = pursuer_derivatives(&p, los, 0.0).unwrap();
        prop_assert_eq!(rates.gamma_dot, 0.0);
        prop_assert_eq!(rates.speed_dot, 0.0);
    }

    #[test]
    fn tgo_rate_terms_match_partial_derivatives((p, target) in geometry(), a in -60.0f64..60.0) {
        let e = relative_kinematics(&p, &target).unwrap();
        let c = 3.0 * (p.speed + target.speed());
        let Ok(terms) = tgo_rate_terms(e.r, e.v_r, e.v_theta, c) else { return Ok(()) };
        // chain rule on the closed form with r' = v_r, v_r' = v_θ²/r, v_θ' = -v_r v_θ/r - a
        let h = 1e-6;
        let tgo = |r: f64, vr: f64, vt: f64| time_to_go(r, vr, vt, c).unwrap();
        let d_r = (tgo(e.r * (1.0 + h), e.v_r, e.v_theta) - tgo(e.r * (1.0 - h), e.v_r, e.v_theta)) / (2.0 * h * e.r);
        let d_vr = (tgo(e.r, e.v_r + h, e.v_theta) - tgo(e.r, e.v_r - h, e.v_theta)) / (2.0 * h);
        let d_vt = (tgo(e.r, e.v_r, e.v_theta + h) - tgo(e.r, e.v_r, e.v_theta - h)) / (2.0 * h);
        let chain = d_r * e.v_r + d_vr * e.v_theta.powi(2) / e.r + d_vt * (-e.v_r * e.v_theta / e.r - a);
        let predicted = -1.0 + terms.f + terms.b * a;
        prop_assert!((chain - predicted).abs() < 1e-5 * (1.0 + predicted.abs() + terms.t_go.abs()),
            "chain {chain} predicted {predicted}");
    }

    #[test]
    fn consensus_ignores_a_common_offset(
        tgo in proptest::collection::vec(0.0f64..200.0, 4),
        offset in -100.0f64..100.0,
        t in 0.0f64..5.0,
    ) {
        let lap = reference_actuation_graph().laplacian_bundle().laplacian;
        let params = GuidanceParams { m1: 1.0, m2: 1.5, c_factor: 3.0, a_max: 68.0 };
        let sc = ScalingParams::new(3.0, 0.01).unwrap();
        let shifted: Vec<f64> = tgo.iter().map(|v| v + offset).collect();
        for i in 0..4 {
            let a = consensus_input(i, &tgo, &lap, t, &params, &sc);
            let b = consensus_input(i, &shifted, &lap, t, &params, &sc);
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn gain_ratio_sign(t in 0.0f64..10.0, horizon in 0.1f64..5.0) {
        let sc = ScalingParams::new(horizon, horizon / 50.0).unwrap();
        let rho = gain_ratio(t, &sc);
        prop_assert!(rho <= 0.0);
        if t >= horizon - sc.guard {
            prop_assert_eq!(rho, 0.0);
        }
    }
}

#[test]
fn exact_estimates_stay_exact() {
    let target = Vector4::new(2500.0, 0.0, -25.0, 43.3);
    let estimates = vec![target; 4];
    let run = simulate_network(
        &reference_sensing_graph(),
        target,
        &estimates,
        &ObserverParams { k1: 8.2, k2: 8.2 },
        &ScalingParams::new(0.6, 0.025).unwrap(),
        1.0,
        1000,
    )
    .unwrap();
    assert!(run.max_error.iter().all(|&(_, e)| e < 1e-9));
}

#[test]
fn reference_observer_meets_its_horizon() {
    let target = Vector4::new(2500.0, 0.0, -25.0, 43.30127);
    let estimates = vec![
        Vector4::new(3050.0, 500.0, 25.0, 25.0),
        Vector4::new(4500.0, 100.0, 20.0, 40.0),
        Vector4::new(2500.0, 200.0, 40.0, 15.0),
        Vector4::new(3500.0, 400.0, 25.0, 25.0),
    ];
    let run = simulate_network(
        &reference_sensing_graph(),
        target,
        &estimates,
        &ObserverParams { k1: 8.236, k2: 8.236 },
        &ScalingParams::new(0.6, 0.0252).unwrap(),
        0.6,
        600,
    )
    .unwrap();
    let initial = run.max_error[0].1;
    let final_error = run.max_error.last().unwrap().1;
    assert!(final_error <= 1e-3 * initial, "{final_error} vs {initial}");
}
