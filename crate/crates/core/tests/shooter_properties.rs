use gflow_core::ode::Tolerances;
use gflow_core::shooter::{
    orbit_invariant, series_start, shoot_from, shoot_r3_branch, PhaseState, ShootConfig,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn invariant_is_conserved(u0 in 0.1f64..3.0, p0 in -2.0f64..2.0) {
        let traj = shoot_from(PhaseState::new(0.0, u0, p0), 8.0, 1e-8, &Tolerances::default()).unwrap();
        prop_assert!(traj.invariant_drift() < 1e-9, "drift {}", traj.invariant_drift());
    }

    #[test]
    fn reversing_p_reflects_the_orbit(u0 in 0.3f64..2.5, p0 in -1.0f64..1.0) {
        let tol = Tolerances::default();
        let fwd = shoot_from(PhaseState::new(0.0, u0, p0), 3.0, 1e-8, &tol).unwrap();
        let bwd = shoot_from(PhaseState::new(0.0, u0, -p0), -3.0, 1e-8, &tol).unwrap();
        let reach = fwd.last().r.min(-bwd.last().r);
        for k in 1..10 {
            let r = reach * k as f64 / 10.0;
            let a = fwd.at(r).unwrap();
            let b = bwd.at(-r).unwrap();
            prop_assert!((a.u - b.u).abs() < 1e-8);
            prop_assert!((a.p + b.p).abs() < 1e-8);
        }
    }
}

#[test]
fn orbit_around_cylinder_closes() {
    let traj = shoot_from(PhaseState::new(0.0, 1.01, 0.0), 20.0, 1e-8, &Tolerances::default()).unwrap();
    let bottom = traj.events_named("p_zero_rising").next().copied().unwrap();
    assert!(bottom.u < 1.0);
    let back = traj
        .events_named("p_zero_falling")
        .find(|s| s.r > bottom.r)
        .copied()
        .unwrap();
    assert!((back.u - 1.01).abs() < 1e-6, "returned to {}", back.u);
    let e0 = orbit_invariant(&PhaseState::new(0.0, 1.01, 0.0));
    assert!((orbit_invariant(&back) - e0).abs() < 1e-9);
}

#[test]
fn switch_radius_does_not_change_the_branch() {
    let tol = Tolerances::default();
    let a = shoot_from(series_start(0.05).unwrap(), 1.5, 1e-8, &tol).unwrap();
    let b = shoot_from(series_start(0.1).unwrap(), 1.5, 1e-8, &tol).unwrap();
    let (sa, sb) = (a.at(1.0).unwrap(), b.at(1.0).unwrap());
    assert!((sa.u - sb.u).abs() < 1e-8 && (sa.p - sb.p).abs() < 1e-8);
}

#[test]
fn positive_energy_orbits_also_reach_zero() {
    let start = PhaseState::new(0.0, 1.0, 1.5);
    assert!(orbit_invariant(&start) > 0.0);
    let traj = shoot_from(start, 30.0, 1e-8, &Tolerances::default()).unwrap();
    assert!(traj.events_named("u_floor").next().is_some());
}

#[test]
fn report_serializes() {
    let (rep, _) = shoot_r3_branch(&ShootConfig::default()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
    assert_eq!(v["terminated_at_zero"], true);
    assert!(v["milestones"]["r4"].is_number());
}
