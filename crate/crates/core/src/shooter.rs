//! Phase-plane shooting for `φ² + φ'² + 2φφ'' = 1`.
//!
//! With `u = φ^{3/2}` and `p = u'` the equation becomes
//! `u'' = ¾(u^{-1/3} − u)`, which conserves `E = 3u² + 4p² − 9u^{2/3}`.
//! Metrics smooth at a pole (`φ(0) = 0`, `φ'(0) = 1`) lie on `E = 0`; that
//! branch rises past the cylinder value `u = 1`, turns at `u = 3^{3/4}` and
//! falls back to `u = 0` at finite radius, so it never closes up into a
//! complete metric on `ℝ³`.

use serde::{Deserialize, Serialize};

use crate::ode::{self, Direction, EventSpec, OdeProblem, Termination, Tolerances};
use crate::{csv, Error, Result};

/// A point `(r, u, p)` of the phase plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub r: f64,
    pub u: f64,
    pub p: f64,
}

impl PhaseState {
    pub fn new(r: f64, u: f64, p: f64) -> Self {
        Self { r, u, p }
    }

    /// `(φ, φ')` recovered from `u = φ^{3/2}`, `p = (3/2) φ^{1/2} φ'`.
    pub fn phi(&self) -> (f64, f64) {
        let phi = self.u.cbrt().powi(2);
        let dphi = if phi > 0.0 {
            2.0 * self.p / (3.0 * phi.sqrt())
        } else {
            f64::NAN
        };
        (phi, dphi)
    }
}

/// `(u', p') = (p, ¾(u^{-1/3} − u))`.
pub fn phase_rhs(state: &PhaseState) -> Result<[f64; 2]> {
    if !(state.u > 0.0) || !state.p.is_finite() {
        return Err(Error::invalid(format!(
            "phase_rhs needs u > 0 (got u = {}); start near the origin with series_start",
            state.u
        )));
    }
    Ok([state.p, accel(state.u)])
}

fn accel(u: f64) -> f64 {
    if u > 0.0 {
        0.75 * (1.0 / u.cbrt() - u)
    } else {
        f64::NAN
    }
}

/// `E = 3u² + 4p² − 9u^{2/3}`.
pub fn orbit_invariant(state: &PhaseState) -> f64 {
    let c = state.u.cbrt();
    3.0 * state.u * state.u + 4.0 * state.p * state.p - 9.0 * c * c
}

/// Taylor coefficients of the pole solution `φ = r + c₃r³ + c₅r⁵ + …`.
pub const SERIES_C3: f64 = -1.0 / 18.0;
pub const SERIES_C5: f64 = 1.0 / 1080.0;

/// Largest admissible switch radius for [`series_start`].
pub const MAX_SWITCH: f64 = 0.1;

/// State on the smooth-pole branch at `r_switch`, from the odd series of `φ`.
pub fn series_start(r_switch: f64) -> Result<PhaseState> {
    if !(r_switch > 0.0 && r_switch <= MAX_SWITCH) {
        return Err(Error::invalid(format!(
            "series switch radius must lie in (0, {MAX_SWITCH}] (got {r_switch})"
        )));
    }
    let r = r_switch;
    let r2 = r * r;
    let phi = r * (1.0 + r2 * (SERIES_C3 + r2 * SERIES_C5));
    let dphi = 1.0 + r2 * (3.0 * SERIES_C3 + 5.0 * SERIES_C5 * r2);
    Ok(PhaseState {
        r,
        u: phi.powf(1.5),
        p: 1.5 * phi.sqrt() * dphi,
    })
}

/// Settings for [`shoot_r3_branch`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShootConfig {
    pub r_switch: f64,
    /// `u` level treated as reaching zero.
    pub u_floor: f64,
    /// Give up (without reaching the floor) beyond this radius.
    pub r_max: f64,
    pub tolerances: Tolerances,
}

impl Default for ShootConfig {
    fn default() -> Self {
        Self {
            r_switch: 0.05,
            u_floor: 1e-8,
            r_max: 50.0,
            tolerances: Tolerances::default(),
        }
    }
}

/// The four radii tracked along the pole branch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Milestones {
    /// `u` first rises through 1.
    pub r1: Option<f64>,
    /// `p` falls through 0, where `u` is maximal.
    pub r2: Option<f64>,
    /// `u` falls back through 1.
    pub r3: Option<f64>,
    /// `u` reaches the floor.
    pub r4: Option<f64>,
}

impl Milestones {
    pub fn all_present(&self) -> bool {
        self.r1.is_some() && self.r2.is_some() && self.r3.is_some() && self.r4.is_some()
    }

    pub fn strictly_increasing(&self) -> bool {
        match (self.r1, self.r2, self.r3, self.r4) {
            (Some(a), Some(b), Some(c), Some(d)) => a < b && b < c && c < d,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShootingReport {
    pub milestones: Milestones,
    pub u_max: f64,
    pub invariant_initial: f64,
    /// `max |E(r) − E(r_start)|` over accepted steps.
    pub invariant_drift: f64,
    pub terminated_at_zero: bool,
    pub termination: Termination,
    /// Slope at the floor, and the value `−½√(9u^{2/3} − 3u²)` forced by `E = 0`.
    pub p_at_floor: Option<f64>,
    pub p_at_floor_predicted: Option<f64>,
    pub steps: usize,
}

impl ShootingReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Accepted steps of a phase-plane integration plus located events.
#[derive(Clone, Debug)]
pub struct PhaseTrajectory {
    pub states: Vec<PhaseState>,
    /// `(name, state)` for every located event, in order.
    pub events: Vec<(String, PhaseState)>,
    pub termination: Termination,
    inner: ode::Trajectory,
}

impl PhaseTrajectory {
    /// Dense-output state at `r`, if covered.
    pub fn at(&self, r: f64) -> Option<PhaseState> {
        self.inner.interpolate(r).map(|y| PhaseState::new(r, y[0], y[1]))
    }

    pub fn last(&self) -> PhaseState {
        *self.states.last().expect("trajectory holds its start")
    }

    pub fn events_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a PhaseState> + 'a {
        self.events.iter().filter(move |(n, _)| n == name).map(|(_, s)| s)
    }

    pub fn invariant_drift(&self) -> f64 {
        let e0 = orbit_invariant(&self.states[0]);
        self.states
            .iter()
            .map(|s| (orbit_invariant(s) - e0).abs())
            .fold(0.0, f64::max)
    }

    /// Columns `r,u,p,E`, one row per accepted step.
    pub fn to_csv(&self) -> String {
        csv::render(
            &["r", "u", "p", "E"],
            self.states
                .iter()
                .map(|s| vec![s.r, s.u, s.p, orbit_invariant(s)]),
        )
    }
}

fn run(
    start: PhaseState,
    r_end: f64,
    events: &[EventSpec<'_>],
    tol: &Tolerances,
) -> Result<PhaseTrajectory> {
    if !(start.u > 0.0) || !start.p.is_finite() || !start.r.is_finite() {
        return Err(Error::invalid(format!(
            "start state needs u > 0 and finite r, p (got {start:?})"
        )));
    }
    let problem = OdeProblem::new(
        |_r, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = accel(y[0]);
        },
        start.r,
        vec![start.u, start.p],
        r_end,
    );
    let traj = ode::integrate(&problem, events, tol)?;
    let states = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&r, y)| PhaseState::new(r, y[0], y[1]))
        .collect();
    let events = traj
        .events
        .iter()
        .map(|e| (e.name.clone(), PhaseState::new(e.t, e.state[0], e.state[1])))
        .collect();
    Ok(PhaseTrajectory {
        states,
        events,
        termination: traj.termination,
        inner: traj,
    })
}

/// Integrates an arbitrary interior start towards `r_end` (either direction),
/// recording every zero of `p` (`p_zero_rising` / `p_zero_falling` in the
/// direction of increasing `r`) and stopping if `u` drops to `u_floor`.
pub fn shoot_from(
    start: PhaseState,
    r_end: f64,
    u_floor: f64,
    tol: &Tolerances,
) -> Result<PhaseTrajectory> {
    let sign = (r_end - start.r).signum();
    // Indicators are oriented along the integration direction; flip p so that
    // "rising" always means rising in r.
    let events = [
        EventSpec::new("p_zero_rising", dir_for(sign, Direction::Rising), false, |_, y| y[1]),
        EventSpec::new("p_zero_falling", dir_for(sign, Direction::Falling), false, |_, y| y[1]),
        EventSpec::new("u_floor", Direction::Falling, true, move |_, y| y[0] - u_floor),
    ];
    run(start, r_end, &events, tol)
}

fn dir_for(sign: f64, d: Direction) -> Direction {
    match (sign < 0.0, d) {
        (true, Direction::Rising) => Direction::Falling,
        (true, Direction::Falling) => Direction::Rising,
        (_, d) => d,
    }
}

/// Follows the smooth-pole branch from its series start until `u` returns to the floor.
pub fn shoot_r3_branch(cfg: &ShootConfig) -> Result<(ShootingReport, PhaseTrajectory)> {
    if !(cfg.u_floor > 0.0 && cfg.u_floor < 1.0) {
        return Err(Error::invalid("u_floor must lie in (0, 1)"));
    }
    let start = series_start(cfg.r_switch)?;
    if !(cfg.r_max > start.r) {
        return Err(Error::invalid("r_max must exceed the switch radius"));
    }
    let floor = cfg.u_floor;
    let events = [
        EventSpec::new("u_one_rising", Direction::Rising, false, |_, y| y[0] - 1.0),
        EventSpec::new("p_zero_falling", Direction::Falling, false, |_, y| y[1]),
        EventSpec::new("u_one_falling", Direction::Falling, false, |_, y| y[0] - 1.0),
        EventSpec::new("u_floor", Direction::Falling, true, move |_, y| y[0] - floor),
    ];
    let traj = run(start, cfg.r_max, &events, &cfg.tolerances)?;

    let first = |name: &str| traj.events_named(name).next().copied();
    let at_max = first("p_zero_falling");
    let at_floor = first("u_floor");
    let milestones = Milestones {
        r1: first("u_one_rising").map(|s| s.r),
        r2: at_max.map(|s| s.r),
        r3: first("u_one_falling").map(|s| s.r),
        r4: at_floor.map(|s| s.r),
    };
    let u_max = match at_max {
        Some(s) => s.u,
        None => traj.states.iter().map(|s| s.u).fold(f64::NEG_INFINITY, f64::max),
    };
    let report = ShootingReport {
        milestones,
        u_max,
        invariant_initial: orbit_invariant(&start),
        invariant_drift: traj.invariant_drift(),
        terminated_at_zero: at_floor.is_some() && traj.termination == Termination::Event,
        termination: traj.termination,
        p_at_floor: at_floor.map(|s| s.p),
        p_at_floor_predicted: at_floor.map(|s| {
            let c = s.u.cbrt();
            -0.5 * (9.0 * c * c - 3.0 * s.u * s.u).max(0.0).sqrt()
        }),
        steps: traj.states.len() - 1,
    };
    Ok((report, traj))
}

/// The smooth-pole solution in closed form, `φ = √3 sin(r/√3)`, with `(φ, φ', φ'')`.
pub fn pole_branch_exact(r: f64) -> [f64; 3] {
    let s3 = 3.0_f64.sqrt();
    let x = r / s3;
    [s3 * x.sin(), x.cos(), -x.sin() / s3]
}
