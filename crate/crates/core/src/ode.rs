//! Adaptive explicit integration with dense output and event location.
//!
//! The stepper is the Dormand–Prince 5(4) pair with its fourth-order
//! continuous extension. Step control is the classical deterministic
//! controller, so a run is bit-reproducible for a given configuration.
//!
//! Events are located on the exact Runge–Kutta step map: once the indicator
//! changes sign across an accepted step, the crossing is refined by an
//! Illinois iteration on `τ ↦ g(t_n + τ, Φ_τ(y_n))`, where `Φ_τ` is a single
//! Dormand–Prince step of length `τ` from the start of the step.

use serde::Serialize;

use crate::{Error, Result};

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Initial value problem `y' = rhs(t, y)`, `y(t0) = y0`, integrated towards `t_end`.
///
/// `t_end` may lie on either side of `t0`; backward runs produce a trajectory
/// whose times decrease monotonically.
pub struct OdeProblem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    pub rhs: F,
    pub t0: f64,
    pub y0: Vec<f64>,
    pub t_end: f64,
}

impl<F> OdeProblem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    pub fn new(rhs: F, t0: f64, y0: Vec<f64>, t_end: f64) -> Self {
        Self { rhs, t0, y0, t_end }
    }

    pub fn dimension(&self) -> usize {
        self.y0.len()
    }
}

/// Crossing direction an event reacts to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Indicator goes from negative to non-negative.
    Rising,
    /// Indicator goes from positive to non-positive.
    Falling,
    Any,
}

type Indicator<'a> = Box<dyn Fn(f64, &[f64]) -> f64 + Send + Sync + 'a>;

/// A scalar indicator whose sign changes are reported as events.
pub struct EventSpec<'a> {
    pub name: String,
    pub indicator: Indicator<'a>,
    pub direction: Direction,
    pub terminal: bool,
}

impl<'a> EventSpec<'a> {
    pub fn new(
        name: impl Into<String>,
        direction: Direction,
        terminal: bool,
        indicator: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'a,
    ) -> Self {
        Self {
            name: name.into(),
            indicator: Box::new(indicator),
            direction,
            terminal,
        }
    }

    fn triggers(&self, g_old: f64, g_new: f64) -> bool {
        if g_old == 0.0 || !g_old.is_finite() || !g_new.is_finite() {
            return false;
        }
        match self.direction {
            Direction::Rising => g_old < 0.0 && g_new >= 0.0,
            Direction::Falling => g_old > 0.0 && g_new <= 0.0,
            Direction::Any => (g_old < 0.0) != (g_new < 0.0) || g_new == 0.0,
        }
    }
}

/// Solver configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Sup-norm of the state above which the run stops with [`Termination::Blowup`].
    pub blowup_ceiling: f64,
    /// The run stops with [`Termination::StepUnderflow`] once
    /// `|h| < min_step_factor · |t_end − t0|`.
    pub min_step_factor: f64,
    pub max_steps: usize,
    /// Upper bound on `|h|`; `None` means `|t_end − t0|`.
    pub max_step: Option<f64>,
    pub initial_step: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-12,
            blowup_ceiling: 1e12,
            min_step_factor: 1e-14,
            max_steps: 2_000_000,
            max_step: None,
            initial_step: None,
        }
    }
}

impl Tolerances {
    pub fn with_tol(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.rtol.is_finite()) || !(self.atol > 0.0 && self.atol.is_finite())
        {
            return Err(Error::invalid(format!(
                "rtol and atol must be positive and finite (got {}, {})",
                self.rtol, self.atol
            )));
        }
        if !(self.blowup_ceiling > 0.0) || !(self.min_step_factor > 0.0) || self.max_steps == 0 {
            return Err(Error::invalid(
                "blowup ceiling, step floor and step budget must be positive",
            ));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::invalid("max_step must be positive"));
            }
        }
        Ok(())
    }
}

/// Why an integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedEnd,
    Event,
    Blowup,
    StepUnderflow,
    MaxSteps,
}

/// A located event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub id: usize,
    pub name: String,
    pub t: f64,
    pub state: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub rhs_evals: usize,
    pub accepted: usize,
    pub rejected: usize,
}

/// Dense-output polynomial for one accepted step.
#[derive(Debug, Clone)]
struct DenseSegment {
    t_old: f64,
    h: f64,
    coeffs: [Vec<f64>; 5],
}

impl DenseSegment {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let theta = (t - self.t_old) / self.h;
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        for i in 0..out.len() {
            out[i] = r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])));
        }
    }
}

/// Output of [`integrate`]: accepted steps, located events and dense output.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub events: Vec<EventRecord>,
    pub termination: Termination,
    pub stats: Stats,
    dense: Vec<DenseSegment>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_first(&self) -> f64 {
        self.times[0]
    }

    pub fn t_last(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial point")
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial point")
    }

    fn forward(&self) -> bool {
        self.t_last() >= self.t_first()
    }

    /// True when `t` lies within the covered time span.
    pub fn covers(&self, t: f64) -> bool {
        let (a, b) = (self.t_first(), self.t_last());
        t >= a.min(b) && t <= a.max(b)
    }

    /// Evaluates the continuous extension at `t`; `None` outside the covered span.
    pub fn interpolate(&self, t: f64) -> Option<Vec<f64>> {
        if !self.covers(t) {
            return None;
        }
        let dim = self.states[0].len();
        if self.dense.is_empty() {
            return Some(self.states[0].clone());
        }
        // Segment k spans times[k] .. times[k+1].
        let k = if self.forward() {
            self.times.partition_point(|&s| s <= t)
        } else {
            self.times.partition_point(|&s| s >= t)
        };
        let k = k.saturating_sub(1).min(self.dense.len() - 1);
        let mut out = vec![0.0; dim];
        self.dense[k].eval(t, &mut out);
        Some(out)
    }

    /// Evaluates one component of the continuous extension.
    pub fn component(&self, t: f64, i: usize) -> Option<f64> {
        self.interpolate(t).map(|y| y[i])
    }

    pub fn event(&self, name: &str) -> Option<&EventRecord> {
        self.events.iter().find(|e| e.name == name)
    }
}

struct Workspace {
    k: [Vec<f64>; 7],
    y_stage: Vec<f64>,
    y_new: Vec<f64>,
    err: Vec<f64>,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            y_stage: vec![0.0; dim],
            y_new: vec![0.0; dim],
            err: vec![0.0; dim],
        }
    }
}

/// One Dormand–Prince step from `(t, y)` with derivative `k1 = f(t, y)`.
/// Fills `ws.y_new`, `ws.err` and all seven stages.
fn dp_step<F>(rhs: &F, t: f64, y: &[f64], k1: &[f64], h: f64, ws: &mut Workspace)
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    ws.k[0].copy_from_slice(k1);
    let Workspace {
        k, y_stage, y_new, err,
    } = ws;
    let [k1, k2, k3, k4, k5, k6, k7] = k;
    for i in 0..n {
        y_stage[i] = y[i] + h * A21 * k1[i];
    }
    rhs(t + C2 * h, y_stage, k2);
    for i in 0..n {
        y_stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
    }
    rhs(t + C3 * h, y_stage, k3);
    for i in 0..n {
        y_stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
    }
    rhs(t + C4 * h, y_stage, k4);
    for i in 0..n {
        y_stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
    }
    rhs(t + C5 * h, y_stage, k5);
    for i in 0..n {
        y_stage[i] =
            y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
    }
    rhs(t + h, y_stage, k6);
    for i in 0..n {
        y_new[i] =
            y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
    }
    rhs(t + h, y_new, k7);
    for i in 0..n {
        err[i] = h
            * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
}

fn dense_segment(t_old: f64, h: f64, y_old: &[f64], ws: &Workspace) -> DenseSegment {
    let n = y_old.len();
    let k = &ws.k;
    let mut c: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
    for i in 0..n {
        let ydiff = ws.y_new[i] - y_old[i];
        let bspl = h * k[0][i] - ydiff;
        c[0][i] = y_old[i];
        c[1][i] = ydiff;
        c[2][i] = bspl;
        c[3][i] = ydiff - h * k[6][i] - bspl;
        c[4][i] = h
            * (D1 * k[0][i]
                + D3 * k[2][i]
                + D4 * k[3][i]
                + D5 * k[4][i]
                + D6 * k[5][i]
                + D7 * k[6][i]);
    }
    DenseSegment { t_old, h, coeffs: c }
}

fn error_norm(y_old: &[f64], y_new: &[f64], err: &[f64], tol: &Tolerances) -> f64 {
    let n = y_old.len() as f64;
    let sum: f64 = y_old
        .iter()
        .zip(y_new)
        .zip(err)
        .map(|((&a, &b), &e)| {
            let sc = tol.atol + tol.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step<F>(rhs: &F, t0: f64, y0: &[f64], f0: &[f64], dir: f64, tol: &Tolerances) -> f64
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let sc: Vec<f64> = y0.iter().map(|y| tol.atol + tol.rtol * y.abs()).collect();
    let rms = |v: &[f64]| -> f64 {
        (v.iter().zip(&sc).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + dir * h0 * f).collect();
    let mut f1 = vec![0.0; n];
    rhs(t0 + dir * h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    let h = (100.0 * h0).min(h1);
    if h.is_finite() && h > 0.0 {
        h
    } else {
        1e-6
    }
}

/// Illinois regula falsi on `phi` over `[0, h]` given a sign change.
fn locate_root(
    phi: &mut dyn FnMut(f64) -> f64,
    h: f64,
    g_a: f64,
    g_b: f64,
    tol: f64,
) -> f64 {
    let (mut a, mut b) = (0.0_f64, h);
    let (mut fa, mut fb) = (g_a, g_b);
    let mut side = 0i8;
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !c.is_finite() || (c - a) * (c - b) > 0.0 {
            c = 0.5 * (a + b);
        }
        let fc = phi(c);
        if fc == 0.0 {
            return c;
        }
        if (fc < 0.0) == (fb < 0.0) {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
    }
    // The point on the post-crossing side, so the indicator has switched sign.
    b
}

/// Integrates `problem` with the given events.
///
/// Terminal events end the run at the located crossing; blowup, step
/// underflow and step-budget exhaustion are reported in
/// [`Trajectory::termination`] rather than as errors.
pub fn integrate<F>(
    problem: &OdeProblem<F>,
    events: &[EventSpec<'_>],
    tol: &Tolerances,
) -> Result<Trajectory>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    tol.validate()?;
    let dim = problem.dimension();
    if dim == 0 {
        return Err(Error::invalid("ODE dimension must be at least 1"));
    }
    if !problem.t0.is_finite() || !problem.t_end.is_finite() || problem.t_end == problem.t0 {
        return Err(Error::invalid("t_end must be finite and differ from t0"));
    }
    if problem.y0.iter().any(|y| !y.is_finite()) {
        return Err(Error::invalid("initial state must be finite"));
    }

    let rhs = &problem.rhs;
    let dir = (problem.t_end - problem.t0).signum();
    let span = (problem.t_end - problem.t0).abs();
    let h_floor = tol.min_step_factor * span;
    let h_max = tol.max_step.unwrap_or(span).min(span);
    let event_tol = 1e-12 * span;

    let mut stats = Stats::default();
    let mut t = problem.t0;
    let mut y = problem.y0.clone();
    let mut f = vec![0.0; dim];
    rhs(t, &y, &mut f);
    stats.rhs_evals += 1;
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(
            "right-hand side is not finite at the initial state",
        ));
    }

    let mut h = tol
        .initial_step
        .unwrap_or_else(|| initial_step(rhs, t, &y, &f, dir, tol))
        .min(h_max)
        .max(h_floor);
    stats.rhs_evals += 1;

    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.indicator)(t, &y)).collect();

    let mut times = vec![t];
    let mut states = vec![y.clone()];
    let mut dense = Vec::new();
    let mut found = Vec::new();
    let mut ws = Workspace::new(dim);
    let mut reject_streak = false;

    let termination = loop {
        if stats.accepted >= tol.max_steps {
            break Termination::MaxSteps;
        }
        if h < h_floor {
            break Termination::StepUnderflow;
        }
        let mut last = false;
        let remaining = (problem.t_end - t).abs();
        if h >= remaining {
            h = remaining;
            last = true;
        }
        let step = dir * h;
        dp_step(rhs, t, &y, &f, step, &mut ws);
        stats.rhs_evals += 6;
        let err = error_norm(&y, &ws.y_new, &ws.err, tol);

        if !err.is_finite() || ws.y_new.iter().any(|v| !v.is_finite()) {
            stats.rejected += 1;
            h *= 0.2;
            reject_streak = true;
            continue;
        }
        if err > 1.0 {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            reject_streak = true;
            continue;
        }

        // Accepted.
        stats.accepted += 1;
        let t_new = if last { problem.t_end } else { t + step };
        let seg = dense_segment(t, step, &y, &ws);

        let g_new: Vec<f64> = events
            .iter()
            .map(|e| (e.indicator)(t_new, &ws.y_new))
            .collect();
        // Earliest triggered event in this step.
        let mut hit: Option<(usize, f64, Vec<f64>)> = None;
        let mut step_events = Vec::new();
        for (id, ev) in events.iter().enumerate() {
            if !ev.triggers(g_prev[id], g_new[id]) {
                continue;
            }
            let y0 = y.clone();
            let f0 = f.clone();
            let mut probe = Workspace::new(dim);
            let mut phi = |tau: f64| -> f64 {
                if tau == 0.0 {
                    return g_prev[id];
                }
                dp_step(rhs, t, &y0, &f0, tau, &mut probe);
                (ev.indicator)(t + tau, &probe.y_new)
            };
            let tol_here = event_tol.min(1e-6 * h).max(4.0 * f64::EPSILON * t.abs());
            let tau = locate_root(&mut phi, step, g_prev[id], g_new[id], tol_here);
            let mut probe = Workspace::new(dim);
            dp_step(rhs, t, &y, &f, tau, &mut probe);
            stats.rhs_evals += 6;
            let rec = (id, t + tau, probe.y_new.clone());
            step_events.push(rec.clone());
            if ev.terminal {
                let earlier = match &hit {
                    Some((_, th, _)) => (rec.1 - *th) * dir < 0.0,
                    None => true,
                };
                if earlier {
                    hit = Some(rec);
                }
            }
        }
        step_events.sort_by(|a, b| ((a.1 - b.1) * dir).total_cmp(&0.0));
        for (id, te, ye) in step_events {
            if let Some((_, th, _)) = &hit {
                if (te - *th) * dir > 0.0 {
                    continue;
                }
            }
            found.push(EventRecord {
                id,
                name: events[id].name.clone(),
                t: te,
                state: ye,
            });
        }

        dense.push(seg);
        if let Some((_, te, ye)) = hit {
            times.push(te);
            states.push(ye);
            break Termination::Event;
        }

        t = t_new;
        y.copy_from_slice(&ws.y_new);
        f.copy_from_slice(&ws.k[6]);
        g_prev = g_new;
        times.push(t);
        states.push(y.clone());

        if y.iter().any(|v| v.abs() > tol.blowup_ceiling) {
            break Termination::Blowup;
        }
        if last {
            break Termination::ReachedEnd;
        }

        let mut fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
        if reject_streak {
            fac = fac.min(1.0);
        }
        reject_streak = false;
        h = (h * fac).min(h_max);
    };

    Ok(Trajectory {
        times,
        states,
        events: found,
        termination,
        stats,
        dense,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> Tolerances {
        Tolerances::with_tol(1e-12, 1e-12)
    }

    #[test]
    fn linear_decay_matches_closed_form() {
        let p = OdeProblem::new(|_t, _y: &[f64], dy: &mut [f64]| dy[0] = -1.0, 0.0, vec![1.0], 0.9);
        let traj = integrate(&p, &[], &tight()).unwrap();
        assert_eq!(traj.termination, Termination::ReachedEnd);
        let y = traj.interpolate(0.5).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_rhs_keeps_state() {
        let x = vec![0.3, -2.0, 7.5];
        let p = OdeProblem::new(
            |_t, _y: &[f64], dy: &mut [f64]| dy.iter_mut().for_each(|d| *d = 0.0),
            0.0,
            x.clone(),
            3.0,
        );
        let traj = integrate(&p, &[], &tight()).unwrap();
        for s in &traj.states {
            assert_eq!(s, &x);
        }
    }

    #[test]
    fn exponential_event_hits_one() {
        let p = OdeProblem::new(|_t, y: &[f64], dy: &mut [f64]| dy[0] = y[0], 0.0, vec![1.0], 2.0);
        let ev = EventSpec::new("x=e", Direction::Rising, true, |_t, y| {
            y[0] - std::f64::consts::E
        });
        let traj = integrate(&p, &[ev], &tight()).unwrap();
        assert_eq!(traj.termination, Termination::Event);
        let e = traj.event("x=e").unwrap();
        assert!((e.t - 1.0).abs() < 1e-9, "event at {}", e.t);
        assert_eq!(traj.t_last(), e.t);
    }

    #[test]
    fn direction_filter_skips_wrong_crossings() {
        // sin(t) crosses zero falling at π and rising at 2π.
        let p = OdeProblem::new(
            |_t, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            vec![0.0, 1.0],
            7.0,
        );
        let rising = EventSpec::new("rise", Direction::Rising, false, |_t, y| y[0]);
        let falling = EventSpec::new("fall", Direction::Falling, false, |_t, y| y[0]);
        let traj = integrate(&p, &[rising, falling], &tight()).unwrap();
        let rises: Vec<f64> = traj.events.iter().filter(|e| e.name == "rise").map(|e| e.t).collect();
        let falls: Vec<f64> = traj.events.iter().filter(|e| e.name == "fall").map(|e| e.t).collect();
        assert_eq!(rises.len(), 1);
        assert_eq!(falls.len(), 1);
        assert!((falls[0] - std::f64::consts::PI).abs() < 1e-9);
        assert!((rises[0] - 2.0 * std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn finite_time_blowup_is_reported() {
        // y' = y², y(0) = 1 blows up at t = 1.
        let p = OdeProblem::new(|_t, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0], 0.0, vec![1.0], 2.0);
        let traj = integrate(&p, &[], &Tolerances::with_tol(1e-10, 1e-10)).unwrap();
        assert!(matches!(
            traj.termination,
            Termination::Blowup | Termination::StepUnderflow
        ));
        assert!(traj.t_last() < 1.0 && traj.t_last() > 0.999);
    }

    #[test]
    fn non_finite_rhs_ends_in_underflow() {
        // sqrt(1 − t) has an infinite slope at t = 1 and is undefined beyond.
        let p = OdeProblem::new(
            |t, _y: &[f64], dy: &mut [f64]| dy[0] = -0.5 / (1.0 - t).sqrt(),
            0.0,
            vec![1.0],
            2.0,
        );
        let traj = integrate(&p, &[], &Tolerances::with_tol(1e-10, 1e-10)).unwrap();
        assert_eq!(traj.termination, Termination::StepUnderflow);
        assert!(traj.t_last() <= 1.0);
    }

    #[test]
    fn rejects_bad_tolerances() {
        let p = OdeProblem::new(|_t, _y: &[f64], dy: &mut [f64]| dy[0] = 0.0, 0.0, vec![1.0], 1.0);
        assert!(integrate(&p, &[], &Tolerances::with_tol(0.0, 1e-9)).is_err());
        assert!(integrate(&p, &[], &Tolerances::with_tol(1e-9, -1.0)).is_err());
        let p = OdeProblem::new(|_t, _y: &[f64], dy: &mut [f64]| dy[0] = 0.0, 1.0, vec![1.0], 1.0);
        assert!(integrate(&p, &[], &tight()).is_err());
    }

    #[test]
    fn backward_run_returns_to_start() {
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0] - 0.1 * y[1] * y[1];
        };
        let y0 = vec![1.0, 0.0];
        let fwd = integrate(&OdeProblem::new(rhs, 0.0, y0.clone(), 3.0), &[], &tight()).unwrap();
        let back = integrate(
            &OdeProblem::new(rhs, 3.0, fwd.last_state().to_vec(), 0.0),
            &[],
            &tight(),
        )
        .unwrap();
        assert!(back.times.windows(2).all(|w| w[1] < w[0]));
        for (a, b) in back.last_state().iter().zip(&y0) {
            assert!((a - b).abs() < 10.0 * 1e-12 * 10.0, "{a} vs {b}");
        }
    }

    #[test]
    fn dense_output_is_accurate_inside_steps() {
        let p = OdeProblem::new(
            |_t, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            vec![0.0, 1.0],
            6.0,
        );
        let traj = integrate(&p, &[], &tight()).unwrap();
        for i in 0..=600 {
            let t = i as f64 * 0.01;
            let y = traj.interpolate(t).unwrap();
            assert!((y[0] - t.sin()).abs() < 1e-10, "t={t}");
        }
        assert!(traj.interpolate(6.5).is_none());
    }
}
