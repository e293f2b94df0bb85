//! Generalized Ricci flow on `S² × S¹` with `g = λ g_{S²} + β² dr²` and `H = h dV`.
//!
//! The sphere is normalized by `Ric(g_{S²}(0)) = ½ g_{S²}(0)`, so the scalar
//! curvature of the product is `R = 1/λ` and the flow reduces to
//!
//! ```text
//! λ' = −1 + λh²,   h' = h/λ − (3/2)h³,   β' = ½h²β.
//! ```
//!
//! Along every solution `λhβ` is constant and `u = ½ − λh²` keeps its sign.
//! For `h₀ ≠ 0` the sphere collapses in finite time while `λh² → ½`, so the
//! parabolic blowup converges to the shrinking soliton on `S² × ℝ`.

use serde::{Deserialize, Serialize};

use crate::ode::{self, Direction, EventSpec, OdeProblem, Termination, Tolerances};
use crate::{csv, Error, Result};

/// Sphere scale, torsion amplitude and circle scale at one instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderState {
    pub lambda: f64,
    pub h: f64,
    pub beta: f64,
}

impl CylinderState {
    pub fn new(lambda: f64, h: f64, beta: f64) -> Self {
        Self { lambda, h, beta }
    }

    /// `(λ₀, √h₀², β₀)`.
    pub fn from_h0sq(lambda: f64, h0sq: f64, beta: f64) -> Result<Self> {
        if !(h0sq >= 0.0) || !h0sq.is_finite() {
            return Err(Error::invalid(format!("h0^2 must be finite and >= 0 (got {h0sq})")));
        }
        let s = Self::new(lambda, h0sq.sqrt(), beta);
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be positive (got {})", self.lambda)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be positive (got {})", self.beta)));
        }
        if !self.h.is_finite() {
            return Err(Error::invalid("h must be finite"));
        }
        Ok(())
    }

    pub fn lambda_h2(&self) -> f64 {
        self.lambda * self.h * self.h
    }

    /// `½ − λh²`.
    pub fn u(&self) -> f64 {
        0.5 - self.lambda_h2()
    }

    pub fn lambda_h_beta(&self) -> f64 {
        self.lambda * self.h * self.beta
    }

    /// Scalar curvature of the product, `1/λ`.
    pub fn scalar_curvature(&self) -> f64 {
        1.0 / self.lambda
    }

    /// Raw contraction `|H|² = 6h²`.
    pub fn h_norm_sq(&self) -> f64 {
        6.0 * self.h * self.h
    }
}

/// `(λ', h', β')`.
pub fn flow_rhs(state: &CylinderState) -> Result<[f64; 3]> {
    if !(state.lambda > 0.0) {
        return Err(Error::invalid(format!(
            "flow_rhs needs lambda > 0 (got {})",
            state.lambda
        )));
    }
    Ok(rhs3(state.lambda, state.h, state.beta))
}

fn rhs3(l: f64, h: f64, b: f64) -> [f64; 3] {
    let h2 = h * h;
    [-1.0 + l * h2, h / l - 1.5 * h2 * h, 0.5 * h2 * b]
}

/// Integration settings for [`run_flow`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub t_max: f64,
    /// `λ` level that defines the singularity event.
    pub lambda_floor: f64,
    pub tolerances: Tolerances,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            t_max: 10.0,
            lambda_floor: 1e-8,
            // λ ends at 1e-8, so the absolute tolerance must sit well below it.
            tolerances: Tolerances::with_tol(1e-12, 1e-18),
        }
    }
}

/// An integrated flow with per-step diagnostics.
#[derive(Clone, Debug)]
pub struct CylinderTrajectory {
    pub initial: CylinderState,
    pub times: Vec<f64>,
    pub states: Vec<CylinderState>,
    /// `∫₀ᵗ 6h² ds` at each accepted step.
    pub torsion_integral: Vec<f64>,
    /// Time at which `λ` reached the floor.
    pub t_event: Option<f64>,
    /// Floor time extrapolated linearly to `λ = 0`.
    pub t_sing: Option<f64>,
    pub termination: Termination,
    inner: ode::Trajectory,
}

/// Integrates the flow until `λ` hits the floor or `t_max`.
pub fn run_flow(initial: CylinderState, cfg: &FlowConfig) -> Result<CylinderTrajectory> {
    initial.validate()?;
    if !(cfg.t_max > 0.0 && cfg.t_max.is_finite()) {
        return Err(Error::invalid("t_max must be positive and finite"));
    }
    if !(cfg.lambda_floor > 0.0 && cfg.lambda_floor < initial.lambda) {
        return Err(Error::invalid("lambda_floor must lie in (0, lambda0)"));
    }
    let problem = OdeProblem::new(
        |_t, y: &[f64], dy: &mut [f64]| {
            if y[0] > 0.0 {
                let d = rhs3(y[0], y[1], y[2]);
                dy[..3].copy_from_slice(&d);
                dy[3] = 6.0 * y[1] * y[1];
            } else {
                dy.iter_mut().for_each(|v| *v = f64::NAN);
            }
        },
        0.0,
        vec![initial.lambda, initial.h, initial.beta, 0.0],
        cfg.t_max,
    );
    let floor = cfg.lambda_floor;
    let events = [EventSpec::new("lambda_floor", Direction::Falling, true, move |_, y| {
        y[0] - floor
    })];
    let traj = ode::integrate(&problem, &events, &cfg.tolerances)?;
    let states = traj
        .states
        .iter()
        .map(|y| CylinderState::new(y[0], y[1], y[2]))
        .collect();
    let torsion_integral = traj.states.iter().map(|y| y[3]).collect();
    let ev = traj.event("lambda_floor");
    let t_event = ev.map(|e| e.t);
    let t_sing = ev.map(|e| {
        let slope = rhs3(e.state[0], e.state[1], e.state[2])[0];
        e.t + e.state[0] / slope.abs()
    });
    Ok(CylinderTrajectory {
        initial,
        times: traj.times.clone(),
        states,
        torsion_integral,
        t_event,
        t_sing,
        termination: traj.termination,
        inner: traj,
    })
}

/// Closed-form solution for `h₀ = 0` (`λ = λ₀ − t`) and `λ₀h₀² = ½` with `λ₀ = 1`.
pub fn closed_form(initial: &CylinderState, t: f64) -> Option<CylinderState> {
    if initial.h == 0.0 {
        return Some(CylinderState::new(initial.lambda - t, 0.0, initial.beta));
    }
    if initial.lambda == 1.0 && (initial.h * initial.h - 0.5).abs() < 1e-15 {
        let s = 1.0 - 0.5 * t;
        let h = initial.h.signum() / (2.0 - t).sqrt();
        return Some(CylinderState::new(s, h, initial.beta / s.sqrt()));
    }
    None
}

impl CylinderTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_last(&self) -> f64 {
        *self.times.last().expect("trajectory holds its start")
    }

    /// Dense-output state and torsion integral at `t`.
    pub fn at(&self, t: f64) -> Option<(CylinderState, f64)> {
        self.inner
            .interpolate(t)
            .map(|y| (CylinderState::new(y[0], y[1], y[2]), y[3]))
    }

    pub fn state_at(&self, t: f64) -> Option<CylinderState> {
        self.at(t).map(|(s, _)| s)
    }

    pub fn torsion_integral_at(&self, t: f64) -> Option<f64> {
        self.at(t).map(|(_, i)| i)
    }

    /// `max |λhβ − λ₀h₀β₀|` over accepted steps.
    pub fn conservation_drift(&self) -> f64 {
        let c0 = self.initial.lambda_h_beta();
        self.states
            .iter()
            .map(|s| (s.lambda_h_beta() - c0).abs())
            .fold(0.0, f64::max)
    }

    /// True when `½ − λh²` never changes sign across accepted steps.
    /// Values within `1e-10` of zero count as zero, which is compatible with
    /// either sign (`h₀² = ½` sits on zero, and every run approaches it).
    pub fn u_sign_constant(&self) -> bool {
        let sign = |u: f64| if u.abs() <= 1e-10 { 0.0 } else { u.signum() };
        let s0 = sign(self.initial.u());
        self.states.iter().all(|s| sign(s.u()) * s0 >= 0.0)
    }

    /// Number of accepted steps where `λh²` moves against the expected
    /// direction by more than `slack` (relative to ½).
    pub fn monotonicity_violations(&self, slack: f64) -> usize {
        let u0 = self.initial.u();
        if u0 == 0.0 {
            return 0;
        }
        let sign = u0.signum();
        self.states
            .windows(2)
            .filter(|w| sign * (w[1].lambda_h2() - w[0].lambda_h2()) < -slack)
            .count()
    }

    /// Largest relative gap between a central difference of `λh²` along the
    /// dense output and `h² − 2λh⁴`, over accepted interior steps with `t ≤ t_cap`.
    pub fn lambda_h2_identity_gap(&self, dt: f64, t_cap: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for &t in &self.times[1..self.times.len() - 1] {
            if t + dt > t_cap || t - dt < self.times[0] {
                continue;
            }
            let (Some(a), Some(b), Some(c)) =
                (self.state_at(t - dt), self.state_at(t + dt), self.state_at(t))
            else {
                continue;
            };
            let fd = (b.lambda_h2() - a.lambda_h2()) / (2.0 * dt);
            let h2 = c.h * c.h;
            let exact = h2 - 2.0 * c.lambda * h2 * h2;
            worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
        }
        worst
    }

    /// Uniform samples `t = k·dt_out` up to the last covered time, columns
    /// `t,lambda,h,beta,lambda_h2,u,lambda_h_beta,torsion_integral`.
    pub fn to_csv(&self, dt_out: f64) -> Result<String> {
        if !(dt_out > 0.0 && dt_out.is_finite()) {
            return Err(Error::invalid("dt_out must be positive"));
        }
        let t_end = self.t_last();
        let n = (t_end / dt_out).floor() as usize;
        let rows = (0..=n)
            .map(|k| k as f64 * dt_out)
            .filter(|&t| t <= t_end)
            .filter_map(|t| {
                self.at(t).map(|(s, i)| {
                    vec![
                        t,
                        s.lambda,
                        s.h,
                        s.beta,
                        s.lambda_h2(),
                        s.u(),
                        s.lambda_h_beta(),
                        i,
                    ]
                })
            });
        Ok(csv::render(
            &[
                "t",
                "lambda",
                "h",
                "beta",
                "lambda_h2",
                "u",
                "lambda_h_beta",
                "torsion_integral",
            ],
            rows,
        ))
    }
}

/// Geometric-sequence extrapolation of a convergent sample sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Extrapolation {
    pub limit: f64,
    pub error_bar: f64,
    /// Measured order `α` in `x_i − L ∝ 2^{-α i}`, when resolvable.
    pub rate: Option<f64>,
}

/// Aitken/Richardson extrapolation for samples taken at geometrically
/// shrinking distances to the limit point (ratio 2).
///
/// Triples whose differences are below `noise` are skipped; the last
/// resolvable triple gives the limit and the previous one the error bar.
pub fn richardson_limit(x: &[f64], noise: f64) -> Result<Extrapolation> {
    if x.len() < 3 {
        return Err(Error::invalid("extrapolation needs at least 3 samples"));
    }
    let mut est: Vec<(f64, f64)> = Vec::new();
    for k in 2..x.len() {
        let d1 = x[k - 1] - x[k - 2];
        let d2 = x[k] - x[k - 1];
        if d1.abs() <= noise || d2.abs() <= noise {
            continue;
        }
        let q = d2 / d1;
        if !(q > 0.0 && q < 1.0) {
            continue;
        }
        est.push((x[k] + d2 * q / (1.0 - q), -q.log2()));
    }
    let n = x.len();
    let last_diff = (x[n - 1] - x[n - 2]).abs();
    Ok(match est.as_slice() {
        [] => Extrapolation {
            limit: x[n - 1],
            error_bar: last_diff,
            rate: None,
        },
        [.., (l, r)] => {
            let bar = if est.len() >= 2 {
                (l - est[est.len() - 2].0).abs()
            } else {
                last_diff
            };
            Extrapolation {
                limit: *l,
                error_bar: bar.max(last_diff),
                rate: Some(*r),
            }
        }
    })
}

pub const DEFAULT_BLOWUP_SAMPLES: usize = 24;
pub const DEFAULT_OPENING_THRESHOLD: f64 = 1e6;

/// Scalar diagnostics of the parabolic blowup `g_i(t) = λ(t_i)^{-1} g(t_i + λ(t_i) t)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlowupReport {
    pub t_sing: f64,
    pub sample_times: Vec<f64>,
    /// `λ(t_i) h(t_i)²`, the torsion amplitude squared of the rescaled metric.
    pub lambda_h2: Vec<f64>,
    /// `λ(t_i)^{-1} β(t_i)²`, the circle length squared after rescaling.
    pub opening: Vec<f64>,
    pub lambda_h2_limit: Extrapolation,
    pub opening_monotone: bool,
    pub opening_threshold: f64,
    /// Earliest sample time at which the opening factor exceeds the threshold.
    pub opening_exceeds_at: Option<f64>,
    /// `h₀ = 0`: the flow is Ricci flow and the rescaled torsion is identically 0.
    pub ricci_flow_case: bool,
}

impl BlowupReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Limit within `tol` of ½ (0 in the Ricci-flow case).
    pub fn limit_ok(&self, tol: f64) -> bool {
        let want = if self.ricci_flow_case { 0.0 } else { 0.5 };
        (self.lambda_h2_limit.limit - want).abs() <= tol
    }
}

fn singular_time(traj: &CylinderTrajectory) -> Result<f64> {
    traj.t_sing.ok_or_else(|| {
        Error::invalid("trajectory has no detected singularity (lambda never reached the floor)")
    })
}

/// Samples `t_i = T − 2^{-i}(T − t_0)` inside the integrated span.
fn geometric_samples(traj: &CylinderTrajectory, t_sing: f64, n: usize) -> Vec<f64> {
    let t0 = traj.times[0];
    let t_last = traj.t_last();
    (1..=n)
        .map(|i| t_sing - (t_sing - t0) * 0.5f64.powi(i as i32))
        .filter(|&t| t <= t_last)
        .collect()
}

pub fn blowup_analysis(traj: &CylinderTrajectory, n_samples: usize) -> Result<BlowupReport> {
    blowup_analysis_with(traj, n_samples, DEFAULT_OPENING_THRESHOLD)
}

pub fn blowup_analysis_with(
    traj: &CylinderTrajectory,
    n_samples: usize,
    threshold: f64,
) -> Result<BlowupReport> {
    let t_sing = singular_time(traj)?;
    let times = geometric_samples(traj, t_sing, n_samples);
    if times.len() < 3 {
        return Err(Error::invalid(format!(
            "only {} usable blowup samples; need at least 3",
            times.len()
        )));
    }
    let states: Vec<CylinderState> = times
        .iter()
        .map(|&t| traj.state_at(t).expect("sample lies in the integrated span"))
        .collect();
    let lambda_h2: Vec<f64> = states.iter().map(|s| s.lambda_h2()).collect();
    let opening: Vec<f64> = states.iter().map(|s| s.beta * s.beta / s.lambda).collect();
    let noise = 1e-11 * lambda_h2.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let lambda_h2_limit = richardson_limit(&lambda_h2, noise)?;
    let opening_monotone = opening.windows(2).all(|w| w[1] > w[0]);
    let opening_exceeds_at = times
        .iter()
        .zip(&opening)
        .find(|(_, &o)| o > threshold)
        .map(|(&t, _)| t);
    Ok(BlowupReport {
        t_sing,
        sample_times: times,
        lambda_h2,
        opening,
        lambda_h2_limit,
        opening_monotone,
        opening_threshold: threshold,
        opening_exceeds_at,
        ricci_flow_case: traj.initial.h == 0.0,
    })
}

/// Growth of `I(t) = ∫₀ᵗ 6h² ds` towards the singular time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub t_sing: f64,
    pub sample_times: Vec<f64>,
    pub integral: Vec<f64>,
    /// Least-squares fit `I ≈ −c ln(T − t) + b` over the last decade of `T − t`.
    pub fitted_c: f64,
    pub fitted_intercept: f64,
    /// Range of `T − t` used by the fit.
    pub fit_window: (f64, f64),
    pub psi0: Option<f64>,
    /// First time with `ψ₀ − I(t) = 0`; `None` if `I` stays below `ψ₀`.
    pub crossing_time: Option<f64>,
}

impl DivergenceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn torsion_divergence(traj: &CylinderTrajectory, psi0: Option<f64>) -> Result<DivergenceReport> {
    if traj.initial.h == 0.0 {
        return Err(Error::invalid(
            "h0 = 0: the torsion integral vanishes identically, so there is no divergence witness",
        ));
    }
    let t_sing = singular_time(traj)?;
    if let Some(p) = psi0 {
        if !p.is_finite() {
            return Err(Error::invalid("psi0 must be finite"));
        }
    }
    let sample_times = geometric_samples(traj, t_sing, 60);
    let integral: Vec<f64> = sample_times
        .iter()
        .map(|&t| traj.torsion_integral_at(t).expect("sample in span"))
        .collect();

    let tau_end = t_sing - traj.t_last();
    if !(tau_end > 0.0) {
        return Err(Error::numerical("integration ended at or beyond the singular time"));
    }
    let window = (tau_end, 10.0 * tau_end);
    let m = 41;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for j in 0..m {
        let tau = window.0 * 10f64.powf(j as f64 / (m - 1) as f64);
        let x = -tau.ln();
        let y = traj
            .torsion_integral_at((t_sing - tau).min(traj.t_last()))
            .expect("fit point in span");
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let mf = m as f64;
    let fitted_c = (mf * sxy - sx * sy) / (mf * sxx - sx * sx);
    let fitted_intercept = (sy - fitted_c * sx) / mf;

    let crossing_time = psi0.and_then(|p| crossing(traj, p));
    Ok(DivergenceReport {
        t_sing,
        sample_times,
        integral,
        fitted_c,
        fitted_intercept,
        fit_window: window,
        psi0,
        crossing_time,
    })
}

fn crossing(traj: &CylinderTrajectory, psi0: f64) -> Option<f64> {
    let (mut a, mut b) = (traj.times[0], traj.t_last());
    let g = |t: f64| traj.torsion_integral_at(t).expect("in span") - psi0;
    if g(a) >= 0.0 {
        return Some(a);
    }
    if g(b) < 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if g(mid) < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}
