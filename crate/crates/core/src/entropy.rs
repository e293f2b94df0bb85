//! Shrinking entropy and conjugate heat weights.
//!
//! Two settings are covered:
//!
//! * the homogeneous cylinder flow, where the weight `u` depends on time only,
//!   every integral over the manifold is a product with the volume
//!   `V = 8πλ L₀ β`, and the entropy derivative formula reduces to an algebraic
//!   expression in `(λ, h, τ)`;
//! * a gradient shrinker with soliton constant 1 (checked through
//!   [`warped::convention_check`]), whose pullback flow `g_t = (1−t)Φ_t^* g₀`
//!   gives closed-form weights `u_t = (4π(1−t))^{-3/2} e^{-f₀∘Φ_t}`. The heat
//!   identity for `f_t` and the pointwise evolution of the entropy density are
//!   checked against finite differences in `t` at `t = 0`.
//!
//! Norms follow the raw-contraction convention of [`warped`]: `|H|² = 6h²`
//! and the 2-form `c·*dr` has squared norm `2c²`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cylinder::{CylinderState, CylinderTrajectory};
use crate::ode::{self, OdeProblem, Tolerances};
use crate::warped::{self, WarpedSolitonData};
use crate::{csv, Error, Result};

/// Dimension of every supported geometry.
pub const DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyConfig {
    /// `T` in `τ = T − t`; `None` uses the trajectory's singular time.
    pub t_ref: Option<f64>,
    pub n: usize,
    /// Initial `∫u dV`.
    pub mass0: f64,
    /// Length parameter `L₀` of the circle factor.
    pub circle_length: f64,
    /// Central-difference step for `dW/dt`.
    pub fd_step: f64,
    pub t_start: f64,
    /// Last sample time; `None` stops at 75% of the way to `min(T, t_last)`.
    pub t_end: Option<f64>,
    pub n_samples: usize,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self {
            t_ref: None,
            n: DIM,
            mass0: 1.0,
            circle_length: 2.0 * PI,
            fd_step: 1e-4,
            t_start: 0.0,
            t_end: None,
            n_samples: 151,
        }
    }
}

impl EntropyConfig {
    fn validate(&self) -> Result<()> {
        if self.n != DIM {
            return Err(Error::invalid(format!("only n = {DIM} is supported (got {})", self.n)));
        }
        if !(self.mass0 > 0.0 && self.mass0.is_finite()) {
            return Err(Error::invalid("mass0 must be positive"));
        }
        if !(self.circle_length > 0.0 && self.circle_length.is_finite()) {
            return Err(Error::invalid("circle_length must be positive"));
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return Err(Error::invalid("fd_step must be positive"));
        }
        if self.n_samples < 2 {
            return Err(Error::invalid("n_samples must be at least 2"));
        }
        Ok(())
    }

    /// The reference time, falling back to the detected singular time.
    pub fn resolve_t_ref(&self, traj: &CylinderTrajectory) -> Result<f64> {
        match self.t_ref.or(traj.t_sing) {
            Some(t) if t.is_finite() && t > traj.times[0] => Ok(t),
            Some(t) => Err(Error::invalid(format!(
                "t_ref = {t} must lie after the flow start"
            ))),
            None => Err(Error::invalid(
                "t_ref not given and the trajectory has no singular time",
            )),
        }
    }

    /// `u₀ = mass0 / V(0)`.
    pub fn initial_weight(&self, traj: &CylinderTrajectory) -> f64 {
        self.mass0 / volume(&traj.initial, self.circle_length)
    }

    /// Sample times; with `margin > 0` the window is kept `margin` inside the flow.
    fn sample_times(&self, traj: &CylinderTrajectory, t_ref: f64, margin: f64) -> Result<Vec<f64>> {
        let reach = t_ref.min(traj.t_last());
        let t_end = self
            .t_end
            .unwrap_or(self.t_start + 0.75 * (reach - self.t_start));
        let t_start = self.t_start.max(traj.times[0] + margin);
        if !(t_end > t_start) {
            return Err(Error::invalid("sample window is empty"));
        }
        if t_end + margin >= reach {
            return Err(Error::invalid(format!(
                "sample window [{t_start}, {t_end}] with margin {margin} leaves the flow or passes t_ref"
            )));
        }
        let n = self.n_samples;
        Ok((0..n)
            .map(|i| t_start + (t_end - t_start) * i as f64 / (n - 1) as f64)
            .collect())
    }
}

/// `8π λ L₀ β`, the volume of `S²(λ) × S¹(L₀β)` with `Ric(g_{S²}(0)) = ½g_{S²}(0)`.
pub fn volume(state: &CylinderState, circle_length: f64) -> f64 {
    8.0 * PI * state.lambda * circle_length * state.beta
}

/// A homogeneous weight together with its potential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HeatWeight {
    pub u: f64,
    pub f: f64,
    pub tau: f64,
}

impl HeatWeight {
    /// `f = −ln u − (3/2) ln(4πτ)`.
    pub fn from_u(u: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::invalid(format!("tau must be positive (got {tau})")));
        }
        Ok(Self {
            u,
            f: -u.ln() - 1.5 * (4.0 * PI * tau).ln(),
            tau,
        })
    }

    /// `u = (4πτ)^{-3/2} e^{-f}`.
    pub fn from_f(f: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::invalid(format!("tau must be positive (got {tau})")));
        }
        Ok(Self {
            u: (4.0 * PI * tau).powf(-1.5) * (-f).exp(),
            f,
            tau,
        })
    }
}

/// Solution of `u' = (1/λ − (3/2)h²) u` along a cylinder flow.
///
/// `ln(u/u₀)` is integrated with the flow read from its dense output.
#[derive(Clone, Debug)]
pub struct HeatSolution {
    pub u0: f64,
    log_ratio: Option<ode::Trajectory>,
    span: (f64, f64),
}

impl HeatSolution {
    pub fn covers(&self, t: f64) -> bool {
        t >= self.span.0 && t <= self.span.1
    }

    pub fn u_at(&self, t: f64) -> Option<f64> {
        if !self.covers(t) {
            return None;
        }
        match &self.log_ratio {
            None => Some(0.0),
            Some(tr) => tr.component(t, 0).map(|y| self.u0 * y.exp()),
        }
    }

    /// Accepted step times of the weight integration.
    pub fn times(&self) -> Vec<f64> {
        match &self.log_ratio {
            Some(tr) => tr.times.clone(),
            None => vec![self.span.0, self.span.1],
        }
    }

    pub fn weight_at(&self, t: f64, t_ref: f64) -> Result<HeatWeight> {
        let u = self
            .u_at(t)
            .ok_or_else(|| Error::invalid(format!("t = {t} outside the weight's span")))?;
        HeatWeight::from_u(u, t_ref - t)
    }
}

/// Integrates the homogeneous conjugate heat equation from `u₀` over the
/// whole trajectory.
pub fn conjugate_heat_homogeneous(traj: &CylinderTrajectory, u0: f64) -> Result<HeatSolution> {
    if !(u0 >= 0.0 && u0.is_finite()) {
        return Err(Error::invalid(format!("u0 must be finite and >= 0 (got {u0})")));
    }
    let span = (traj.times[0], traj.t_last());
    if u0 == 0.0 {
        return Ok(HeatSolution {
            u0,
            log_ratio: None,
            span,
        });
    }
    let problem = OdeProblem::new(
        |t: f64, _y: &[f64], dy: &mut [f64]| {
            let t = t.clamp(span.0, span.1);
            dy[0] = match traj.state_at(t) {
                Some(s) => 1.0 / s.lambda - 1.5 * s.h * s.h,
                None => f64::NAN,
            };
        },
        span.0,
        vec![0.0],
        span.1,
    );
    let tol = Tolerances::with_tol(1e-13, 1e-14);
    let tr = ode::integrate(&problem, &[], &tol)?;
    if tr.termination != ode::Termination::ReachedEnd {
        return Err(Error::numerical(format!(
            "conjugate heat integration stopped early: {:?}",
            tr.termination
        )));
    }
    Ok(HeatSolution {
        u0,
        log_ratio: Some(tr),
        span,
    })
}

/// Below this sphere scale the time coordinate resolves `τ` to fewer than
/// ten digits, which bounds how well any time-parameterized quantity can
/// be conserved there.
pub const RESOLVED_LAMBDA: f64 = 1e-6;

/// `∫u dV = u(t) V(t)` at the accepted steps of the weight integration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MassSeries {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    /// Largest relative change over steps with `λ ≥ RESOLVED_LAMBDA`.
    pub max_relative_drift: f64,
    /// Largest relative change over every step, up to the singularity floor.
    pub max_relative_drift_all: f64,
}

pub fn mass(traj: &CylinderTrajectory, heat: &HeatSolution, circle_length: f64) -> MassSeries {
    let times = heat.times();
    let mut mass = Vec::with_capacity(times.len());
    let mut resolved = Vec::with_capacity(times.len());
    for &t in &times {
        let s = traj.state_at(t).expect("weight span equals flow span");
        mass.push(heat.u_at(t).expect("in span") * volume(&s, circle_length));
        resolved.push(s.lambda >= RESOLVED_LAMBDA);
    }
    let m0 = mass[0];
    let drift = |m: f64| if m0 == 0.0 { m.abs() } else { ((m - m0) / m0).abs() };
    let max_relative_drift = mass
        .iter()
        .zip(&resolved)
        .filter(|(_, &ok)| ok)
        .fold(0.0_f64, |a, (&m, _)| a.max(drift(m)));
    let max_relative_drift_all = mass.iter().fold(0.0_f64, |a, &m| a.max(drift(m)));
    MassSeries {
        times,
        mass,
        max_relative_drift,
        max_relative_drift_all,
    }
}

/// Entropy samples; derivative columns are `NaN` when not computed.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EntropyTrace {
    pub times: Vec<f64>,
    pub tau: Vec<f64>,
    pub w: Vec<f64>,
    pub dw_fd: Vec<f64>,
    pub dw_formula: Vec<f64>,
    pub gap: Vec<f64>,
}

impl EntropyTrace {
    /// Columns `t,tau,W,dW_fd,dW_formula,gap`.
    pub fn to_csv(&self) -> String {
        let col = |v: &Vec<f64>, i: usize| v.get(i).copied().unwrap_or(f64::NAN);
        csv::render(
            &["t", "tau", "W", "dW_fd", "dW_formula", "gap"],
            (0..self.times.len()).map(|i| {
                vec![
                    self.times[i],
                    self.tau[i],
                    self.w[i],
                    col(&self.dw_fd, i),
                    col(&self.dw_formula, i),
                    col(&self.gap, i),
                ]
            }),
        )
    }
}

struct Homogeneous<'a> {
    traj: &'a CylinderTrajectory,
    heat: &'a HeatSolution,
    t_ref: f64,
    circle_length: f64,
}

impl Homogeneous<'_> {
    fn parts(&self, t: f64) -> Result<(CylinderState, HeatWeight, f64)> {
        let s = self
            .traj
            .state_at(t)
            .ok_or_else(|| Error::invalid(format!("t = {t} outside the flow")))?;
        let w = self.heat.weight_at(t, self.t_ref)?;
        let m = w.u * volume(&s, self.circle_length);
        Ok((s, w, m))
    }

    /// `[τ(1/λ − h²/2) + f − 3] · mass`.
    fn entropy(&self, t: f64) -> Result<f64> {
        let (s, w, m) = self.parts(t)?;
        let h2 = s.h * s.h;
        Ok((w.tau * (1.0 / s.lambda - 0.5 * h2) + w.f - 3.0) * m)
    }

    /// `[2τ(2A_s² + A_r²) − h²] · mass`.
    fn formula(&self, t: f64) -> Result<f64> {
        let (s, w, m) = self.parts(t)?;
        let h2 = s.h * s.h;
        let a_s = 0.5 / s.lambda - 0.5 * h2 - 0.5 / w.tau;
        let a_r = -0.5 * h2 - 0.5 / w.tau;
        Ok((2.0 * w.tau * (2.0 * a_s * a_s + a_r * a_r) - h2) * m)
    }

    fn fd(&self, t: f64, dt: f64) -> Result<f64> {
        Ok((self.entropy(t + dt)? - self.entropy(t - dt)?) / (2.0 * dt))
    }
}

fn setup<'a>(
    traj: &'a CylinderTrajectory,
    heat: &'a HeatSolution,
    cfg: &EntropyConfig,
    margin: f64,
) -> Result<(Homogeneous<'a>, Vec<f64>)> {
    cfg.validate()?;
    if heat.u0 == 0.0 {
        return Err(Error::invalid("entropy needs a positive weight (u0 > 0)"));
    }
    let t_ref = cfg.resolve_t_ref(traj)?;
    let times = cfg.sample_times(traj, t_ref, margin)?;
    Ok((
        Homogeneous {
            traj,
            heat,
            t_ref,
            circle_length: cfg.circle_length,
        },
        times,
    ))
}

/// `W₋` on the sample window.
pub fn entropy_eval(
    traj: &CylinderTrajectory,
    heat: &HeatSolution,
    cfg: &EntropyConfig,
) -> Result<EntropyTrace> {
    let (hom, times) = setup(traj, heat, cfg, 0.0)?;
    let w = times.iter().map(|&t| hom.entropy(t)).collect::<Result<Vec<_>>>()?;
    Ok(EntropyTrace {
        tau: times.iter().map(|t| hom.t_ref - t).collect(),
        times,
        w,
        ..Default::default()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyCheck {
    pub trace: EntropyTrace,
    pub t_ref: f64,
    pub fd_step: f64,
    /// `max(1e-6, 10·Δt²·max|dW_formula|)`.
    pub tolerance: f64,
    pub max_gap: f64,
    pub agrees: bool,
    pub min_formula: f64,
    /// First sample where the formula derivative is negative.
    pub negative_at: Option<f64>,
}

/// Compares a central difference of `W₋` with the derivative formula.
pub fn entropy_derivative_check(
    traj: &CylinderTrajectory,
    heat: &HeatSolution,
    cfg: &EntropyConfig,
) -> Result<EntropyCheck> {
    let (hom, times) = setup(traj, heat, cfg, cfg.fd_step)?;
    let dt = cfg.fd_step;
    let mut trace = EntropyTrace::default();
    for &t in &times {
        let fd = hom.fd(t, dt)?;
        let formula = hom.formula(t)?;
        trace.times.push(t);
        trace.tau.push(hom.t_ref - t);
        trace.w.push(hom.entropy(t)?);
        trace.dw_fd.push(fd);
        trace.dw_formula.push(formula);
        trace.gap.push(fd - formula);
    }
    let scale = trace.dw_formula.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tolerance = 1e-6_f64.max(10.0 * dt * dt * scale);
    let max_gap = trace.gap.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min_formula = trace.dw_formula.iter().copied().fold(f64::INFINITY, f64::min);
    let negative_at = trace
        .times
        .iter()
        .zip(&trace.dw_formula)
        .find(|(_, &d)| d < 0.0)
        .map(|(&t, _)| t);
    Ok(EntropyCheck {
        trace,
        t_ref: hom.t_ref,
        fd_step: dt,
        tolerance,
        max_gap,
        agrees: max_gap <= tolerance,
        min_formula,
        negative_at,
    })
}

/// Observed order of the central difference: `log₂` of the ratio of the
/// largest gaps at `coarse` and `coarse/2`.
pub fn entropy_fd_order(
    traj: &CylinderTrajectory,
    heat: &HeatSolution,
    cfg: &EntropyConfig,
    coarse: f64,
) -> Result<f64> {
    let a = entropy_derivative_check(traj, heat, &EntropyConfig { fd_step: coarse, ..*cfg })?;
    let b = entropy_derivative_check(traj, heat, &EntropyConfig { fd_step: 0.5 * coarse, ..*cfg })?;
    Ok((a.max_gap / b.max_gap).log2())
}

/// Pointwise comparison of a finite-difference left side with a closed-form right side.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointwiseReport {
    pub identity: String,
    pub dt: f64,
    pub grid: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub residual: Vec<f64>,
    pub max_abs: f64,
}

impl PointwiseReport {
    fn new(identity: &str, dt: f64, grid: &[f64], lhs: Vec<f64>, rhs: Vec<f64>) -> Self {
        let residual: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        let max_abs = residual.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        Self {
            identity: identity.to_string(),
            dt,
            grid: grid.to_vec(),
            lhs,
            rhs,
            residual,
            max_abs,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// The pullback family `Φ_t`, `dΦ/dt = f₀'(Φ)/(1 − t)`, `Φ₀ = id`.
fn pullback(data: &WarpedSolitonData, r: f64, t: f64) -> Result<f64> {
    let problem = OdeProblem::new(
        |s: f64, y: &[f64], dy: &mut [f64]| dy[0] = data.f.d1(y[0]) / (1.0 - s),
        0.0,
        vec![r],
        t,
    );
    let tr = ode::integrate(&problem, &[], &Tolerances::with_tol(1e-14, 1e-15))?;
    if tr.termination != ode::Termination::ReachedEnd {
        return Err(Error::numerical("pullback flow did not reach the requested time"));
    }
    Ok(tr.last_state()[0])
}

fn soliton_precheck(data: &WarpedSolitonData, grid: &[f64], dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt < 0.5) {
        return Err(Error::invalid(format!("dt must lie in (0, 0.5) (got {dt})")));
    }
    if grid.is_empty() {
        return Err(Error::invalid("grid is empty"));
    }
    if (data.lambda_soliton - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "soliton constant must be 1 (got {})",
            data.lambda_soliton
        )));
    }
    let conv = warped::convention_check(data)?;
    if !conv.consistent {
        return Err(Error::invalid(format!("data is not a soliton: {}", conv.message)));
    }
    Ok(())
}

/// `∂_t f = −Δf + |∇f|² − R + ¼|H|² + n/(2(1−t))` at `t = 0`, with `∂_t f`
/// from a central difference of `f₀∘Φ_t`.
pub fn soliton_heat_check(data: &WarpedSolitonData, grid: &[f64], dt: f64) -> Result<PointwiseReport> {
    soliton_precheck(data, grid, dt)?;
    let mut lhs = Vec::with_capacity(grid.len());
    let mut rhs = Vec::with_capacity(grid.len());
    for &r in grid {
        let g = data.geometry_at(r)?;
        let fp = data.f.value(pullback(data, r, dt)?);
        let fm = data.f.value(pullback(data, r, -dt)?);
        lhs.push((fp - fm) / (2.0 * dt));
        rhs.push(-g.lap_f + g.grad_f_sq - g.scalar + 0.25 * g.h_norm_sq + 0.5 * DIM as f64);
    }
    Ok(PointwiseReport::new("soliton_heat", dt, grid, lhs, rhs))
}

/// Entropy density factor `w = τ(2Δf − |∇f|² + R − |H|²/12) + f − n` at `τ = 1`.
fn density_factor(data: &WarpedSolitonData, r: f64) -> Result<f64> {
    let g = data.geometry_at(r)?;
    Ok(2.0 * g.lap_f - g.grad_f_sq + g.scalar - g.h_norm_sq / 12.0 + g.f[0] - DIM as f64)
}

/// `v_t(r) = (4π(1−t))^{-3/2} w₀(Φ_t r) e^{-f₀(Φ_t r)}`.
fn density(data: &WarpedSolitonData, r: f64, t: f64) -> Result<f64> {
    let x = if t == 0.0 { r } else { pullback(data, r, t)? };
    Ok((4.0 * PI * (1.0 - t)).powf(-1.5) * density_factor(data, x)? * (-data.f.value(x)).exp())
}

const D1_8: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
const D2_8: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
const RADIAL_STEP: f64 = 1e-2;

/// Warped Laplacian `v'' + 2(φ'/φ)v'` of the time-0 density, eighth-order in `r`.
fn density_laplacian(data: &WarpedSolitonData, r: f64) -> Result<f64> {
    let hr = RADIAL_STEP;
    let v = |x: f64| density(data, x, 0.0);
    let mut d1 = 0.0;
    let mut d2 = D2_8[0] * v(r)?;
    for k in 1..=4 {
        let (p, m) = (v(r + k as f64 * hr)?, v(r - k as f64 * hr)?);
        d1 += D1_8[k - 1] * (p - m);
        d2 += D2_8[k] * (p + m);
    }
    d1 /= hr;
    d2 /= hr * hr;
    let [phi, dphi, _] = data.phi.eval(r);
    Ok(d2 + 2.0 * dphi / phi * d1)
}

/// `□*v = −∂_t v − Δv + (R − ¼|H|²)v` against
/// `−(2τ|Ric − ¼H² + ∇²f − g/(2τ)|² + (τ/2)|d*H + i_{∇f}H|² − |H|²/6) u` at `t = 0`.
pub fn pointwise_monotonicity_check(
    data: &WarpedSolitonData,
    grid: &[f64],
    dt: f64,
) -> Result<PointwiseReport> {
    soliton_precheck(data, grid, dt)?;
    let tau = 1.0;
    let mut lhs = Vec::with_capacity(grid.len());
    let mut rhs = Vec::with_capacity(grid.len());
    for &r in grid {
        let g = data.geometry_at(r)?;
        let v0 = density(data, r, 0.0)?;
        let dv_dt = (density(data, r, dt)? - density(data, r, -dt)?) / (2.0 * dt);
        let lap = density_laplacian(data, r)?;
        lhs.push(-dv_dt - lap + (g.scalar - 0.25 * g.h_norm_sq) * v0);

        let (a_r, a_s) = g.shrinker_tensor(tau);
        let a_sq = a_r * a_r + 2.0 * a_s * a_s;
        let twisted_sq = 2.0 * g.twisted_codiff * g.twisted_codiff;
        let u = (4.0 * PI * tau).powf(-1.5) * (-g.f[0]).exp();
        rhs.push(-(2.0 * tau * a_sq + 0.5 * tau * twisted_sq - g.h_norm_sq / 6.0) * u);
    }
    Ok(PointwiseReport::new("pointwise_monotonicity", dt, grid, lhs, rhs))
}

/// `log₂(max|res(dt)| / max|res(dt/2)|)` for one of the pointwise checks.
pub fn pointwise_order(
    check: fn(&WarpedSolitonData, &[f64], f64) -> Result<PointwiseReport>,
    data: &WarpedSolitonData,
    grid: &[f64],
    dt: f64,
) -> Result<f64> {
    let a = check(data, grid, dt)?;
    let b = check(data, grid, 0.5 * dt)?;
    Ok((a.max_abs / b.max_abs).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinder::{run_flow, FlowConfig};

    fn flow(h0sq: f64) -> CylinderTrajectory {
        run_flow(CylinderState::from_h0sq(1.0, h0sq, 1.0).unwrap(), &FlowConfig::default()).unwrap()
    }

    #[test]
    fn weight_round_trip() {
        let w = HeatWeight::from_u(0.37, 0.8).unwrap();
        let back = HeatWeight::from_f(w.f, 0.8).unwrap();
        assert!((back.u - 0.37).abs() < 1e-15);
        assert!(HeatWeight::from_u(1.0, 0.0).is_err());
    }

    #[test]
    fn ricci_flow_weight_closed_form() {
        let traj = flow(0.0);
        let heat = conjugate_heat_homogeneous(&traj, 2.0).unwrap();
        for k in 0..=95 {
            let t = k as f64 * 0.01;
            let u = heat.u_at(t).unwrap();
            assert!((u - 2.0 / (1.0 - t)).abs() <= 1e-10 * u);
        }
    }

    #[test]
    fn zero_weight_stays_zero() {
        let traj = flow(0.3);
        let heat = conjugate_heat_homogeneous(&traj, 0.0).unwrap();
        assert_eq!(heat.u_at(0.7), Some(0.0));
        assert!(conjugate_heat_homogeneous(&traj, -1.0).is_err());
        assert!(entropy_eval(&traj, &heat, &EntropyConfig::default()).is_err());
    }

    #[test]
    fn entropy_needs_positive_tau() {
        let traj = flow(0.5);
        let heat = conjugate_heat_homogeneous(&traj, 1.0).unwrap();
        let cfg = EntropyConfig {
            t_ref: Some(1.0),
            t_end: Some(1.2),
            ..EntropyConfig::default()
        };
        assert!(entropy_eval(&traj, &heat, &cfg).is_err());
    }

    #[test]
    fn soliton_checks_reject_wrong_constant() {
        let d = WarpedSolitonData::cylinder_soliton().with_lambda_soliton(0.5);
        assert!(soliton_heat_check(&d, &[0.0], 1e-4).is_err());
        let d = WarpedSolitonData::cylinder_soliton();
        assert!(soliton_heat_check(&d, &[0.0], 0.0).is_err());
        assert!(pointwise_monotonicity_check(&d, &[], 1e-4).is_err());
    }
}
