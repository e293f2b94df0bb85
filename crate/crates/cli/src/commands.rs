use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use gflow_core::cylinder::{
    self, blowup_analysis_with, run_flow, torsion_divergence, CylinderState, CylinderTrajectory, FlowConfig,
};
use gflow_core::entropy::{self, EntropyConfig};
use gflow_core::hodge::{self, samples, IdentityReport, Stencil};
use gflow_core::ode::{Termination, Tolerances};
use gflow_core::shooter::{shoot_r3_branch, ShootConfig};
use gflow_core::warped::{self, WarpedSolitonData};

use crate::config::{ExperimentConfig, TolSpec};
use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    CylinderFlow,
    Blowup,
    Torsion,
    Shoot,
    SolitonResidual,
    Entropy,
    HeatCheck,
    HodgeCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CylinderFlow => "cylinder-flow",
            Command::Blowup => "blowup",
            Command::Torsion => "torsion",
            Command::Shoot => "shoot",
            Command::SolitonResidual => "soliton-residual",
            Command::Entropy => "entropy",
            Command::HeatCheck => "heat-check",
            Command::HodgeCheck => "hodge-check",
        }
    }
}

/// Files to write and the one-line summary.
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub summary: String,
}

impl Outcome {
    fn new(summary: String) -> Self {
        Self {
            files: Vec::new(),
            summary,
        }
    }

    fn json(&mut self, enabled: bool, name: &str, value: &impl Serialize) {
        if enabled {
            let mut text = serde_json::to_string_pretty(value).expect("report serializes");
            text.push('\n');
            self.files.push((name.to_string(), text));
        }
    }

    fn csv(&mut self, enabled: bool, name: &str, text: String) {
        if enabled {
            self.files.push((name.to_string(), text));
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowParams {
    pub lambda0: f64,
    pub h0sq: f64,
    pub beta0: f64,
    pub t_max: f64,
    pub lambda_floor: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        let f = FlowConfig::default();
        Self {
            lambda0: 1.0,
            h0sq: 0.5,
            beta0: 1.0,
            t_max: f.t_max,
            lambda_floor: f.lambda_floor,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CylinderParams {
    pub lambda0: f64,
    pub h0sq: f64,
    pub beta0: f64,
    pub t_max: f64,
    pub lambda_floor: f64,
    /// CSV sampling interval.
    pub dt_out: f64,
}

impl Default for CylinderParams {
    fn default() -> Self {
        let f = FlowParams::default();
        Self {
            lambda0: f.lambda0,
            h0sq: f.h0sq,
            beta0: f.beta0,
            t_max: f.t_max,
            lambda_floor: f.lambda_floor,
            dt_out: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlowupParams {
    pub lambda0: f64,
    pub h0sq: f64,
    pub beta0: f64,
    pub t_max: f64,
    pub lambda_floor: f64,
    pub samples: usize,
    pub opening_threshold: f64,
}

impl Default for BlowupParams {
    fn default() -> Self {
        let f = FlowParams::default();
        Self {
            lambda0: f.lambda0,
            h0sq: 0.3,
            beta0: f.beta0,
            t_max: f.t_max,
            lambda_floor: f.lambda_floor,
            samples: cylinder::DEFAULT_BLOWUP_SAMPLES,
            opening_threshold: cylinder::DEFAULT_OPENING_THRESHOLD,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TorsionParams {
    pub lambda0: f64,
    pub h0sq: f64,
    pub beta0: f64,
    pub t_max: f64,
    pub lambda_floor: f64,
    pub psi0: Option<f64>,
}

impl Default for TorsionParams {
    fn default() -> Self {
        let f = FlowParams::default();
        Self {
            lambda0: f.lambda0,
            h0sq: f.h0sq,
            beta0: f.beta0,
            t_max: f.t_max,
            lambda_floor: f.lambda_floor,
            psi0: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShootParams {
    pub r_switch: f64,
    pub u_floor: f64,
    pub r_max: f64,
    /// Also write the full `(r, u, p, E)` trajectory.
    pub trajectory: bool,
}

impl Default for ShootParams {
    fn default() -> Self {
        let c = ShootConfig::default();
        Self {
            r_switch: c.r_switch,
            u_floor: c.u_floor,
            r_max: c.r_max,
            trajectory: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Soliton {
    Cylinder,
    Gaussian,
}

impl Soliton {
    fn data(self) -> WarpedSolitonData {
        match self {
            Soliton::Cylinder => WarpedSolitonData::cylinder_soliton(),
            Soliton::Gaussian => WarpedSolitonData::gaussian_shrinker(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolitonParams {
    pub soliton: Soliton,
}

impl Default for SolitonParams {
    fn default() -> Self {
        Self {
            soliton: Soliton::Cylinder,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyParams {
    pub lambda0: f64,
    pub h0sq: f64,
    pub beta0: f64,
    pub t_max: f64,
    pub lambda_floor: f64,
    pub t_ref: Option<f64>,
    pub mass0: f64,
    pub fd_step: f64,
    pub t_start: f64,
    pub t_end: Option<f64>,
    pub n_samples: usize,
    /// Also measure the observed order of the central difference.
    pub order_check: bool,
}

impl Default for EntropyParams {
    fn default() -> Self {
        let f = FlowParams::default();
        let e = EntropyConfig::default();
        Self {
            lambda0: f.lambda0,
            h0sq: f.h0sq,
            beta0: f.beta0,
            t_max: f.t_max,
            lambda_floor: f.lambda_floor,
            t_ref: e.t_ref,
            mass0: e.mass0,
            fd_step: e.fd_step,
            t_start: e.t_start,
            t_end: e.t_end,
            n_samples: e.n_samples,
            order_check: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatParams {
    pub soliton: Soliton,
    pub dt: f64,
    pub r_max: f64,
}

impl Default for HeatParams {
    fn default() -> Self {
        Self {
            soliton: Soliton::Cylinder,
            dt: 1e-4,
            r_max: 3.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    All,
    Suobing,
    TwistedCodiff,
    IntegralIdentity,
    DivH2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HodgeParams {
    pub dim: usize,
    pub identity: Identity,
    pub stencil: Stencil,
    /// Also run at half resolution and report the observed order.
    pub convergence: bool,
}

impl Default for HodgeParams {
    fn default() -> Self {
        Self {
            dim: 3,
            identity: Identity::All,
            stencil: Stencil::default(),
            convergence: true,
        }
    }
}

fn validation(e: gflow_core::Error) -> Failure {
    match e {
        gflow_core::Error::InvalidInput(m) => Failure::Validation(m),
        gflow_core::Error::Numerical(m) => Failure::Numerical(m),
        other => Failure::Validation(other.to_string()),
    }
}

/// Fills every parameter and tolerance with its effective value.
pub fn resolve(cfg: &ExperimentConfig) -> Result<ExperimentConfig, Failure> {
    let mut out = cfg.clone();
    let (params, tol) = match cfg.command {
        Command::CylinderFlow => (to_value(cfg.typed::<CylinderParams>()?), flow_tol(&cfg.tolerances)),
        Command::Blowup => (to_value(cfg.typed::<BlowupParams>()?), flow_tol(&cfg.tolerances)),
        Command::Torsion => (to_value(cfg.typed::<TorsionParams>()?), flow_tol(&cfg.tolerances)),
        Command::Entropy => (to_value(cfg.typed::<EntropyParams>()?), flow_tol(&cfg.tolerances)),
        Command::Shoot => {
            let d = Tolerances::default();
            let t = TolSpec {
                rtol: Some(cfg.tolerances.rtol.unwrap_or(d.rtol)),
                atol: Some(cfg.tolerances.atol.unwrap_or(d.atol)),
                grid: None,
            };
            (to_value(cfg.typed::<ShootParams>()?), t)
        }
        Command::SolitonResidual => (to_value(cfg.typed::<SolitonParams>()?), grid_tol(&cfg.tolerances, 200)),
        Command::HeatCheck => (to_value(cfg.typed::<HeatParams>()?), grid_tol(&cfg.tolerances, 61)),
        Command::HodgeCheck => {
            let p: HodgeParams = cfg.typed()?;
            let n = if p.dim == 4 { 48 } else { 64 };
            (to_value(p), grid_tol(&cfg.tolerances, n))
        }
    };
    if cfg.tolerances.grid.is_some() && tol.grid.is_none() {
        return Err(Failure::Validation(format!(
            "tolerances.grid does not apply to {}",
            cfg.command.name()
        )));
    }
    if matches!(cfg.command, Command::SolitonResidual | Command::HeatCheck | Command::HodgeCheck)
        && (cfg.tolerances.rtol.is_some() || cfg.tolerances.atol.is_some())
    {
        return Err(Failure::Validation(format!(
            "rtol/atol do not apply to {}",
            cfg.command.name()
        )));
    }
    out.parameters = params;
    out.tolerances = tol;
    crate::config::require_finite(&out.parameters, "parameters")?;
    Ok(out)
}

fn to_value(p: impl Serialize) -> Value {
    serde_json::to_value(p).expect("parameters serialize")
}

fn flow_tol(t: &TolSpec) -> TolSpec {
    let d = FlowConfig::default().tolerances;
    TolSpec {
        rtol: Some(t.rtol.unwrap_or(d.rtol)),
        atol: Some(t.atol.unwrap_or(d.atol)),
        grid: None,
    }
}

fn grid_tol(t: &TolSpec, default: usize) -> TolSpec {
    TolSpec {
        rtol: None,
        atol: None,
        grid: Some(t.grid.unwrap_or(default)),
    }
}

fn ode_tol(t: &TolSpec) -> Tolerances {
    Tolerances::with_tol(t.rtol.expect("resolved"), t.atol.expect("resolved"))
}

fn flow(
    lambda0: f64,
    h0sq: f64,
    beta0: f64,
    t_max: f64,
    lambda_floor: f64,
    tol: &TolSpec,
) -> Result<CylinderTrajectory, Failure> {
    let init = CylinderState::from_h0sq(lambda0, h0sq, beta0).map_err(validation)?;
    let cfg = FlowConfig {
        t_max,
        lambda_floor,
        tolerances: ode_tol(tol),
    };
    let traj = run_flow(init, &cfg).map_err(validation)?;
    numerical_ok(traj.termination, traj.t_last())?;
    Ok(traj)
}

fn numerical_ok(term: Termination, at: f64) -> Result<(), Failure> {
    match term {
        Termination::ReachedEnd | Termination::Event => Ok(()),
        other => Err(Failure::Numerical(format!(
            "integration stopped with {} at {at}",
            serde_json::to_value(other).expect("termination serializes").as_str().unwrap_or("?")
        ))),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or("none".to_string(), |x| format!("{x:.12}"))
}

/// Runs a resolved config.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let (csv, json) = (cfg.output.csv, cfg.output.json);
    let tol = &cfg.tolerances;
    match cfg.command {
        Command::CylinderFlow => {
            let p: CylinderParams = cfg.typed()?;
            let traj = flow(p.lambda0, p.h0sq, p.beta0, p.t_max, p.lambda_floor, tol)?;
            let table = traj.to_csv(p.dt_out).map_err(validation)?;
            let summary = json!({
                "t_sing": traj.t_sing,
                "t_event": traj.t_event,
                "termination": traj.termination,
                "steps": traj.len() - 1,
                "conservation_drift": traj.conservation_drift(),
                "u_sign_constant": traj.u_sign_constant(),
                "monotonicity_violations": traj.monotonicity_violations(1e-14),
            });
            let mut out = Outcome::new(format!(
                "cylinder-flow h0sq={}: T_sing={} steps={} drift={:.2e}",
                p.h0sq,
                opt(traj.t_sing),
                traj.len() - 1,
                traj.conservation_drift()
            ));
            out.csv(csv, "trajectory.csv", table);
            out.json(json, "summary.json", &summary);
            Ok(out)
        }
        Command::Blowup => {
            let p: BlowupParams = cfg.typed()?;
            let traj = flow(p.lambda0, p.h0sq, p.beta0, p.t_max, p.lambda_floor, tol)?;
            let rep = blowup_analysis_with(&traj, p.samples, p.opening_threshold).map_err(validation)?;
            let mut out = Outcome::new(format!(
                "blowup h0sq={}: lambda_h2_limit={:.12} opening_exceeds_at={} T_sing={:.12}",
                p.h0sq,
                rep.lambda_h2_limit.limit,
                opt(rep.opening_exceeds_at),
                rep.t_sing
            ));
            out.json(json, "blowup.json", &rep);
            Ok(out)
        }
        Command::Torsion => {
            let p: TorsionParams = cfg.typed()?;
            let traj = flow(p.lambda0, p.h0sq, p.beta0, p.t_max, p.lambda_floor, tol)?;
            let rep = torsion_divergence(&traj, p.psi0).map_err(validation)?;
            let mut out = Outcome::new(format!(
                "torsion h0sq={}: fitted_c={:.8} crossing_time={}",
                p.h0sq,
                rep.fitted_c,
                opt(rep.crossing_time)
            ));
            out.json(json, "torsion.json", &rep);
            Ok(out)
        }
        Command::Shoot => {
            let p: ShootParams = cfg.typed()?;
            let sc = ShootConfig {
                r_switch: p.r_switch,
                u_floor: p.u_floor,
                r_max: p.r_max,
                tolerances: ode_tol(tol),
            };
            let (rep, traj) = shoot_r3_branch(&sc).map_err(validation)?;
            numerical_ok(rep.termination, traj.last().r)?;
            let m = rep.milestones;
            let mut out = Outcome::new(format!(
                "shoot: u_max={:.12} r1={} r2={} r3={} r4={} drift={:.2e}",
                rep.u_max,
                opt(m.r1),
                opt(m.r2),
                opt(m.r3),
                opt(m.r4),
                rep.invariant_drift
            ));
            out.json(json, "shoot.json", &rep);
            if p.trajectory {
                out.csv(csv, "trajectory.csv", traj.to_csv());
            }
            Ok(out)
        }
        Command::SolitonResidual => {
            let p: SolitonParams = cfg.typed()?;
            let data = p.soliton.data();
            let grid = data.default_grid(tol.grid.expect("resolved"));
            let ode = warped::ode_residuals(&data, &grid).map_err(validation)?;
            let ten = warped::tensor_residuals(&data, &grid).map_err(validation)?;
            let conv = warped::convention_check_on(&data, &grid, data.default_tolerance()).map_err(validation)?;
            let mut out = Outcome::new(format!(
                "soliton-residual {}: ode_max={:.3e} tensor_max={:.3e} convention={}",
                serde_json::to_value(p.soliton).expect("name").as_str().unwrap_or("?"),
                ode.max_abs,
                ten.max_abs,
                if conv.consistent { "consistent" } else { "inconsistent" }
            ));
            out.json(json, "residuals.json", &json!({ "ode": ode, "tensor": ten, "convention": conv }));
            out.csv(csv, "residuals_ode.csv", ode.to_csv());
            out.csv(csv, "residuals_tensor.csv", ten.to_csv());
            Ok(out)
        }
        Command::Entropy => {
            let p: EntropyParams = cfg.typed()?;
            let traj = flow(p.lambda0, p.h0sq, p.beta0, p.t_max, p.lambda_floor, tol)?;
            let ec = EntropyConfig {
                t_ref: p.t_ref,
                mass0: p.mass0,
                fd_step: p.fd_step,
                t_start: p.t_start,
                t_end: p.t_end,
                n_samples: p.n_samples,
                ..EntropyConfig::default()
            };
            let heat = entropy::conjugate_heat_homogeneous(&traj, ec.initial_weight(&traj)).map_err(validation)?;
            let chk = entropy::entropy_derivative_check(&traj, &heat, &ec).map_err(validation)?;
            let m = entropy::mass(&traj, &heat, ec.circle_length);
            let order = if p.order_check {
                Some(entropy::entropy_fd_order(&traj, &heat, &ec, p.fd_step).map_err(validation)?)
            } else {
                None
            };
            let mut out = Outcome::new(format!(
                "entropy h0sq={}: max_gap={:.3e} fd_order={} min_formula={:.6e} mass_drift={:.2e}",
                p.h0sq,
                chk.max_gap,
                order.map_or("none".to_string(), |o| format!("{o:.3}")),
                chk.min_formula,
                m.max_relative_drift
            ));
            out.csv(csv, "entropy.csv", chk.trace.to_csv());
            out.json(
                json,
                "entropy.json",
                &json!({
                    "t_ref": chk.t_ref,
                    "fd_step": chk.fd_step,
                    "tolerance": chk.tolerance,
                    "max_gap": chk.max_gap,
                    "agrees": chk.agrees,
                    "fd_order": order,
                    "min_formula": chk.min_formula,
                    "negative_at": chk.negative_at,
                    "mass_relative_drift": m.max_relative_drift,
                    "mass_relative_drift_all_steps": m.max_relative_drift_all,
                }),
            );
            Ok(out)
        }
        Command::HeatCheck => {
            let p: HeatParams = cfg.typed()?;
            let data = p.soliton.data();
            let n = tol.grid.expect("resolved");
            if n < 2 || !(p.r_max > 0.0) {
                return Err(Failure::Validation("heat-check needs grid >= 2 and r_max > 0".into()));
            }
            let (lo, _) = data.domain();
            let grid: Vec<f64> = if lo.is_finite() {
                (1..=n).map(|i| lo + (p.r_max - lo) * i as f64 / n as f64).collect()
            } else {
                (0..n).map(|i| -p.r_max + 2.0 * p.r_max * i as f64 / (n - 1) as f64).collect()
            };
            let heat = entropy::soliton_heat_check(&data, &grid, p.dt).map_err(validation)?;
            let mono = entropy::pointwise_monotonicity_check(&data, &grid, p.dt).map_err(validation)?;
            let ho = entropy::pointwise_order(entropy::soliton_heat_check, &data, &grid, p.dt).map_err(validation)?;
            let mo = entropy::pointwise_order(entropy::pointwise_monotonicity_check, &data, &grid, p.dt)
                .map_err(validation)?;
            let mut out = Outcome::new(format!(
                "heat-check: heat_residual={:.3e} (order {ho:.3}) monotonicity_residual={:.3e} (order {mo:.3})",
                heat.max_abs, mono.max_abs
            ));
            out.json(
                json,
                "heat_check.json",
                &json!({ "heat": heat, "heat_order": ho, "monotonicity": mono, "monotonicity_order": mo }),
            );
            Ok(out)
        }
        Command::HodgeCheck => {
            let p: HodgeParams = cfg.typed()?;
            let n = tol.grid.expect("resolved");
            let reports = hodge_reports(&p, n)?;
            let coarse = if p.convergence {
                if n / 2 < hodge::MIN_POINTS || n % 2 != 0 {
                    return Err(Failure::Validation(format!(
                        "convergence needs an even grid of at least {}",
                        2 * hodge::MIN_POINTS
                    )));
                }
                Some(hodge_reports(&p, n / 2)?)
            } else {
                None
            };
            let reports: Vec<IdentityReport> = match coarse {
                Some(c) => reports.into_iter().zip(&c).map(|(f, c)| f.with_coarse(c)).collect(),
                None => reports,
            };
            let parts: Vec<String> = reports
                .iter()
                .map(|r| match &r.convergence {
                    Some(c) => format!("{}={:.3e} (rate {:.3})", r.identity, r.residual, c.rate),
                    None => format!("{}={:.3e}", r.identity, r.residual),
                })
                .collect();
            let mut out = Outcome::new(format!("hodge-check T{} {n}: {}", p.dim, parts.join(" ")));
            out.json(json, "hodge.json", &reports);
            Ok(out)
        }
    }
}

fn hodge_reports(p: &HodgeParams, n: usize) -> Result<Vec<IdentityReport>, Failure> {
    let g = samples::grid(p.dim, n, p.stencil).map_err(validation)?;
    let (f, h) = if p.dim == 3 {
        samples::torus3(&g)
    } else {
        samples::torus4_exact(&g)
    }
    .map_err(validation)?;
    let want = |i: Identity| p.identity == Identity::All || p.identity == i;
    let mut out = Vec::new();
    if want(Identity::Suobing) {
        let (fs, hs) = if p.dim == 3 {
            (f.clone(), h.clone())
        } else {
            samples::torus4_slab(&g).map_err(validation)?
        };
        out.push(hodge::check_suobing(&fs, &hs).map_err(validation)?);
    }
    if want(Identity::TwistedCodiff) {
        out.push(hodge::check_twisted_codiff(&f, &h).map_err(validation)?);
    }
    if want(Identity::IntegralIdentity) {
        out.push(hodge::check_integral_identity(&f, &h).map_err(validation)?);
    }
    if want(Identity::DivH2) {
        out.push(hodge::check_div_h2(&h).map_err(validation)?);
    }
    Ok(out)
}
