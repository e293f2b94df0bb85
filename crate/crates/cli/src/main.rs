//! `gflow`: run the numerical experiments from flags or a JSON config and
//! write CSV/JSON artifacts.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{Map, Value};

use commands::Command;
use config::ExperimentConfig;

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Io(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) => write!(f, "invalid input: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

fn finite(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err("value must be finite".into())
    }
}

#[derive(Parser)]
#[command(name = "gflow", version, about = "Generalized Ricci flow numerical laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the S²×S¹ cylinder flow and write the trajectory.
    #[command(allow_negative_numbers = true)]
    CylinderFlow {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: CylinderFlags,
    },
    /// Parabolic blowup diagnostics at the singular time.
    #[command(allow_negative_numbers = true)]
    Blowup {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: BlowupFlags,
    },
    /// Logarithmic divergence of the time-integrated torsion.
    #[command(allow_negative_numbers = true)]
    Torsion {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: TorsionFlags,
    },
    /// Follow the smooth-pole branch of the warped soliton phase plane.
    #[command(allow_negative_numbers = true)]
    Shoot {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: ShootFlags,
    },
    /// ODE and tensor residuals of an explicit warped soliton.
    #[command(allow_negative_numbers = true)]
    SolitonResidual {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: SolitonFlags,
    },
    /// Entropy trace and derivative check along a cylinder flow.
    #[command(allow_negative_numbers = true)]
    Entropy {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: EntropyFlags,
    },
    /// Pointwise heat and monotonicity identities on a soliton-generated flow.
    #[command(allow_negative_numbers = true)]
    HeatCheck {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: HeatFlags,
    },
    /// Differential-form identities on a periodic grid.
    #[command(allow_negative_numbers = true)]
    HodgeCheck {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: HodgeFlags,
    },
    /// Run the experiment described by a config file.
    Run {
        /// JSON config naming the command.
        #[arg(value_name = "CONFIG")]
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON config; flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory [default: $GFLOW_OUT_DIR, then ./gflow-out].
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_parser = finite)]
    rtol: Option<f64>,
    #[arg(long, value_parser = finite)]
    atol: Option<f64>,
    /// Grid resolution for grid-based commands.
    #[arg(long)]
    grid: Option<usize>,
    /// Skip CSV artifacts.
    #[arg(long)]
    no_csv: bool,
    /// Skip JSON artifacts.
    #[arg(long)]
    no_json: bool,
    /// Print the fully resolved configuration and exit.
    #[arg(long)]
    dump_config: bool,
    /// Run once per value, each into `<out>/<key>=<value>/`.
    #[arg(long, value_name = "KEY=V1,V2,...")]
    sweep: Option<String>,
}

#[derive(Args, Serialize)]
struct FlowFlags {
    #[arg(long, value_parser = finite)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda0: Option<f64>,
    #[arg(long, value_parser = finite)]
    #[serde(skip_serializing_if = "Option::is_none")]
    h0sq: Option<f64>,
    #[arg(long, value_parser = finite)]
    #[serde(skip_serializing_if = "Option::is_none")]
    beta0: Option<f64>,
    #[arg(long, value_parser = finite)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t_max: Option<f64>,
    #[arg(long, value_parser = finite)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_floor: Option<f64>,
}

#[derive(Args, Serialize)]
struct CylinderFlags {
    #[command(flatten)]
    #[serde(flatten)]
    flow: FlowFlags,
    /// CSV sampling interval.
    #[arg(long, value_parser = finite)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dt_out: Option<f64>,
}

#[derive(Args, Serialize)]
struct BlowupFlags {
    #[command(flatten)]
    #[serde(flatten)]
    flow: FlowFlags,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[arg(long, value_parser = finite)]
    #[serde(skip_serializing_if = "Option::is_none")]
    opening_threshold: Option<f64>,
}

#[derive(Args, Serialize)]
struct TorsionFlags {
    #[command(flatten)]
    #[serde(flatten)]
    flow: FlowFlags,
    /// Level whose crossing time is reported.
    #[arg(long, value_parser = finite)]
    #[serde(skip_serializing_if = "Option::is_none")]
    psi0: Option<f64>,
}

#[derive(Args, Serialize)]
struct ShootFlags {
    #[arg(long, value_parser = finite)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r_switch: Option<f64>,
    #[arg(long, value_parser = finite)]
    #[serde(skip_serializing_if = "Option::is_none")]
    u_floor: Option<f64>,
    #[arg(long, value_parser = finite)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r_max: Option<f64>,
    /// Also write the (r, u, p, E) trajectory.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    trajectory: bool,
}

#[derive(Args, Serialize)]
struct SolitonFlags {
    /// `cylinder` or `gaussian`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    soliton: Option<String>,
}

#[derive(Args, Serialize)]
struct EntropyFlags {
    #[command(flatten)]
    #[serde(flatten)]
    flow: FlowFlags,
    #[arg(long, value_parser = finite)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t_ref: Option<f64>,
    #[arg(long, value_parser = finite)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mass0: Option<f64>,
    #[arg(long, value_parser = finite)]
    #[serde(skip_serializing_if = "Option::is_none")]
    fd_step: Option<f64>,
    #[arg(long, value_parser = finite)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t_start: Option<f64>,
    #[arg(long, value_parser = finite)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t_end: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_samples: Option<usize>,
    /// Skip the finite-difference order measurement.
    #[arg(long)]
    #[serde(skip)]
    no_order_check: bool,
}

#[derive(Args, Serialize)]
struct HeatFlags {
    /// `cylinder` or `gaussian`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    soliton: Option<String>,
    #[arg(long, value_parser = finite)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[arg(long, value_parser = finite)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r_max: Option<f64>,
}

#[derive(Args, Serialize)]
struct HodgeFlags {
    /// 3 or 4.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    /// all, suobing, twisted_codiff, integral_identity or div_h2.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    identity: Option<String>,
    /// compact4 or central4.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    stencil: Option<String>,
    /// Skip the half-resolution run.
    #[arg(long)]
    #[serde(skip)]
    no_convergence: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn flag_map(flags: &impl Serialize) -> Map<String, Value> {
    match serde_json::to_value(flags).expect("flags serialize") {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

fn build(command: Option<Command>, common: &Common, overrides: Map<String, Value>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match (&common.config, command) {
        (Some(path), cmd) => {
            let cfg = ExperimentConfig::load(path)?;
            if let Some(c) = cmd {
                if cfg.command != c {
                    return Err(Failure::Validation(format!(
                        "{} names command {} but {} was requested",
                        path.display(),
                        cfg.command.name(),
                        c.name()
                    )));
                }
            }
            cfg
        }
        (None, Some(c)) => ExperimentConfig::new(c),
        (None, None) => unreachable!("run always carries a config path"),
    };
    cfg.set_parameters(overrides);
    if let Some(v) = common.rtol {
        cfg.tolerances.rtol = Some(v);
    }
    if let Some(v) = common.atol {
        cfg.tolerances.atol = Some(v);
    }
    if let Some(v) = common.grid {
        cfg.tolerances.grid = Some(v);
    }
    if common.no_csv {
        cfg.output.csv = false;
    }
    if common.no_json {
        cfg.output.json = false;
    }
    if let Some(dir) = &common.out {
        cfg.output.dir = Some(dir.clone());
    }
    if cfg.output.dir.is_none() {
        let env = std::env::var(config::OUT_DIR_ENV).ok().filter(|s| !s.is_empty());
        cfg.output.dir = Some(PathBuf::from(env.unwrap_or_else(|| config::DEFAULT_OUT_DIR.to_string())));
    }
    Ok(cfg)
}

fn compute(cfg: &ExperimentConfig) -> Result<commands::Outcome, Failure> {
    let mut outcome = commands::execute(cfg)?;
    outcome.files.push(("config.json".to_string(), cfg.to_json()));
    Ok(outcome)
}

fn write(cfg: &ExperimentConfig, outcome: &commands::Outcome) -> Result<String, Failure> {
    let dir = cfg.out_dir();
    output::write_all(&dir, &outcome.files).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    Ok(format!("{} -> {}", outcome.summary, dir.display()))
}

fn dispatch(command: Option<Command>, common: &Common, overrides: Map<String, Value>) -> Result<(), Failure> {
    let base = build(command, common, overrides)?;
    let Some(spec) = &common.sweep else {
        let cfg = commands::resolve(&base)?;
        if common.dump_config {
            print!("{}", cfg.to_json());
            return Ok(());
        }
        println!("{}", write(&cfg, &compute(&cfg)?)?);
        return Ok(());
    };

    let (key, values) = config::parse_sweep(spec)?;
    let root = base.out_dir();
    let mut runs = Vec::with_capacity(values.len());
    for v in values {
        let mut cfg = base.clone();
        let label = match &v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        cfg.assign(&key, v)?;
        cfg.output.dir = Some(root.join(format!("{key}={label}")));
        runs.push(commands::resolve(&cfg)?);
    }
    if common.dump_config {
        let all: Vec<&ExperimentConfig> = runs.iter().collect();
        println!("{}", serde_json::to_string_pretty(&all).expect("configs serialize"));
        return Ok(());
    }
    // Nothing is written unless every run succeeds.
    let results: Vec<Result<commands::Outcome, Failure>> = std::thread::scope(|s| {
        let handles: Vec<_> = runs.iter().map(|cfg| s.spawn(move || compute(cfg))).collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let mut worst: Option<Failure> = None;
    let mut outcomes = Vec::with_capacity(results.len());
    for (cfg, r) in runs.iter().zip(results) {
        match r {
            Ok(outcome) => outcomes.push(outcome),
            Err(e) => {
                eprintln!("error: {}: {e}", cfg.out_dir().display());
                if worst.as_ref().map_or(true, |w| e.code() > w.code()) {
                    worst = Some(e);
                }
            }
        }
    }
    if let Some(e) = worst {
        return Err(e);
    }
    for (cfg, outcome) in runs.iter().zip(&outcomes) {
        println!("{}", write(cfg, outcome)?);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Cmd::CylinderFlow { common, flags } => dispatch(Some(Command::CylinderFlow), common, flag_map(flags)),
        Cmd::Blowup { common, flags } => dispatch(Some(Command::Blowup), common, flag_map(flags)),
        Cmd::Torsion { common, flags } => dispatch(Some(Command::Torsion), common, flag_map(flags)),
        Cmd::Shoot { common, flags } => dispatch(Some(Command::Shoot), common, flag_map(flags)),
        Cmd::SolitonResidual { common, flags } => dispatch(Some(Command::SolitonResidual), common, flag_map(flags)),
        Cmd::Entropy { common, flags } => {
            let mut m = flag_map(flags);
            if flags.no_order_check {
                m.insert("order_check".into(), Value::Bool(false));
            }
            dispatch(Some(Command::Entropy), common, m)
        }
        Cmd::HeatCheck { common, flags } => dispatch(Some(Command::HeatCheck), common, flag_map(flags)),
        Cmd::HodgeCheck { common, flags } => {
            let mut m = flag_map(flags);
            if flags.no_convergence {
                m.insert("convergence".into(), Value::Bool(false));
            }
            dispatch(Some(Command::HodgeCheck), common, m)
        }
        Cmd::Run { file, common } => {
            let mut common = common.clone();
            common.config = Some(file.clone());
            dispatch(None, &common, Map::new())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
