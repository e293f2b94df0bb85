use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::commands::Command;
use crate::Failure;

pub const OUT_DIR_ENV: &str = "GFLOW_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "gflow-out";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    /// Grid resolution for the grid-based commands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub csv: bool,
    #[serde(default = "yes")]
    pub json: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: None,
            csv: true,
            json: true,
        }
    }
}

/// One experiment, as read from a config file or assembled from flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default = "empty_object")]
    pub parameters: Value,
    #[serde(default)]
    pub tolerances: TolSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn empty_object() -> Value {
    Value::Object(Map::new())
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            parameters: empty_object(),
            tolerances: TolSpec::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Failure::Validation(m) => Failure::Validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Failure::Validation(format!("config: {e}")))?;
        if !cfg.parameters.is_object() {
            return Err(Failure::Validation("config field `parameters` must be an object".into()));
        }
        Ok(cfg)
    }

    /// Overlays `key = value` pairs onto the parameter table.
    pub fn set_parameters(&mut self, overrides: Map<String, Value>) {
        let table = self.parameters.as_object_mut().expect("parameters is an object");
        table.extend(overrides);
    }

    /// Applies one `key=value` assignment; tolerance keys go to `tolerances`.
    pub fn assign(&mut self, key: &str, value: Value) -> Result<(), Failure> {
        let bad = |what: &str| Failure::Validation(format!("{key} must be {what} (got {value})"));
        match key {
            "rtol" => self.tolerances.rtol = Some(value.as_f64().ok_or_else(|| bad("a number"))?),
            "atol" => self.tolerances.atol = Some(value.as_f64().ok_or_else(|| bad("a number"))?),
            "grid" => {
                self.tolerances.grid =
                    Some(value.as_u64().ok_or_else(|| bad("a non-negative integer"))? as usize)
            }
            _ => {
                let mut m = Map::new();
                m.insert(key.to_string(), value);
                self.set_parameters(m);
            }
        }
        Ok(())
    }

    /// Typed view of the parameter table; unknown keys are rejected.
    pub fn typed<P: DeserializeOwned>(&self) -> Result<P, Failure> {
        serde_json::from_value(self.parameters.clone())
            .map_err(|e| Failure::Validation(format!("parameters for {}: {e}", self.command.name())))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

/// Reads a scalar from the command line: JSON literal if it parses, string otherwise.
pub fn scalar(text: &str) -> Value {
    match serde_json::from_str::<Value>(text) {
        Ok(v) if !v.is_object() && !v.is_array() => v,
        _ => Value::String(text.to_string()),
    }
}

/// `key=v1,v2,...`
pub fn parse_sweep(spec: &str) -> Result<(String, Vec<Value>), Failure> {
    let (key, values) = spec
        .split_once('=')
        .ok_or_else(|| Failure::Validation(format!("sweep `{spec}` must look like key=v1,v2")))?;
    let values: Vec<Value> = values.split(',').filter(|v| !v.is_empty()).map(scalar).collect();
    if key.is_empty() || values.is_empty() {
        return Err(Failure::Validation(format!("sweep `{spec}` needs a key and at least one value")));
    }
    Ok((key.to_string(), values))
}

/// Rejects `null`, `NaN` and infinities anywhere in a resolved table.
pub fn require_finite(v: &Value, path: &str) -> Result<(), Failure> {
    match v {
        Value::Number(n) if n.as_f64().map_or(false, |x| !x.is_finite()) => {
            Err(Failure::Validation(format!("{path} is not finite")))
        }
        Value::Object(m) => m.iter().try_for_each(|(k, v)| require_finite(v, &format!("{path}.{k}"))),
        _ => Ok(()),
    }
}
