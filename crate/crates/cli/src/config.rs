//! Run settings gathered from an optional `key = value` file and the command
//! line. Flags win over the file.

use std::fs;
use std::path::{Path, PathBuf};

use spinfid_core::{ChainParams, Order, PropagatorChoice, SweepParam};

use crate::CliError;

/// Every setting the subcommands read. `None` means "not given anywhere".
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    pub qubits: Option<usize>,
    pub coupling: Option<f64>,
    pub gradient: Option<f64>,
    pub rabi: Option<f64>,
    pub omega0: Option<f64>,
    pub param: Option<String>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub steps: Option<usize>,
    pub values: Option<Vec<f64>>,
    pub propagator: Option<String>,
    pub order: Option<String>,
    pub out: Option<PathBuf>,
    pub strict: Option<bool>,
}

pub const DEFAULT_QUBITS: usize = 6;
pub const DEFAULT_COUPLING: f64 = 1.0;
pub const DEFAULT_GRADIENT: f64 = 100.0;
pub const DEFAULT_RABI: f64 = 0.118;

impl Settings {
    /// Fills every unset field of `self` from `lower`.
    pub fn or(self, lower: Settings) -> Settings {
        Settings {
            qubits: self.qubits.or(lower.qubits),
            coupling: self.coupling.or(lower.coupling),
            gradient: self.gradient.or(lower.gradient),
            rabi: self.rabi.or(lower.rabi),
            omega0: self.omega0.or(lower.omega0),
            param: self.param.or(lower.param),
            from: self.from.or(lower.from),
            to: self.to.or(lower.to),
            steps: self.steps.or(lower.steps),
            values: self.values.or(lower.values),
            propagator: self.propagator.or(lower.propagator),
            order: self.order.or(lower.order),
            out: self.out.or(lower.out),
            strict: self.strict.or(lower.strict),
        }
    }

    pub fn chain(&self) -> Result<ChainParams, CliError> {
        ChainParams::new(
            self.qubits.unwrap_or(DEFAULT_QUBITS),
            self.omega0.unwrap_or(0.0),
            self.gradient.unwrap_or(DEFAULT_GRADIENT),
            self.coupling.unwrap_or(DEFAULT_COUPLING),
        )
        .map_err(CliError::from)
    }

    pub fn rabi(&self) -> Result<f64, CliError> {
        let rabi = self.rabi.unwrap_or(DEFAULT_RABI);
        if !(rabi.is_finite() && rabi > 0.0) {
            return Err(CliError::Usage(format!(
                "omega must be positive and finite, got {rabi}"
            )));
        }
        Ok(rabi)
    }

    pub fn propagator(&self) -> Result<PropagatorChoice, CliError> {
        match &self.propagator {
            Some(s) => PropagatorChoice::parse(s).map_err(CliError::from),
            None => Ok(PropagatorChoice::Exact),
        }
    }

    pub fn order(&self) -> Result<Order, CliError> {
        match &self.order {
            Some(s) => Order::parse(s).map_err(CliError::from),
            None => Ok(Order::Block),
        }
    }

    pub fn sweep_param(&self) -> Result<SweepParam, CliError> {
        match &self.param {
            Some(s) => SweepParam::parse(s).map_err(CliError::from),
            None => Err(CliError::Usage("sweep needs --param".into())),
        }
    }

    pub fn strict(&self) -> bool {
        self.strict.unwrap_or(false)
    }
}

pub fn load(path: &Path) -> Result<Settings, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text).map_err(|(line, msg)| {
        CliError::Usage(format!("config {} line {line}: {msg}", path.display()))
    })
}

/// Parses `key = value` lines; `#` starts a comment. Errors carry the
/// 1-based line number.
pub fn parse(text: &str) -> Result<Settings, (usize, String)> {
    let mut s = Settings::default();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err((line, format!("expected key = value, got {body:?}")));
        };
        let key = key.trim();
        let value = value.trim();
        let num = |field: &str| -> Result<f64, (usize, String)> {
            value
                .parse::<f64>()
                .map_err(|_| (line, format!("field {field}: {value:?} is not a number")))
        };
        let int = |field: &str| -> Result<usize, (usize, String)> {
            value.parse::<usize>().map_err(|_| {
                (
                    line,
                    format!("field {field}: {value:?} is not a non-negative integer"),
                )
            })
        };
        match key {
            "L" => s.qubits = Some(int(key)?),
            "J" => s.coupling = Some(num(key)?),
            "a" => s.gradient = Some(num(key)?),
            "omega" | "Omega" => s.rabi = Some(num(key)?),
            "omega0" => s.omega0 = Some(num(key)?),
            "param" => s.param = Some(value.to_string()),
            "from" => s.from = Some(num(key)?),
            "to" => s.to = Some(num(key)?),
            "steps" => s.steps = Some(int(key)?),
            "values" => {
                let list =
                    parse_list(value).map_err(|msg| (line, format!("field values: {msg}")))?;
                s.values = Some(list);
            }
            "propagator" => s.propagator = Some(value.to_string()),
            "order" => s.order = Some(value.to_string()),
            "out" => s.out = Some(PathBuf::from(value)),
            "strict" => {
                let b = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err((line, format!("field strict: {value:?} is not a boolean"))),
                };
                s.strict = Some(b);
            }
            other => return Err((line, format!("unknown field {other:?}"))),
        }
    }
    Ok(s)
}

/// Comma-separated numbers.
pub fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .map_err(|_| format!("{t:?} is not a number"))
        })
        .collect()
}
