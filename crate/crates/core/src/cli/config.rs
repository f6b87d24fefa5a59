//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Frequencies take an optional
//! `Hz`, `kHz`, `MHz` or `GHz` suffix (plain numbers are Hz); times take
//! `s`, `ms`, `us` or `ns`. Lists are comma-separated.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64 as C64;

use crate::dynamics::{Propagation, DEFAULT_TOL};
use crate::model::{SystemParams, DEFAULT_PHI, DEFAULT_REGIME_FACTOR};
use crate::steady::Method;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn global(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self {
                line: Some(n),
                message,
            } => write!(f, "config line {n}: {message}"),
            Self {
                line: None,
                message,
            } => write!(f, "config: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Params,
    Dynamics,
    Scan,
    Validate,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Params => "params",
            Scenario::Dynamics => "dynamics",
            Scenario::Scan => "scan",
            Scenario::Validate => "validate",
        }
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "params" => Ok(Scenario::Params),
            "dynamics" => Ok(Scenario::Dynamics),
            "scan" => Ok(Scenario::Scan),
            "validate" => Ok(Scenario::Validate),
            other => Err(format!("unknown scenario '{other}'")),
        }
    }
}

/// Drive values of a scan.
#[derive(Clone, Debug, PartialEq)]
pub enum DriveList {
    /// Multiples of the threshold drive.
    RelativeToThreshold(Vec<f64>),
    /// Absolute drives (Hz).
    Absolute(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: SystemParams,
    /// Whether both decay rates were given.
    pub has_decays: bool,
    pub scenario: Option<Scenario>,
    pub factor: f64,
    pub seed: u64,
    pub cutoffs: Option<(usize, usize)>,
    pub drives: Option<DriveList>,
    pub methods: Vec<Method>,
    pub n_traj: Option<usize>,
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub grid: Option<usize>,
    pub tol: f64,
    pub propagation: Propagation,
    pub out: Option<PathBuf>,
}

const REQUIRED: [&str; 7] = ["nu_a", "nu_b", "delta", "delta_r", "g_d", "g_gr", "g_er"];
const OPTIONAL: [&str; 23] = [
    "g_d_phase",
    "g_gr_phase",
    "g_er_phase",
    "gamma_a",
    "gamma_b",
    "epsilon",
    "phi",
    "factor",
    "seed",
    "cutoff_a",
    "cutoff_b",
    "eps_over_ec",
    "eps_list",
    "methods",
    "n_traj",
    "t_max",
    "dt",
    "t_end",
    "grid",
    "tol",
    "propagation",
    "out",
    "scenario",
];

fn split_unit(text: &str) -> (&str, &str) {
    let t = text.trim();
    let num = t.trim_end_matches(|c: char| c.is_alphabetic() || c == 'μ');
    (num.trim(), &t[num.len()..])
}

fn number(text: &str) -> Result<f64, String> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| format!("malformed number '{}'", text.trim()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite number '{}'", text.trim()))
    }
}

/// `"5.5 GHz"` → `5.5e9`.
pub fn parse_frequency(text: &str) -> Result<f64, String> {
    let (num, unit) = split_unit(text);
    let scale = match unit.to_ascii_lowercase().as_str() {
        "" | "hz" => 1.0,
        "khz" => 1e3,
        "mhz" => 1e6,
        "ghz" => 1e9,
        _ => return Err(format!("unknown frequency unit '{unit}'")),
    };
    Ok(number(num)? * scale)
}

/// `"13 us"` → `1.3e-5`.
pub fn parse_time(text: &str) -> Result<f64, String> {
    let (num, unit) = split_unit(text);
    // dividing keeps "250 ns" identical to the literal 250e-9
    let per_second = match unit {
        "" | "s" => 1.0,
        "ms" => 1e3,
        "us" | "μs" => 1e6,
        "ns" => 1e9,
        _ => return Err(format!("unknown time unit '{unit}'")),
    };
    Ok(number(num)? / per_second)
}

fn integer<T: FromStr>(text: &str) -> Result<T, String> {
    text.trim()
        .parse()
        .map_err(|_| format!("malformed integer '{}'", text.trim()))
}

fn list<T>(text: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',').map(item).collect()
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut entries: HashMap<String, (usize, String)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| {
            ConfigError::at(line, format!("expected 'key = value', got '{content}'"))
        })?;
        let key = key.trim();
        if !REQUIRED.contains(&key) && !OPTIONAL.contains(&key) {
            return Err(ConfigError::at(line, format!("unknown key '{key}'")));
        }
        if let Some((first, _)) = entries.get(key) {
            return Err(ConfigError::at(
                line,
                format!("duplicate key '{key}' (first set on line {first})"),
            ));
        }
        entries.insert(key.to_string(), (line, value.trim().to_string()));
    }
    for key in REQUIRED {
        if !entries.contains_key(key) {
            return Err(ConfigError::global(format!("missing required key '{key}'")));
        }
    }

    let get = |key: &str| entries.get(key);
    let parse =
        |key: &str, f: &dyn Fn(&str) -> Result<f64, String>| -> Result<Option<f64>, ConfigError> {
            get(key)
                .map(|(line, v)| f(v).map_err(|e| ConfigError::at(*line, format!("{key}: {e}"))))
                .transpose()
        };
    let freq = |key: &str| parse(key, &parse_frequency);
    let real = |key: &str| parse(key, &number);
    let time = |key: &str| parse(key, &parse_time);
    let int = |key: &str| -> Result<Option<usize>, ConfigError> {
        get(key)
            .map(|(line, v)| {
                integer::<usize>(v).map_err(|e| ConfigError::at(*line, format!("{key}: {e}")))
            })
            .transpose()
    };
    let required =
        |key: &str| -> Result<f64, ConfigError> { Ok(freq(key)?.expect("checked above")) };
    let coupling = |key: &str| -> Result<C64, ConfigError> {
        let phase = real(&format!("{key}_phase"))?.unwrap_or(0.0);
        Ok(C64::from_polar(required(key)?, phase))
    };

    let gamma_a = freq("gamma_a")?;
    let gamma_b = freq("gamma_b")?;
    let params = SystemParams {
        nu_a: required("nu_a")?,
        nu_b: required("nu_b")?,
        delta: required("delta")?,
        delta_r: required("delta_r")?,
        g_d: coupling("g_d")?,
        g_gr: coupling("g_gr")?,
        g_er: coupling("g_er")?,
        gamma_a: gamma_a.unwrap_or(0.0),
        gamma_b: gamma_b.unwrap_or(0.0),
        epsilon: freq("epsilon")?.unwrap_or(0.0),
        phi: real("phi")?.unwrap_or(DEFAULT_PHI),
    };

    let cutoffs = match (int("cutoff_a")?, int("cutoff_b")?) {
        (Some(a), Some(b)) => Some((a, b)),
        (None, None) => None,
        _ => {
            return Err(ConfigError::global(
                "cutoff_a and cutoff_b must be given together",
            ))
        }
    };
    let drives = match (get("eps_over_ec"), get("eps_list")) {
        (Some(_), Some((line, _))) => {
            return Err(ConfigError::at(
                *line,
                "eps_over_ec and eps_list are mutually exclusive",
            ));
        }
        (Some((line, v)), None) => Some(DriveList::RelativeToThreshold(
            list(v, number).map_err(|e| ConfigError::at(*line, format!("eps_over_ec: {e}")))?,
        )),
        (None, Some((line, v))) => Some(DriveList::Absolute(
            list(v, parse_frequency)
                .map_err(|e| ConfigError::at(*line, format!("eps_list: {e}")))?,
        )),
        (None, None) => None,
    };
    let methods = match get("methods") {
        Some((line, v)) => list(v, |m| m.parse::<Method>().map_err(|e| e.to_string()))
            .map_err(|e| ConfigError::at(*line, e))?,
        None => vec![Method::Linearized],
    };
    let seed = match get("seed") {
        Some((line, v)) => {
            integer::<u64>(v).map_err(|e| ConfigError::at(*line, format!("seed: {e}")))?
        }
        None => DEFAULT_SEED,
    };
    let scenario = get("scenario")
        .map(|(line, v)| v.parse::<Scenario>().map_err(|e| ConfigError::at(*line, e)))
        .transpose()?;
    let tol = real("tol")?.unwrap_or(DEFAULT_TOL);
    let propagation = match get("propagation") {
        None => Propagation::Sector,
        Some((_, v)) if v == "sector" => Propagation::Sector,
        Some((_, v)) if v == "krylov" => Propagation::Krylov { tol },
        Some((line, v)) => {
            return Err(ConfigError::at(
                *line,
                format!("propagation must be 'sector' or 'krylov', got '{v}'"),
            ))
        }
    };

    Ok(RunConfig {
        params,
        has_decays: gamma_a.is_some() && gamma_b.is_some(),
        scenario,
        factor: real("factor")?.unwrap_or(DEFAULT_REGIME_FACTOR),
        seed,
        cutoffs,
        drives,
        methods,
        n_traj: int("n_traj")?,
        t_max: time("t_max")?,
        dt: time("dt")?,
        t_end: time("t_end")?,
        grid: int("grid")?,
        tol,
        propagation,
        out: get("out").map(|(_, v)| PathBuf::from(v)),
    })
}
