//! System configuration files.
//!
//! A config is a JSON object:
//!
//! ```json
//! {
//!   "name": "doublewell",
//!   "dof": 1,
//!   "integrals": ["p1^2/2 + (q1^2-1)^2"],
//!   "box": { "min": [-2.5, -3], "max": [2.5, 3] },
//!   "defaults": { "resolution": 301, "lattice": "0:2:20", "seed": 0 }
//! }
//! ```
//!
//! `box.min` and `box.max` list `q1..qn` then `p1..pn`. Every `defaults`
//! entry is optional and can be overridden on the command line:
//! `resolution` (integer or one integer per axis), `atol`, `tol`,
//! `rank_tol`, `seed`, `budget`, `samples`, `lattice`.

use std::fmt;
use std::path::Path;

use orbitspace::expr::ParseError;
use orbitspace::fiber::ImageLattice;
use orbitspace::{parse, IntegrableSystem, PhaseBox, VariableList};
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Largest accepted `dof`; grids beyond this are out of reach anyway.
pub const MAX_DOF: usize = 8;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("integrals[{index}]: {source}")]
    Parse { index: usize, source: ParseError },
}

impl ConfigError {
    fn schema(path: impl fmt::Display, message: impl Into<String>) -> Self {
        ConfigError::Schema {
            path: path.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Defaults {
    pub resolution: Option<Vec<usize>>,
    pub atol: Option<f64>,
    pub tol: Option<f64>,
    pub rank_tol: Option<f64>,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub samples: Option<usize>,
    pub lattice: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SystemConfig {
    pub name: String,
    pub dof: usize,
    pub integrals: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub defaults: Defaults,
    pub system: IntegrableSystem,
    /// Hex SHA-256 of the file bytes.
    pub digest: String,
}

pub fn load_config(path: &Path) -> Result<SystemConfig, ConfigError> {
    let bytes = std::fs::read(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&bytes)
}

pub fn parse_config(bytes: &[u8]) -> Result<SystemConfig, ConfigError> {
    let digest = Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect();
    let root: Value = serde_json::from_slice(bytes).map_err(|e| ConfigError::Json(e.to_string()))?;
    let obj = root
        .as_object()
        .ok_or_else(|| ConfigError::schema("config", "expected a JSON object"))?;
    reject_unknown(obj, "", &["name", "dof", "integrals", "box", "defaults"])?;

    let name = obj
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| ConfigError::schema("name", "expected a string"))?
        .to_string();
    let dof = obj
        .get("dof")
        .and_then(Value::as_u64)
        .filter(|d| (1..=MAX_DOF as u64).contains(d))
        .ok_or_else(|| ConfigError::schema("dof", format!("expected an integer in 1..={MAX_DOF}")))?
        as usize;

    let integrals = obj
        .get("integrals")
        .and_then(Value::as_array)
        .ok_or_else(|| ConfigError::schema("integrals", "expected an array of strings"))?;
    if integrals.len() != dof {
        return Err(ConfigError::schema("integrals", format!("expected {dof}")));
    }
    let integrals = integrals
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| ConfigError::schema(format!("integrals[{i}]"), "expected a string"))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let bx = obj
        .get("box")
        .and_then(Value::as_object)
        .ok_or_else(|| ConfigError::schema("box", "expected an object with min and max"))?;
    reject_unknown(bx, "box.", &["min", "max"])?;
    let min = number_array(bx.get("min"), "box.min", 2 * dof)?;
    let max = number_array(bx.get("max"), "box.max", 2 * dof)?;
    for k in 0..2 * dof {
        if min[k] >= max[k] {
            return Err(ConfigError::schema(
                format!("box.min[{k}]"),
                format!("must be less than box.max[{k}] ({} >= {})", min[k], max[k]),
            ));
        }
    }

    let defaults = match obj.get("defaults") {
        None => Defaults::default(),
        Some(v) => parse_defaults(v, dof)?,
    };

    let vars = VariableList::canonical(dof);
    let exprs = integrals
        .iter()
        .enumerate()
        .map(|(index, src)| parse(src, &vars).map_err(|source| ConfigError::Parse { index, source }))
        .collect::<Result<Vec<_>, _>>()?;
    let bounds = PhaseBox::new(min.clone(), max.clone()).map_err(|e| ConfigError::schema("box", e.to_string()))?;
    let system = IntegrableSystem::new(name.clone(), dof, exprs, bounds)
        .map_err(|e| ConfigError::schema("integrals", e.to_string()))?;

    Ok(SystemConfig {
        name,
        dof,
        integrals,
        min,
        max,
        defaults,
        system,
        digest,
    })
}

fn reject_unknown(obj: &Map<String, Value>, prefix: &str, known: &[&str]) -> Result<(), ConfigError> {
    match obj.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(ConfigError::schema(format!("{prefix}{k}"), "unknown field")),
        None => Ok(()),
    }
}

fn number_array(v: Option<&Value>, path: &str, len: usize) -> Result<Vec<f64>, ConfigError> {
    let arr = v
        .and_then(Value::as_array)
        .ok_or_else(|| ConfigError::schema(path, format!("expected an array of {len} numbers")))?;
    if arr.len() != len {
        return Err(ConfigError::schema(path, format!("expected {len} numbers, got {}", arr.len())));
    }
    arr.iter()
        .enumerate()
        .map(|(k, x)| {
            x.as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| ConfigError::schema(format!("{path}[{k}]"), "expected a finite number"))
        })
        .collect()
}

fn positive(v: &Value, path: &str) -> Result<f64, ConfigError> {
    v.as_f64()
        .filter(|x| x.is_finite() && *x > 0.0)
        .ok_or_else(|| ConfigError::schema(path, "expected a positive number"))
}

fn count(v: &Value, path: &str) -> Result<usize, ConfigError> {
    v.as_u64()
        .filter(|n| *n >= 1)
        .map(|n| n as usize)
        .ok_or_else(|| ConfigError::schema(path, "expected a positive integer"))
}

fn parse_defaults(v: &Value, dof: usize) -> Result<Defaults, ConfigError> {
    let obj = v
        .as_object()
        .ok_or_else(|| ConfigError::schema("defaults", "expected an object"))?;
    reject_unknown(
        obj,
        "defaults.",
        &["resolution", "atol", "tol", "rank_tol", "seed", "budget", "samples", "lattice"],
    )?;
    let mut d = Defaults::default();
    for (key, v) in obj {
        let path = format!("defaults.{key}");
        match key.as_str() {
            "resolution" => {
                d.resolution = Some(match v {
                    Value::Array(items) => {
                        if items.len() != 2 * dof {
                            return Err(ConfigError::schema(path, format!("expected {} integers", 2 * dof)));
                        }
                        items
                            .iter()
                            .enumerate()
                            .map(|(k, x)| count(x, &format!("{path}[{k}]")))
                            .collect::<Result<_, _>>()?
                    }
                    _ => vec![count(v, &path)?; 2 * dof],
                })
            }
            "atol" => d.atol = Some(positive(v, &path)?),
            "tol" => d.tol = Some(positive(v, &path)?),
            "rank_tol" => d.rank_tol = Some(positive(v, &path)?),
            "seed" => d.seed = Some(v.as_u64().ok_or_else(|| ConfigError::schema(&path, "expected an unsigned integer"))?),
            "budget" => d.budget = Some(count(v, &path)?),
            "samples" => d.samples = Some(count(v, &path)?),
            "lattice" => {
                let text = v.as_str().ok_or_else(|| ConfigError::schema(&path, "expected a string"))?;
                let lattice: ImageLattice = text.parse().map_err(|e| ConfigError::schema(&path, format!("{e}")))?;
                if lattice.dim() != dof {
                    return Err(ConfigError::schema(path, format!("expected {dof} axes")));
                }
                d.lattice = Some(text.to_string());
            }
            _ => unreachable!("unknown keys are rejected above"),
        }
    }
    Ok(d)
}
