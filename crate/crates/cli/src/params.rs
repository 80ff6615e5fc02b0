use orbitspace::fiber::{Connectivity, ImageLattice, DEFAULT_ATOL};
use orbitspace::hamsys::{DEFAULT_FULL_RANK_THRESHOLD, DEFAULT_RANK_TOL};
use serde::Serialize;

use crate::args::Flags;
use crate::config::SystemConfig;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_BUDGET: usize = 10_000;
pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_COUNT: usize = 100;

/// Grid cells per axis when neither the config nor a flag sets it.
pub fn default_resolution(dim: usize) -> usize {
    match dim {
        2 => 200,
        4 => 16,
        6 => 6,
        _ => 3,
    }
}

/// Every tunable of a run after applying config defaults and flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Params {
    pub resolution: Vec<usize>,
    pub atol: f64,
    pub tol: f64,
    pub rank_tol: f64,
    pub full_rank_threshold: f64,
    pub seed: u64,
    pub budget: usize,
    pub samples: usize,
    pub count: usize,
    pub connectivity: Connectivity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_point: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<Vec<String>>,
}

impl Params {
    pub fn resolve(cfg: &SystemConfig, flags: &Flags) -> anyhow::Result<Params> {
        let d = &cfg.defaults;
        let dim = 2 * cfg.dof;
        let resolution = match &flags.resolution {
            Some(r) if r.len() == 1 => vec![r[0]; dim],
            Some(r) if r.len() == dim => r.clone(),
            Some(r) => anyhow::bail!("--resolution: expected 1 or {dim} values, got {}", r.len()),
            None => d.resolution.clone().unwrap_or_else(|| vec![default_resolution(dim); dim]),
        };
        if resolution.contains(&0) {
            anyhow::bail!("--resolution: values must be positive");
        }
        let positive = |name: &str, v: Option<f64>| -> anyhow::Result<Option<f64>> {
            match v {
                Some(x) if !(x.is_finite() && x > 0.0) => anyhow::bail!("--{name}: expected a positive number"),
                other => Ok(other),
            }
        };
        let lattice = flags.lattice.clone().or_else(|| d.lattice.clone());
        if let Some(text) = &lattice {
            let parsed: ImageLattice = text.parse().map_err(|e| anyhow::anyhow!("--lattice: {e}"))?;
            if parsed.dim() != cfg.dof {
                anyhow::bail!("--lattice: expected {} axes, got {}", cfg.dof, parsed.dim());
            }
        }
        let check_len = |name: &str, v: &Option<Vec<f64>>, len: usize| -> anyhow::Result<()> {
            match v {
                Some(v) if v.len() != len => anyhow::bail!("--{name}: expected {len} values, got {}", v.len()),
                Some(v) if v.iter().any(|x| !x.is_finite()) => anyhow::bail!("--{name}: values must be finite"),
                _ => Ok(()),
            }
        };
        check_len("value", &flags.value, cfg.dof)?;
        check_len("seed-point", &flags.seed_point, dim)?;
        if let Some(i) = flags.field {
            if i == 0 || i > cfg.dof {
                anyhow::bail!("--field: expected an integral number in 1..={}, got {i}", cfg.dof);
            }
        }
        if matches!(flags.budget, Some(0)) || matches!(flags.samples, Some(0)) || matches!(flags.count, Some(0)) {
            anyhow::bail!("--budget, --samples and --count must be positive");
        }
        Ok(Params {
            resolution,
            atol: positive("atol", flags.atol)?.or(d.atol).unwrap_or(DEFAULT_ATOL),
            tol: positive("tol", flags.tol)?.or(d.tol).unwrap_or(DEFAULT_TOL),
            rank_tol: d.rank_tol.unwrap_or(DEFAULT_RANK_TOL),
            full_rank_threshold: DEFAULT_FULL_RANK_THRESHOLD,
            seed: flags.seed.or(d.seed).unwrap_or(0),
            budget: flags.budget.or(d.budget).unwrap_or(DEFAULT_BUDGET),
            samples: flags.samples.or(d.samples).unwrap_or(DEFAULT_SAMPLES),
            count: flags.count.unwrap_or(DEFAULT_COUNT),
            connectivity: flags.connectivity.into(),
            lattice,
            value: flags.value.clone(),
            seed_point: flags.seed_point.clone(),
            field: flags.field,
            time: flags.time,
            step: positive("step", flags.step)?,
            map: flags.map.clone(),
        })
    }

    pub fn lattice(&self) -> anyhow::Result<ImageLattice> {
        let text = self
            .lattice
            .as_deref()
            .ok_or_else(|| anyhow::anyhow!("no lattice: pass --lattice or set defaults.lattice"))?;
        text.parse().map_err(|e| anyhow::anyhow!("--lattice: {e}"))
    }
}
