use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use super::Expr;
use crate::phase::{seeded_rng, PhaseBox};

/// Source of sample points for numeric zero tests.
pub trait PointSampler {
    fn sample(&mut self) -> Vec<f64>;
}

/// Uniform samples in an axis-aligned box from a seeded ChaCha stream.
#[derive(Debug, Clone)]
pub struct BoxSampler {
    bounds: PhaseBox,
    rng: ChaCha8Rng,
}

impl BoxSampler {
    pub fn new(bounds: PhaseBox, seed: u64, stream: u64) -> Self {
        BoxSampler {
            bounds,
            rng: seeded_rng(seed, stream),
        }
    }
}

impl PointSampler for BoxSampler {
    fn sample(&mut self) -> Vec<f64> {
        self.bounds.sample(&mut self.rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum ZeroVerdict {
    SymbolicZero,
    /// Every sample was within tolerance; this is evidence, not proof.
    NumericZero { samples: usize },
    Nonzero { witness: Vec<f64>, value: f64 },
}

impl ZeroVerdict {
    pub fn is_zero(&self) -> bool {
        !matches!(self, ZeroVerdict::Nonzero { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("zero test inconclusive: all {attempts} sample points hit domain errors")]
pub struct Inconclusive {
    pub attempts: usize,
}

/// Decides whether `e` vanishes identically: symbolically when the
/// simplifier reduces it to `0`, otherwise by sampling `count` points.
pub fn is_identically_zero(
    e: &Expr,
    sampler: &mut dyn PointSampler,
    count: usize,
    tol: f64,
) -> Result<ZeroVerdict, Inconclusive> {
    assert!(count >= 1, "count must be at least 1");
    assert!(tol > 0.0, "tol must be positive");
    let simplified = e.simplify();
    if simplified.is_const(0.0) {
        return Ok(ZeroVerdict::SymbolicZero);
    }
    let prog = simplified.compile();
    let mut stack = Vec::with_capacity(prog.stack_size());
    let mut evaluated = 0;
    for _ in 0..count {
        let x = sampler.sample();
        let Ok(value) = prog.eval_with(&x, &mut stack) else {
            continue;
        };
        evaluated += 1;
        if !(value.abs() <= tol) {
            return Ok(ZeroVerdict::Nonzero { witness: x, value });
        }
    }
    if evaluated == 0 {
        return Err(Inconclusive { attempts: count });
    }
    Ok(ZeroVerdict::NumericZero { samples: evaluated })
}
