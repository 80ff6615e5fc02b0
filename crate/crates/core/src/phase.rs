//! Axis-aligned boxes in phase space and seeded random streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

/// A deterministic random stream. Different `stream` values give
/// independent sequences for the same `seed`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoxError {
    #[error("box bounds have different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("box axis {axis} is empty or inverted: [{min}, {max}]")]
    Degenerate { axis: usize, min: f64, max: f64 },
}

/// Axis-aligned bounds `[min_k, max_k]` with positive volume.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseBox {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl PhaseBox {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self, BoxError> {
        if min.len() != max.len() {
            return Err(BoxError::LengthMismatch(min.len(), max.len()));
        }
        for (axis, (&lo, &hi)) in min.iter().zip(&max).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(BoxError::Degenerate { axis, min: lo, max: hi });
            }
        }
        Ok(PhaseBox { min, max })
    }

    /// `[lo, hi]` on each of `2 * dof` axes.
    pub fn cube(dof: usize, lo: f64, hi: f64) -> Self {
        PhaseBox::new(vec![lo; 2 * dof], vec![hi; 2 * dof]).expect("lo < hi")
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }

    pub fn center(&self) -> Vec<f64> {
        self.min.iter().zip(&self.max).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.min.iter().zip(&self.max))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    /// The box scaled about its center by `factor`.
    pub fn inflated(&self, factor: f64) -> PhaseBox {
        let (min, max) = self
            .min
            .iter()
            .zip(&self.max)
            .map(|(&lo, &hi)| {
                let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo) * factor);
                (c - r, c + r)
            })
            .unzip();
        PhaseBox { min, max }
    }

    /// Largest Euclidean norm of a corner.
    pub fn corner_radius(&self) -> f64 {
        self.min
            .iter()
            .zip(&self.max)
            .map(|(a, b)| a.abs().max(b.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.min
            .iter()
            .zip(&self.max)
            .map(|(&lo, &hi)| rng.gen_range(lo..hi))
            .collect()
    }
}
