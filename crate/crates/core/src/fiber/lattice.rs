//! Image lattices over `R^n`.
//!
//! Text form: one entry per image axis, separated by `,`. An entry is
//! either a range `lo:hi:N` or an explicit list `v1;v2;...`. As scan
//! points a range gives the `N + 1` values `lo + k (hi - lo) / N`; as
//! image cells it gives the `N` intervals between them.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

/// Largest accepted `N` for a single range.
pub const MAX_DIVISIONS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("lattice axis {axis}: {message}")]
pub struct LatticeError {
    pub axis: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LatticeAxis {
    Range { lo: f64, hi: f64, divisions: usize },
    Values { values: Vec<f64> },
}

impl LatticeAxis {
    pub fn points(&self) -> Vec<f64> {
        match self {
            LatticeAxis::Range { lo, hi, divisions } => {
                // weighted form keeps decimal lattices like 0:2:20 exact
                let n = *divisions as f64;
                (0..=*divisions)
                    .map(|k| (lo * (n - k as f64) + hi * k as f64) / n)
                    .collect()
            }
            LatticeAxis::Values { values } => values.clone(),
        }
    }
}

impl fmt::Display for LatticeAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatticeAxis::Range { lo, hi, divisions } => write!(f, "{lo}:{hi}:{divisions}"),
            LatticeAxis::Values { values } => {
                for (k, v) in values.iter().enumerate() {
                    if k > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

/// Uniform cells `[lo + k w, lo + (k + 1) w)` along one image axis; the
/// last cell is closed on the right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellAxis {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl CellAxis {
    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn cell_of(&self, v: f64) -> Option<usize> {
        if !(v >= self.lo && v <= self.hi) {
            return None;
        }
        let k = ((v - self.lo) / self.width()).floor() as usize;
        Some(k.min(self.cells - 1))
    }

    pub fn center(&self, k: usize) -> f64 {
        let (n, j) = (2.0 * self.cells as f64, 2.0 * k as f64 + 1.0);
        (self.lo * (n - j) + self.hi * j) / n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageLattice {
    axes: Vec<LatticeAxis>,
}

impl ImageLattice {
    pub fn new(axes: Vec<LatticeAxis>) -> Result<Self, LatticeError> {
        if axes.is_empty() {
            return Err(LatticeError {
                axis: 0,
                message: "no axes".into(),
            });
        }
        for (axis, a) in axes.iter().enumerate() {
            let err = |m: &str| {
                Err(LatticeError {
                    axis,
                    message: m.into(),
                })
            };
            match a {
                LatticeAxis::Range { lo, hi, divisions } => {
                    if !lo.is_finite() || !hi.is_finite() {
                        return err("bounds must be finite");
                    }
                    if !(lo < hi) {
                        return err("need lo < hi");
                    }
                    if *divisions == 0 || *divisions > MAX_DIVISIONS {
                        return err("division count out of range");
                    }
                }
                LatticeAxis::Values { values } => {
                    if values.is_empty() {
                        return err("empty value list");
                    }
                    if values.iter().any(|v| !v.is_finite()) {
                        return err("values must be finite");
                    }
                }
            }
        }
        Ok(ImageLattice { axes })
    }

    /// The same range on each of `n` axes.
    pub fn uniform(n: usize, lo: f64, hi: f64, divisions: usize) -> Result<Self, LatticeError> {
        ImageLattice::new(vec![LatticeAxis::Range { lo, hi, divisions }; n])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[LatticeAxis] {
        &self.axes
    }

    /// Cartesian product of the axis points, first axis slowest.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = vec![Vec::new()];
        for axis in &self.axes {
            let pts = axis.points();
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    pts.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out
    }

    /// Cell structure, available when every axis is a range.
    pub fn cell_axes(&self) -> Result<Vec<CellAxis>, LatticeError> {
        self.axes
            .iter()
            .enumerate()
            .map(|(axis, a)| match a {
                LatticeAxis::Range { lo, hi, divisions } => Ok(CellAxis {
                    lo: *lo,
                    hi: *hi,
                    cells: *divisions,
                }),
                LatticeAxis::Values { .. } => Err(LatticeError {
                    axis,
                    message: "image cells need a lo:hi:N range".into(),
                }),
            })
            .collect()
    }
}

impl fmt::Display for ImageLattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, a) in self.axes.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

fn parse_number(s: &str, axis: usize) -> Result<f64, LatticeError> {
    let s = s.trim();
    s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| LatticeError {
        axis,
        message: format!("`{s}` is not a finite number"),
    })
}

fn parse_axis(s: &str, axis: usize) -> Result<LatticeAxis, LatticeError> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.len() {
        1 => {
            let values = s
                .split(';')
                .map(|v| parse_number(v, axis))
                .collect::<Result<_, _>>()?;
            Ok(LatticeAxis::Values { values })
        }
        3 => {
            let lo = parse_number(parts[0], axis)?;
            let hi = parse_number(parts[1], axis)?;
            let n = parts[2].trim();
            let divisions = n.parse::<usize>().map_err(|_| LatticeError {
                axis,
                message: format!("`{n}` is not a division count"),
            })?;
            Ok(LatticeAxis::Range { lo, hi, divisions })
        }
        _ => Err(LatticeError {
            axis,
            message: "expected lo:hi:N or v1;v2;...".into(),
        }),
    }
}

impl FromStr for ImageLattice {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let axes = s
            .split(',')
            .enumerate()
            .map(|(axis, a)| parse_axis(a, axis))
            .collect::<Result<_, _>>()?;
        ImageLattice::new(axes)
    }
}
