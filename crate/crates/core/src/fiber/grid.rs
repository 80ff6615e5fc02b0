use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::hamsys::IntegrableSystem;
use crate::phase::PhaseBox;

/// Upper bound on grid size; memory for cached fields grows linearly in it.
pub const MAX_CELLS: usize = 1 << 26;

/// Width of the marking band in units of the first-order change of `f_i`
/// across one cell.
pub const BAND_FACTOR: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("resolution has {got} axes, box has {expected}")]
    Axes { expected: usize, got: usize },
    #[error("resolution on axis {axis} is {res}, need at least 2")]
    TooCoarse { axis: usize, res: usize },
    #[error("grid would have more than {max} cells")]
    TooLarge { max: usize },
}

/// Uniform cells on a phase box. Cell indices are row-major with the last
/// axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellGrid {
    bounds: PhaseBox,
    res: Vec<usize>,
    size: Vec<f64>,
    #[serde(skip)]
    strides: Vec<usize>,
    count: usize,
}

impl CellGrid {
    pub fn new(bounds: PhaseBox, res: Vec<usize>) -> Result<Self, GridError> {
        if res.len() != bounds.dim() {
            return Err(GridError::Axes {
                expected: bounds.dim(),
                got: res.len(),
            });
        }
        if let Some(axis) = res.iter().position(|&r| r < 2) {
            return Err(GridError::TooCoarse { axis, res: res[axis] });
        }
        let mut count = 1usize;
        for &r in &res {
            count = count
                .checked_mul(r)
                .filter(|&c| c <= MAX_CELLS)
                .ok_or(GridError::TooLarge { max: MAX_CELLS })?;
        }
        let mut strides = vec![1; res.len()];
        for k in (0..res.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * res[k + 1];
        }
        let size = (0..res.len()).map(|k| bounds.width(k) / res[k] as f64).collect();
        Ok(CellGrid {
            bounds,
            res,
            size,
            strides,
            count,
        })
    }

    /// Same resolution `r` on every axis.
    pub fn uniform(bounds: PhaseBox, r: usize) -> Result<Self, GridError> {
        let d = bounds.dim();
        CellGrid::new(bounds, vec![r; d])
    }

    pub fn bounds(&self) -> &PhaseBox {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.res.len()
    }

    pub fn res(&self) -> &[usize] {
        &self.res
    }

    pub fn cell_size(&self) -> &[f64] {
        &self.size
    }

    pub fn cell_count(&self) -> usize {
        self.count
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    pub fn coords_into(&self, mut idx: usize, out: &mut [usize]) {
        for (o, s) in out.iter_mut().zip(&self.strides) {
            *o = idx / s;
            idx %= s;
        }
    }

    pub fn coords(&self, idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        self.coords_into(idx, &mut out);
        out
    }

    pub fn center_into(&self, idx: usize, out: &mut [f64]) {
        let mut rest = idx;
        for k in 0..self.dim() {
            let c = rest / self.strides[k];
            rest %= self.strides[k];
            out[k] = self.bounds.min()[k] + (c as f64 + 0.5) * self.size[k];
        }
    }

    pub fn center(&self, idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.center_into(idx, &mut out);
        out
    }

    /// The cell containing `x`; points on the upper face belong to the last cell.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        if !self.bounds.contains(x) {
            return None;
        }
        let mut idx = 0;
        for k in 0..self.dim() {
            let c = ((x[k] - self.bounds.min()[k]) / self.size[k]).floor() as usize;
            idx += c.min(self.res[k] - 1) * self.strides[k];
        }
        Some(idx)
    }

    /// Whether the cell touches the boundary of the box.
    pub fn on_boundary(&self, idx: usize) -> bool {
        let mut rest = idx;
        for k in 0..self.dim() {
            let c = rest / self.strides[k];
            rest %= self.strides[k];
            if c == 0 || c + 1 == self.res[k] {
                return true;
            }
        }
        false
    }

    /// Calls `f(neighbor, axis)` for each face neighbor.
    pub fn for_each_face_neighbor(&self, idx: usize, mut f: impl FnMut(usize, usize)) {
        let mut rest = idx;
        for k in 0..self.dim() {
            let c = rest / self.strides[k];
            rest %= self.strides[k];
            if c > 0 {
                f(idx - self.strides[k], k);
            }
            if c + 1 < self.res[k] {
                f(idx + self.strides[k], k);
            }
        }
    }

    /// Calls `f` for each cell sharing at least a corner with `idx`.
    pub fn for_each_corner_neighbor(&self, idx: usize, mut f: impl FnMut(usize)) {
        let d = self.dim();
        let coords = self.coords(idx);
        let mut offset = vec![-1i64; d];
        loop {
            if offset.iter().any(|&o| o != 0) {
                let mut ok = true;
                let mut n = 0usize;
                for k in 0..d {
                    let c = coords[k] as i64 + offset[k];
                    if c < 0 || c >= self.res[k] as i64 {
                        ok = false;
                        break;
                    }
                    n += c as usize * self.strides[k];
                }
                if ok {
                    f(n);
                }
            }
            let mut k = 0;
            while k < d && offset[k] == 1 {
                offset[k] = -1;
                k += 1;
            }
            if k == d {
                break;
            }
            offset[k] += 1;
        }
    }
}

/// `F` and `DF` evaluated once at every cell center of a grid. Fiber
/// samples, scans and orbit spaces on the same grid all read from it.
#[derive(Debug, Clone)]
pub struct GridField {
    grid: CellGrid,
    dof: usize,
    values: Vec<f64>,
    jac: Vec<f64>,
    spread: Vec<f64>,
    valid: Vec<bool>,
    invalid: usize,
}

impl GridField {
    /// Cells where `F` or `DF` hits a domain error are kept but never marked.
    pub fn compute(sys: &IntegrableSystem, grid: CellGrid) -> Self {
        assert_eq!(grid.dim(), sys.dim(), "grid dimension must match the system");
        let (n, d) = (sys.dof(), sys.dim());
        let count = grid.cell_count();
        let mut values = vec![f64::NAN; count * n];
        let mut jac = vec![f64::NAN; count * n * d];
        let mut spread = vec![f64::NAN; count * n];
        let mut valid = vec![false; count];
        let h = grid.cell_size().to_vec();
        values
            .par_chunks_mut(n)
            .zip(jac.par_chunks_mut(n * d))
            .zip(spread.par_chunks_mut(n))
            .zip(valid.par_iter_mut())
            .enumerate()
            .for_each_init(
                || (vec![0.0; d], Vec::new()),
                |(x, stack), (idx, (((v, j), s), ok))| {
                    grid.center_into(idx, x);
                    if sys.values_into(x, v, stack).is_err() || sys.jacobian_into(x, j, stack).is_err() {
                        v.fill(f64::NAN);
                        return;
                    }
                    for (i, si) in s.iter_mut().enumerate() {
                        let row = &j[i * d..(i + 1) * d];
                        *si = row.iter().zip(&h).map(|(g, hk)| (g * hk).powi(2)).sum::<f64>().sqrt();
                    }
                    *ok = v.iter().chain(j.iter()).all(|a| a.is_finite());
                },
            );
        let invalid = valid.iter().filter(|v| !**v).count();
        GridField {
            grid,
            dof: n,
            values,
            jac,
            spread,
            valid,
            invalid,
        }
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn is_valid(&self, cell: usize) -> bool {
        self.valid[cell]
    }

    /// Cells skipped because of evaluation domain errors.
    pub fn invalid_count(&self) -> usize {
        self.invalid
    }

    /// `F(center)`.
    pub fn value(&self, cell: usize) -> &[f64] {
        &self.values[cell * self.dof..(cell + 1) * self.dof]
    }

    /// `DF(center)`, row-major.
    pub fn jacobian(&self, cell: usize) -> &[f64] {
        let w = self.dof * self.grid.dim();
        &self.jac[cell * w..(cell + 1) * w]
    }

    /// `||h * grad f_i||` at the center, with `h` the per-axis cell size.
    pub fn spread(&self, cell: usize) -> &[f64] {
        &self.spread[cell * self.dof..(cell + 1) * self.dof]
    }

    /// Marking tolerance of integral `i` in `cell`.
    pub fn tolerance(&self, cell: usize, i: usize, atol: f64) -> f64 {
        atol.max(BAND_FACTOR * self.spread(cell)[i])
    }
}
