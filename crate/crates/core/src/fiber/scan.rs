use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::{connected_components, sample_fiber, Connectivity, FiberSample, GridField, ImageLattice};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub value: Vec<f64>,
    /// Component count; 0 means the value is outside the sampled image.
    pub count: usize,
    pub marked: usize,
    /// Marked cells that may contain a point where `rank DF < n`.
    pub near_critical: usize,
}

impl ScanRow {
    /// Discrete counts at critical values depend on resolution.
    pub fn critical(&self) -> bool {
        self.near_critical > 0
    }
}

fn smallest_singular_value(jac: &[f64], n: usize, d: usize) -> f64 {
    DMatrix::from_row_slice(n, d, jac)
        .singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Whether a rank drop of `DF` inside `cell` cannot be excluded.
///
/// `DF` is Lipschitz near the center with a constant `L` estimated from
/// the face neighbors, so the smallest singular value stays above
/// `sigma_min(center) - L |h|` across the cell. The cell is flagged when
/// that lower bound reaches zero.
pub fn cell_near_critical(field: &GridField, cell: usize) -> bool {
    let grid = field.grid();
    let (n, d) = (field.dof(), grid.dim());
    let diag = grid.cell_size().iter().map(|h| h * h).sum::<f64>().sqrt();
    let j = field.jacobian(cell);
    let sigma = smallest_singular_value(j, n, d);
    let mut lip = 0.0f64;
    grid.for_each_face_neighbor(cell, |nb, axis| {
        if field.is_valid(nb) {
            let diff = field
                .jacobian(nb)
                .iter()
                .zip(j)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            lip = lip.max(diff / grid.cell_size()[axis]);
        }
    });
    sigma <= lip * diag
}

/// Counts marked cells flagged by [`cell_near_critical`].
pub fn near_critical_cells(field: &GridField, fs: &FiberSample) -> usize {
    fs.marked.par_iter().filter(|&&cell| cell_near_critical(field, cell)).count()
}

/// Fiber component counts over every lattice point.
pub fn bifurcation_scan(
    field: &GridField,
    lattice: &ImageLattice,
    atol: f64,
    connectivity: Connectivity,
) -> Vec<ScanRow> {
    assert_eq!(lattice.dim(), field.dof(), "lattice must have one axis per integral");
    lattice
        .points()
        .into_par_iter()
        .map(|c| {
            let fs = sample_fiber(field, &c, atol);
            let count = connected_components(field.grid(), &fs, connectivity).count;
            ScanRow {
                near_critical: near_critical_cells(field, &fs),
                marked: fs.marked.len(),
                count,
                value: c,
            }
        })
        .collect()
}
