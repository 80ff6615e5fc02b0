//! Grid-sampled fibers `F^{-1}(c)` and their connected components.
//!
//! A cell is marked for the value `c` when for every integral
//! `|f_i(center) - c_i| <= max(atol, 0.75 ||h * grad f_i(center)||)`, where
//! `h` is the per-axis cell size. The band is wide enough that a smooth
//! level set crossing a cell almost always marks it, so the discrete fiber
//! does not break up at resolution scale.
//!
//! Components use face adjacency by default. Corner adjacency is
//! available, but it can join components that only come near each other.

mod grid;
mod lattice;
mod orbit_check;
mod scan;
mod unionfind;

use rayon::prelude::*;
use serde::Serialize;

pub use grid::{CellGrid, GridError, GridField, BAND_FACTOR, MAX_CELLS};
pub use lattice::{CellAxis, ImageLattice, LatticeAxis, LatticeError, MAX_DIVISIONS};
pub use orbit_check::{compare_orbit_with_fiber, orbit_vs_fiber_check, OrbitFiberReport};
pub use scan::{bifurcation_scan, cell_near_critical, near_critical_cells, ScanRow};
pub use unionfind::UnionFind;

/// Default absolute floor of the marking band.
pub const DEFAULT_ATOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Connectivity {
    /// Cells sharing a face (`2 * dim` neighbors).
    #[default]
    Face,
    /// Cells sharing at least a corner (`3^dim - 1` neighbors).
    Corner,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiberSample {
    pub value: Vec<f64>,
    pub atol: f64,
    /// Marked cell indices in increasing order.
    pub marked: Vec<usize>,
    /// Cells left out because `F` could not be evaluated there.
    pub skipped: usize,
}

impl FiberSample {
    pub fn is_empty(&self) -> bool {
        self.marked.is_empty()
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.marked.binary_search(&cell).is_ok()
    }
}

pub fn marks(field: &GridField, cell: usize, c: &[f64], atol: f64) -> bool {
    field.is_valid(cell)
        && field
            .value(cell)
            .iter()
            .zip(c)
            .enumerate()
            .all(|(i, (v, ci))| (v - ci).abs() <= field.tolerance(cell, i, atol))
}

pub fn sample_fiber(field: &GridField, c: &[f64], atol: f64) -> FiberSample {
    assert_eq!(c.len(), field.dof(), "value must have one entry per integral");
    assert!(atol > 0.0, "atol must be positive");
    let marked = (0..field.grid().cell_count())
        .into_par_iter()
        .filter(|&cell| marks(field, cell, c, atol))
        .collect();
    FiberSample {
        value: c.to_vec(),
        atol,
        marked,
        skipped: field.invalid_count(),
    }
}

/// Component labels of a set of cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentLabeling {
    /// Cells in increasing order.
    pub cells: Vec<usize>,
    /// `labels[k]` is the component of `cells[k]`.
    pub labels: Vec<usize>,
    pub count: usize,
    /// Smallest cell of each component; labels are numbered in the order
    /// of their representatives.
    pub representatives: Vec<usize>,
}

impl ComponentLabeling {
    pub fn label_of(&self, cell: usize) -> Option<usize> {
        self.cells.binary_search(&cell).ok().map(|k| self.labels[k])
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn cells_of(&self, label: usize) -> impl Iterator<Item = usize> + '_ {
        self.cells
            .iter()
            .zip(&self.labels)
            .filter(move |(_, l)| **l == label)
            .map(|(c, _)| *c)
    }
}

/// Union-find labeling of sorted `cells`. Two adjacent cells are joined
/// only when `same_group` holds for their positions in `cells`.
pub(crate) fn label_cells(
    grid: &CellGrid,
    cells: &[usize],
    connectivity: Connectivity,
    same_group: impl Fn(usize, usize) -> bool,
) -> ComponentLabeling {
    debug_assert!(cells.windows(2).all(|w| w[0] < w[1]));
    const NONE: u32 = u32::MAX;
    let mut slot = vec![NONE; grid.cell_count()];
    for (k, &c) in cells.iter().enumerate() {
        slot[c] = k as u32;
    }
    let mut uf = UnionFind::new(cells.len());
    for (k, &c) in cells.iter().enumerate() {
        let mut join = |nb: usize| {
            let j = slot[nb];
            if nb > c && j != NONE && same_group(k, j as usize) {
                uf.union(k, j as usize);
            }
        };
        match connectivity {
            Connectivity::Face => grid.for_each_face_neighbor(c, |nb, _| join(nb)),
            Connectivity::Corner => grid.for_each_corner_neighbor(c, join),
        }
    }
    let mut root_label = vec![usize::MAX; cells.len()];
    let mut labels = Vec::with_capacity(cells.len());
    let mut representatives = Vec::new();
    for (k, &c) in cells.iter().enumerate() {
        let r = uf.find(k);
        if root_label[r] == usize::MAX {
            root_label[r] = representatives.len();
            representatives.push(c);
        }
        labels.push(root_label[r]);
    }
    ComponentLabeling {
        cells: cells.to_vec(),
        labels,
        count: representatives.len(),
        representatives,
    }
}

pub fn connected_components(grid: &CellGrid, fs: &FiberSample, connectivity: Connectivity) -> ComponentLabeling {
    label_cells(grid, &fs.marked, connectivity, |_, _| true)
}

pub fn fiber_component_count(field: &GridField, c: &[f64], atol: f64, connectivity: Connectivity) -> usize {
    connected_components(field.grid(), &sample_fiber(field, c, atol), connectivity).count
}
