//! The orbit space `N` discretized over an image lattice.
//!
//! Each image cell `c` (a box in `R^n`) defines a slab: the phase cells
//! whose center maps into `c` under `F`. An element of `N` is a connected
//! component of one slab, see [`build_orbit_space`]. The projection `pi` sends each marked phase cell
//! to its element and `mu` sends each element to its image cell, so
//! `F = mu . pi` holds cell by cell by construction.
//!
//! Two elements are adjacent when they share or touch phase cells and
//! their image cells are neighbors (Chebyshev distance 1). The
//! resulting graph is the base-space graph; branch points appear where
//! fibers split or merge.

mod closedness;
mod equiv;
mod symplectic;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::fiber::{cell_near_critical, CellAxis, Connectivity, GridField, ImageLattice, LatticeError, UnionFind};

pub use closedness::{image_closedness_probe, BoundStatus, ClosednessReport, CoordinateBound, Extreme};
pub use equiv::{
    systems_equivalent, EquivError, EquivalenceEvidence, EquivalenceOptions, EquivalenceVerdict, FunctionRingPresentation, RingError,
    Verdict,
};
pub use symplectic::{
    compose_maps, structure_matrix, symplectic_defect, symplectic_equivalence_check, Condition, SymplecticError,
    SymplecticFailure, SymplecticReport,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Label {
    /// Image cell multi-index.
    pub slab: Vec<usize>,
    /// Rank among the components of the same slab, by smallest cell.
    pub component: usize,
    /// `mu` of the element: the center of its image cell.
    pub value: Vec<f64>,
    pub cells: usize,
    pub representative: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitSpace {
    pub lattice: Vec<CellAxis>,
    pub connectivity: Connectivity,
    /// Marked phase cells in increasing order.
    pub cells: Vec<usize>,
    /// `pi[k]` is the element containing `cells[k]`.
    pub pi: Vec<usize>,
    /// Elements ordered by slab, then component.
    pub labels: Vec<Label>,
    /// Base-space graph edges `(a, b)` with `a < b`, sorted.
    pub edges: Vec<(usize, usize)>,
}

fn slab_index(lattice: &[CellAxis], v: &[f64]) -> Option<usize> {
    let mut idx = 0;
    for (axis, x) in lattice.iter().zip(v) {
        idx = idx * axis.cells + axis.cell_of(*x)?;
    }
    Some(idx)
}

fn slab_coords(lattice: &[CellAxis], mut idx: usize) -> Vec<usize> {
    let mut out = vec![0; lattice.len()];
    for (k, axis) in lattice.iter().enumerate().rev() {
        out[k] = idx % axis.cells;
        idx /= axis.cells;
    }
    out
}

/// Image cells a phase cell belongs to: its own one (`strict`) plus, away
/// from critical points, every image cell its marking band reaches.
fn memberships(field: &GridField, axes: &[CellAxis], cell: usize, atol: f64) -> Vec<(usize, bool)> {
    if !field.is_valid(cell) {
        return Vec::new();
    }
    let v = field.value(cell);
    let strict = slab_index(axes, v);
    let mut ranges = Vec::with_capacity(axes.len());
    for (i, (axis, x)) in axes.iter().zip(v).enumerate() {
        let t = field.tolerance(cell, i, atol);
        if x + t < axis.lo || x - t > axis.hi {
            return strict.map(|s| vec![(s, true)]).unwrap_or_default();
        }
        let lo = axis.cell_of((x - t).max(axis.lo)).expect("clamped into range");
        let hi = axis.cell_of((x + t).min(axis.hi)).expect("clamped into range");
        ranges.push((lo, hi));
    }
    if ranges.iter().all(|(lo, hi)| lo == hi) || cell_near_critical(field, cell) {
        return strict.map(|s| vec![(s, true)]).unwrap_or_default();
    }
    let mut out = vec![(0usize, true)];
    for (axis, (lo, hi)) in axes.iter().zip(ranges) {
        out = out
            .into_iter()
            .flat_map(|(idx, _)| (lo..=hi).map(move |k| (idx * axis.cells + k, true)))
            .collect();
    }
    for m in &mut out {
        m.1 = Some(m.0) == strict;
    }
    out
}

/// Builds the orbit space of `field` over the cells of `lattice`.
///
/// A slab whose phase-space thickness is below the cell size would break
/// into fragments under a strict center-in-cell rule. Slab components are
/// therefore computed on the slab widened by the marking band, except at
/// cells where `DF` may lose rank: there widening would join components
/// whose closures only touch at a critical point. Each element keeps only
/// the cells whose own image cell is its slab, so `pi` is a function and
/// `F = mu . pi` holds exactly.
pub fn build_orbit_space(
    field: &GridField,
    lattice: &ImageLattice,
    atol: f64,
    connectivity: Connectivity,
) -> Result<OrbitSpace, LatticeError> {
    assert_eq!(lattice.dim(), field.dof(), "lattice must have one axis per integral");
    let axes = lattice.cell_axes()?;
    let grid = field.grid();
    // (cell, slab, strict), sorted by (cell, slab)
    let nodes: Vec<(usize, usize, bool)> = (0..grid.cell_count())
        .into_par_iter()
        .flat_map_iter(|cell| {
            memberships(field, &axes, cell, atol)
                .into_iter()
                .map(move |(s, strict)| (cell, s, strict))
        })
        .collect();
    let find = |cell: usize, slab: usize| nodes.binary_search_by(|n| (n.0, n.1).cmp(&(cell, slab))).ok();

    let mut uf = UnionFind::new(nodes.len());
    for (k, &(cell, slab, _)) in nodes.iter().enumerate() {
        let mut join = |nb: usize| {
            if nb > cell {
                if let Some(j) = find(nb, slab) {
                    uf.union(k, j);
                }
            }
        };
        match connectivity {
            Connectivity::Face => grid.for_each_face_neighbor(cell, |nb, _| join(nb)),
            Connectivity::Corner => grid.for_each_corner_neighbor(cell, join),
        }
    }

    // Elements are the components holding at least one strict node,
    // ordered by (slab, smallest strict cell).
    let mut first: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (k, &(cell, slab, strict)) in nodes.iter().enumerate() {
        if strict {
            first.entry(uf.find(k)).or_insert((slab, cell));
        }
    }
    let mut order: Vec<(usize, usize, usize)> = first.iter().map(|(&root, &(s, c))| (s, c, root)).collect();
    order.sort_unstable();
    let mut label_of_root = BTreeMap::new();
    let mut labels = Vec::with_capacity(order.len());
    let mut prev_slab = None;
    let mut component = 0;
    for (new, &(s, rep, root)) in order.iter().enumerate() {
        label_of_root.insert(root, new);
        component = if prev_slab == Some(s) { component + 1 } else { 0 };
        prev_slab = Some(s);
        let slab = slab_coords(&axes, s);
        let value = slab.iter().zip(&axes).map(|(&k, a)| a.center(k)).collect();
        labels.push(Label {
            slab,
            component,
            value,
            cells: 0,
            representative: rep,
        });
    }

    let mut cells = Vec::new();
    let mut pi = Vec::new();
    let mut node_label = vec![None; nodes.len()];
    for (k, &(cell, _, strict)) in nodes.iter().enumerate() {
        let label = label_of_root.get(&uf.find(k)).copied();
        node_label[k] = label;
        if strict {
            let l = label.expect("strict nodes always carry a label");
            cells.push(cell);
            pi.push(l);
            labels[l].cells += 1;
        }
    }

    let near = |a: usize, b: usize| {
        a != b
            && labels[a]
                .slab
                .iter()
                .zip(&labels[b].slab)
                .all(|(x, y)| x.abs_diff(*y) <= 1)
    };
    let mut edges = BTreeSet::new();
    let mut add = |a: Option<usize>, b: Option<usize>| {
        if let (Some(a), Some(b)) = (a, b) {
            if near(a, b) {
                edges.insert((a.min(b), a.max(b)));
            }
        }
    };
    // elements sharing a phase cell
    let mut k = 0;
    while k < nodes.len() {
        let mut end = k + 1;
        while end < nodes.len() && nodes[end].0 == nodes[k].0 {
            end += 1;
        }
        for a in k..end {
            for b in a + 1..end {
                add(node_label[a], node_label[b]);
            }
        }
        k = end;
    }
    // elements with face-adjacent own cells
    for (k, &cell) in cells.iter().enumerate() {
        grid.for_each_face_neighbor(cell, |nb, _| {
            if nb > cell {
                if let Ok(j) = cells.binary_search(&nb) {
                    add(Some(pi[k]), Some(pi[j]));
                }
            }
        });
    }

    Ok(OrbitSpace {
        lattice: axes,
        connectivity,
        cells,
        pi,
        labels,
        edges: edges.into_iter().collect(),
    })
}

impl OrbitSpace {
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.labels.len()];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Number of connected components of the base-space graph.
    pub fn graph_components(&self) -> usize {
        let mut uf = UnionFind::new(self.labels.len());
        let mut count = self.labels.len();
        for &(a, b) in &self.edges {
            if uf.union(a, b) {
                count -= 1;
            }
        }
        count
    }

    fn is_tree(&self) -> bool {
        !self.is_empty() && self.graph_components() == 1 && self.edges.len() + 1 == self.labels.len()
    }

    /// A simple path through all elements.
    pub fn is_path(&self) -> bool {
        self.is_tree() && self.degrees().iter().all(|&d| d <= 2)
    }

    /// A tree with one branch point of degree 3 and three leaves.
    pub fn is_y_shaped(&self) -> bool {
        let deg = self.degrees();
        self.is_tree()
            && deg.iter().filter(|&&d| d == 3).count() == 1
            && deg.iter().all(|&d| d <= 3)
            && deg.iter().filter(|&&d| d == 1).count() == 3
    }
}

/// The first phase cell where `mu(pi(cell))` differs from the image cell
/// of `F(center)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorizationFailure {
    pub cell: usize,
    pub expected_slab: Option<Vec<usize>>,
    pub found_slab: Vec<usize>,
}

/// Recomputes the image cell of every marked phase cell and compares it
/// with `mu(pi(cell))`.
pub fn check_factorization(os: &OrbitSpace, field: &GridField) -> Result<(), FactorizationFailure> {
    for (&cell, &label) in os.cells.iter().zip(&os.pi) {
        let found = &os.labels[label].slab;
        let expected = if field.is_valid(cell) {
            slab_index(&os.lattice, field.value(cell)).map(|s| slab_coords(&os.lattice, s))
        } else {
            None
        };
        if expected.as_ref() != Some(found) {
            return Err(FactorizationFailure {
                cell,
                expected_slab: expected,
                found_slab: found.clone(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuWitness {
    pub slab: Vec<usize>,
    pub value: Vec<f64>,
    pub components: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuReport {
    /// Every nonempty image cell has exactly one element.
    pub bijective: bool,
    pub nonempty_slabs: usize,
    /// Image cells whose slab is disconnected.
    pub witnesses: Vec<MuWitness>,
}

pub fn mu_bijectivity_test(os: &OrbitSpace) -> MuReport {
    let mut per_slab: BTreeMap<&[usize], (usize, &[f64])> = BTreeMap::new();
    for l in &os.labels {
        per_slab.entry(&l.slab).or_insert((0, &l.value)).0 += 1;
    }
    let witnesses: Vec<MuWitness> = per_slab
        .iter()
        .filter(|(_, (n, _))| *n >= 2)
        .map(|(slab, (n, value))| MuWitness {
            slab: slab.to_vec(),
            value: value.to_vec(),
            components: *n,
        })
        .collect();
    MuReport {
        bijective: witnesses.is_empty(),
        nonempty_slabs: per_slab.len(),
        witnesses,
    }
}
