use std::collections::BTreeSet;

use serde::Serialize;

use super::{connected_components, sample_fiber, Connectivity, GridField};
use crate::flow::{orbit_explore, ExploreOptions, FlowError, OrbitSample};
use crate::hamsys::IntegrableSystem;

/// Agreement between a flow-generated orbit cloud and the grid component
/// of the fiber through its seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitFiberReport {
    pub value: Vec<f64>,
    /// Component of the seed's own cell, if that cell is marked.
    pub seed_label: Option<usize>,
    /// Distinct component labels met by in-box cloud points.
    pub labels_hit: Vec<usize>,
    /// All marked cloud cells carry one label, and it is the seed's.
    pub containment: bool,
    /// Fraction of the component's cells within half a cell of the cloud.
    pub coverage: f64,
    pub component_cells: usize,
    pub hit_cells: usize,
    pub cloud_points: usize,
    pub escaped_points: usize,
    /// In-box cloud cells outside the marking band.
    pub unmarked_cells: usize,
    pub budget_used: usize,
    pub closed: bool,
    pub max_integral_deviation: f64,
}

/// Explores the orbit through `x0` and maps it onto the fiber sample of
/// `F(x0)` on `field`'s grid.
pub fn orbit_vs_fiber_check(
    sys: &IntegrableSystem,
    field: &GridField,
    x0: &[f64],
    budget: usize,
    atol: f64,
    connectivity: Connectivity,
    opts: &ExploreOptions,
) -> Result<OrbitFiberReport, FlowError> {
    let orbit = orbit_explore(sys, x0, budget, opts)?;
    compare_orbit_with_fiber(sys, field, &orbit, atol, connectivity)
}

/// The comparison half of [`orbit_vs_fiber_check`] for an already
/// explored orbit.
pub fn compare_orbit_with_fiber(
    sys: &IntegrableSystem,
    field: &GridField,
    orbit: &OrbitSample,
    atol: f64,
    connectivity: Connectivity,
) -> Result<OrbitFiberReport, FlowError> {
    let grid = field.grid();
    let x0 = orbit.seed.as_slice();
    let value = sys.values(x0).map_err(FlowError::Domain)?;
    let fs = sample_fiber(field, &value, atol);
    let labeling = connected_components(grid, &fs, connectivity);

    let mut cloud_cells = BTreeSet::new();
    for x in orbit.interior_points() {
        if let Some(cell) = grid.cell_of(x) {
            cloud_cells.insert(cell);
        }
    }
    let mut labels_hit = BTreeSet::new();
    let mut unmarked_cells = 0;
    for &cell in &cloud_cells {
        match labeling.label_of(cell) {
            Some(l) => {
                labels_hit.insert(l);
            }
            None => unmarked_cells += 1,
        }
    }
    let labels_hit: Vec<usize> = labels_hit.into_iter().collect();
    let seed_label = grid.cell_of(x0).and_then(|c| labeling.label_of(c));
    let containment = match (seed_label, labels_hit.as_slice()) {
        (_, []) => true,
        (Some(s), [l]) => s == *l,
        (None, [_]) => true,
        _ => false,
    };
    let target = seed_label.or(labels_hit.first().copied());

    let (mut hit_cells, mut component_cells) = (0, 0);
    if let Some(target) = target {
        component_cells = labeling.sizes()[target];
        let h = grid.cell_size();
        let near = |x: &[f64], cell: usize| {
            let c = grid.center(cell);
            x.iter().zip(&c).zip(h).all(|((a, b), hk)| (a - b).abs() <= *hk)
        };
        let mut hit = BTreeSet::new();
        for x in orbit.interior_points() {
            let Some(cell) = grid.cell_of(x) else { continue };
            let mut visit = |nb: usize| {
                if labeling.label_of(nb) == Some(target) && near(x, nb) {
                    hit.insert(nb);
                }
            };
            visit(cell);
            grid.for_each_corner_neighbor(cell, &mut visit);
        }
        hit_cells = hit.len();
    }
    let coverage = if component_cells == 0 {
        0.0
    } else {
        hit_cells as f64 / component_cells as f64
    };

    Ok(OrbitFiberReport {
        value,
        seed_label,
        labels_hit,
        containment,
        coverage,
        component_cells,
        hit_cells,
        cloud_points: orbit.points.len(),
        escaped_points: orbit.escaped.iter().filter(|e| **e).count(),
        unmarked_cells,
        budget_used: orbit.budget_used,
        closed: orbit.closed,
        max_integral_deviation: orbit.max_integral_deviation(sys).map_err(FlowError::Domain)?,
    })
}
