use std::collections::VecDeque;

use orbitspace::dspace::{build_orbit_space, check_factorization, mu_bijectivity_test};
use orbitspace::fiber::{
    bifurcation_scan, connected_components, orbit_vs_fiber_check, sample_fiber, CellGrid, Connectivity, GridField,
    ImageLattice, DEFAULT_ATOL,
};
use orbitspace::flow::ExploreOptions;
use orbitspace::{parse, IntegrableSystem, PhaseBox, VariableList};
use proptest::prelude::*;

fn system(dof: usize, srcs: &[&str], min: Vec<f64>, max: Vec<f64>) -> IntegrableSystem {
    let vars = VariableList::canonical(dof);
    let integrals = srcs.iter().map(|s| parse(s, &vars).unwrap()).collect();
    IntegrableSystem::new("t", dof, integrals, PhaseBox::new(min, max).unwrap()).unwrap()
}

fn double_well() -> IntegrableSystem {
    system(1, &["p1^2/2 + (q1^2-1)^2"], vec![-2.5, -3.0], vec![2.5, 3.0])
}

fn oscillator() -> IntegrableSystem {
    system(1, &["(q1^2+p1^2)/2"], vec![-2.0; 2], vec![2.0; 2])
}

fn field(sys: &IntegrableSystem, res: usize) -> GridField {
    GridField::compute(sys, CellGrid::uniform(sys.bounds().clone(), res).unwrap())
}

/// Independent 2D oracle: marks cells with closed-form f and gradient,
/// then labels 4-connected components by breadth-first flood fill.
fn flood_fill_count(
    f: impl Fn(f64, f64) -> f64,
    grad: impl Fn(f64, f64) -> (f64, f64),
    lo: [f64; 2],
    hi: [f64; 2],
    res: usize,
    c: f64,
) -> usize {
    let h = [(hi[0] - lo[0]) / res as f64, (hi[1] - lo[1]) / res as f64];
    let mut marked = vec![false; res * res];
    for i in 0..res {
        for j in 0..res {
            let (q, p) = (lo[0] + (i as f64 + 0.5) * h[0], lo[1] + (j as f64 + 0.5) * h[1]);
            let (gq, gp) = grad(q, p);
            let band = (0.75 * ((h[0] * gq).powi(2) + (h[1] * gp).powi(2)).sqrt()).max(DEFAULT_ATOL);
            marked[i * res + j] = (f(q, p) - c).abs() <= band;
        }
    }
    let mut seen = vec![false; res * res];
    let mut count = 0;
    for start in 0..res * res {
        if !marked[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(k) = queue.pop_front() {
            let (i, j) = ((k / res) as isize, (k % res) as isize);
            for (di, dj) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= res as isize || b >= res as isize {
                    continue;
                }
                let nb = a as usize * res + b as usize;
                if marked[nb] && !seen[nb] {
                    seen[nb] = true;
                    queue.push_back(nb);
                }
            }
        }
    }
    count
}

#[test]
fn double_well_counts_match_flood_fill() {
    let sys = double_well();
    let fld = field(&sys, 300);
    for c in [0.05, 0.5, 0.9, 1.1, 1.5, 3.0] {
        let fs = sample_fiber(&fld, &[c], DEFAULT_ATOL);
        let ours = connected_components(fld.grid(), &fs, Connectivity::Face).count;
        let oracle = flood_fill_count(
            |q, p| p * p / 2.0 + (q * q - 1.0).powi(2),
            |q, p| (4.0 * q * (q * q - 1.0), p),
            [-2.5, -3.0],
            [2.5, 3.0],
            300,
            c,
        );
        assert_eq!(ours, oracle, "c = {c}");
    }
}

#[test]
fn labels_partition_the_marked_cells() {
    let sys = double_well();
    let fld = field(&sys, 200);
    let fs = sample_fiber(&fld, &[0.5], DEFAULT_ATOL);
    let lab = connected_components(fld.grid(), &fs, Connectivity::Face);
    assert_eq!(lab.cells, fs.marked);
    assert_eq!(lab.labels.len(), lab.cells.len());
    // flood fill from each representative reproduces its label class
    for (l, &rep) in lab.representatives.iter().enumerate() {
        let mut seen = std::collections::BTreeSet::from([rep]);
        let mut queue = VecDeque::from([rep]);
        while let Some(c) = queue.pop_front() {
            fld.grid().for_each_face_neighbor(c, |nb, _| {
                if fs.contains(nb) && seen.insert(nb) {
                    queue.push_back(nb);
                }
            });
        }
        let class: Vec<usize> = lab.cells_of(l).collect();
        assert_eq!(class, seen.into_iter().collect::<Vec<_>>());
    }
}

#[test]
fn refinement_is_monotone() {
    let osc = oscillator();
    for c in [0.1, 0.5, 1.0, 1.9] {
        let counts: Vec<usize> = [50, 100, 200]
            .iter()
            .map(|&r| connected_components(field(&osc, r).grid(), &sample_fiber(&field(&osc, r), &[c], DEFAULT_ATOL), Connectivity::Face).count)
            .collect();
        assert!(counts.windows(2).all(|w| w[1] <= w[0]), "c = {c}: {counts:?}");
        assert_eq!(*counts.last().unwrap(), 1);
    }
    let dw = double_well();
    for res in [150, 300] {
        let f = field(&dw, res);
        let count = |c: f64| connected_components(f.grid(), &sample_fiber(&f, &[c], DEFAULT_ATOL), Connectivity::Face).count;
        assert_eq!((count(0.5), count(1.5)), (2, 1), "res {res}");
    }
}

#[test]
fn labeling_is_schedule_independent() {
    let sys = system(2, &["(q1^2+p1^2)/2", "(q2^2+p2^2)/2"], vec![-2.0; 4], vec![2.0; 4]);
    let fld = field(&sys, 16);
    let run = || {
        let fs = sample_fiber(&fld, &[0.5, 1.0], DEFAULT_ATOL);
        connected_components(fld.grid(), &fs, Connectivity::Face)
    };
    let a = run();
    let b = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
    assert_eq!(a, b);
}

#[test]
fn factorization_and_mu_consistency() {
    let cases = [
        (oscillator(), "0:2:20"),
        (system(1, &["p1"], vec![-2.0; 2], vec![2.0; 2]), "-2:2:16"),
        (double_well(), "0:2:20"),
    ];
    for (sys, lat) in cases {
        let lattice: ImageLattice = lat.parse().unwrap();
        let fld = field(&sys, 151);
        let os = build_orbit_space(&fld, &lattice, DEFAULT_ATOL, Connectivity::Face).unwrap();
        assert_eq!(check_factorization(&os, &fld), Ok(()));
        let rows = bifurcation_scan(&fld, &lattice, DEFAULT_ATOL, Connectivity::Face);
        if rows.iter().all(|r| r.count <= 1) {
            assert!(mu_bijectivity_test(&os).bijective, "{lat}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn orbits_stay_in_their_fiber_component(q in -1.8f64..1.8, p in -1.8f64..1.8) {
        let sys = double_well();
        let fld = field(&sys, 200);
        let opts = ExploreOptions::for_grid(sys.bounds(), fld.grid().res());
        let r = orbit_vs_fiber_check(&sys, &fld, &[q, p], 400, DEFAULT_ATOL, Connectivity::Face, &opts).unwrap();
        prop_assert!(r.containment, "{:?}", r);
    }
}
