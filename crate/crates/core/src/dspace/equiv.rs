use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::expr::zero::Inconclusive;
use crate::expr::Expr;
use crate::fiber::{connected_components, sample_fiber, Connectivity, GridField, DEFAULT_ATOL};
use crate::hamsys::{commutant_test, rank_from_singular_values, CommutantVerdict, IntegrableSystem, DEFAULT_RANK_TOL};
use crate::phase::seeded_rng;

/// A function ring presented by generators: the integrals plus declared
/// commutant members. Its elements are the composites `G(g_1, .., g_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionRingPresentation {
    generators: Vec<Expr>,
    integrals: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RingError {
    #[error("declared generator {index} does not commute with integral {verdict:?}")]
    NotInCommutant { index: usize, verdict: CommutantVerdict },
    #[error(transparent)]
    Inconclusive(#[from] Inconclusive),
}

impl FunctionRingPresentation {
    /// Checks every declared generator with [`commutant_test`].
    pub fn new(
        sys: &IntegrableSystem,
        declared: Vec<Expr>,
        count: usize,
        tol: f64,
        seed: u64,
    ) -> Result<Self, RingError> {
        for (index, g) in declared.iter().enumerate() {
            let verdict = commutant_test(sys, g, count, tol, seed)?;
            if !verdict.is_member() {
                return Err(RingError::NotInCommutant { index, verdict });
            }
        }
        let mut generators = sys.integrals().to_vec();
        generators.extend(declared);
        Ok(FunctionRingPresentation {
            generators,
            integrals: sys.dof(),
        })
    }

    pub fn generators(&self) -> &[Expr] {
        &self.generators
    }

    pub fn declared(&self) -> &[Expr] {
        &self.generators[self.integrals..]
    }

    /// The ring element `outer(g_1, .., g_k)`, where variable `j` of
    /// `outer` stands for generator `j`.
    pub fn compose(&self, outer: &Expr) -> Expr {
        assert!(outer.var_bound() <= self.generators.len(), "outer uses unknown generators");
        outer.substitute(&self.generators)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Equivalent at the sampling and grid resolution used; not a proof.
    Equivalent,
    NotEquivalent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EquivalenceEvidence {
    /// `{tested, against} != 0` at `witness`; `tested` is integral
    /// `tested_index` of system `from`.
    Bracket {
        from: char,
        tested_index: usize,
        against_index: usize,
        witness: Vec<f64>,
        value: f64,
    },
    /// The row spaces of `DF` and `DG` differ at `cell`: the orbits through
    /// it have different tangent spaces.
    Span { cell: usize, center: Vec<f64>, defect: f64 },
    /// `cell` belongs to the component through `seed_cell` for one system
    /// (`in_f` or `in_g`) but not for the other.
    Partition {
        seed_cell: usize,
        cell: usize,
        center: Vec<f64>,
        in_f: bool,
        in_g: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceVerdict {
    pub verdict: Verdict,
    /// Some bracket was accepted on samples alone.
    pub numeric_only: bool,
    pub sampled_cells: usize,
    pub full_rank_cells: usize,
    /// Seeds whose fiber components lie inside the box and were compared.
    pub compared_cells: usize,
    pub evidence: Vec<EquivalenceEvidence>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceOptions {
    pub count: usize,
    pub tol: f64,
    pub seed: u64,
    /// Phase cells sampled for the partition stage.
    pub cells: usize,
    pub atol: f64,
    pub rank_tol: f64,
    pub connectivity: Connectivity,
    /// Below this fraction of full-rank sampled cells the verdict is inconclusive.
    pub min_full_rank_fraction: f64,
    /// Largest accepted `sigma_{n+1} / sigma_1` of `[DF; DG]`.
    pub span_tol: f64,
}

impl Default for EquivalenceOptions {
    fn default() -> Self {
        EquivalenceOptions {
            count: 100,
            tol: 1e-9,
            seed: 0,
            cells: 16,
            atol: DEFAULT_ATOL,
            rank_tol: DEFAULT_RANK_TOL,
            connectivity: Connectivity::Face,
            min_full_rank_fraction: 0.5,
            span_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquivError {
    #[error("systems have {0} and {1} degrees of freedom")]
    Dof(usize, usize),
    #[error("systems use different boxes")]
    Box,
    #[error("grid fields do not match the systems or each other")]
    Grid,
}

fn full_rank(field: &GridField, cell: usize, tol: f64) -> bool {
    if !field.is_valid(cell) {
        return false;
    }
    let n = field.dof();
    let m = DMatrix::from_row_slice(n, field.grid().dim(), field.jacobian(cell));
    let sigma: Vec<f64> = m.singular_values().iter().copied().collect();
    rank_from_singular_values(&sigma, tol) == n
}

/// Cross-commutation then orbit-partition agreement.
///
/// Stage one tests every integral of each system for membership in the
/// other's commutant. Stage two samples phase cells where both systems
/// have full rank and compares the fiber components through them, see
/// [`partition_stage`]. Cells are drawn from a stream that depends only on
/// the seed, so swapping the systems gives the same verdict.
pub fn systems_equivalent(
    f_sys: &IntegrableSystem,
    g_sys: &IntegrableSystem,
    f_field: &GridField,
    g_field: &GridField,
    opts: &EquivalenceOptions,
) -> Result<EquivalenceVerdict, EquivError> {
    if f_sys.dof() != g_sys.dof() {
        return Err(EquivError::Dof(f_sys.dof(), g_sys.dof()));
    }
    if f_sys.bounds() != g_sys.bounds() {
        return Err(EquivError::Box);
    }
    if f_field.grid() != g_field.grid() || f_field.grid().bounds() != f_sys.bounds() {
        return Err(EquivError::Grid);
    }
    let mut out = EquivalenceVerdict {
        verdict: Verdict::Equivalent,
        numeric_only: false,
        sampled_cells: 0,
        full_rank_cells: 0,
        compared_cells: 0,
        evidence: Vec::new(),
        reason: None,
    };

    for (from, tested, against) in [('G', g_sys, f_sys), ('F', f_sys, g_sys)] {
        for (k, g) in tested.integrals().iter().enumerate() {
            match commutant_test(against, g, opts.count, opts.tol, opts.seed) {
                Ok(CommutantVerdict::Member { numeric_only }) => out.numeric_only |= numeric_only,
                Ok(CommutantVerdict::NonMember { index, witness, value }) => {
                    out.verdict = Verdict::NotEquivalent;
                    out.evidence.push(EquivalenceEvidence::Bracket {
                        from,
                        tested_index: k,
                        against_index: index,
                        witness,
                        value,
                    });
                    return Ok(out);
                }
                Err(e) => {
                    out.verdict = Verdict::Inconclusive;
                    out.reason = Some(e.to_string());
                    return Ok(out);
                }
            }
        }
    }

    let grid = f_field.grid();
    let mut rng = seeded_rng(opts.seed, 0x6571_7569);
    let sampled: Vec<usize> = (0..opts.cells).map(|_| rng.gen_range(0..grid.cell_count())).collect();
    out.sampled_cells = sampled.len();
    let seeds: Vec<usize> = sampled
        .into_iter()
        .filter(|&c| full_rank(f_field, c, opts.rank_tol) && full_rank(g_field, c, opts.rank_tol))
        .collect();
    out.full_rank_cells = seeds.len();
    if seeds.is_empty() || (seeds.len() as f64) < opts.min_full_rank_fraction * out.sampled_cells as f64 {
        out.verdict = Verdict::Inconclusive;
        out.reason = Some(format!(
            "only {} of {} sampled cells have full rank for both systems",
            seeds.len(),
            out.sampled_cells
        ));
        return Ok(out);
    }
    match partition_stage(f_field, g_field, &seeds, opts) {
        Ok(compared) => out.compared_cells = compared,
        Err(e) => {
            out.verdict = Verdict::NotEquivalent;
            out.evidence.push(e);
        }
    }
    Ok(out)
}

/// Ratio `sigma_{n+1} / sigma_1` of the stacked `2n x 2n` matrix
/// `[DF; DG]`; zero when both row spaces coincide.
fn span_defect(f_field: &GridField, g_field: &GridField, cell: usize) -> f64 {
    let (n, d) = (f_field.dof(), f_field.grid().dim());
    let mut rows = f_field.jacobian(cell).to_vec();
    rows.extend_from_slice(g_field.jacobian(cell));
    let mut sigma: Vec<f64> = DMatrix::from_row_slice(2 * n, d, &rows)
        .singular_values()
        .iter()
        .copied()
        .collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    if sigma[0] == 0.0 {
        0.0
    } else {
        sigma[n] / sigma[0]
    }
}

/// Compares the orbit partitions of both systems near each seed cell and
/// returns how many seeds took part in the component comparison.
///
/// Locally, the orbits of `X_F` and `X_G` agree exactly when `DF` and `DG`
/// have the same row space, which is checked at every seed. Globally, on
/// the cells marked by both fiber samples through the seed, membership in
/// the seed's `F`-component must match membership in its `G`-component.
/// The global check is skipped when either component reaches the box
/// boundary: the box can cut a fiber into pieces that bands of different
/// widths reconnect differently.
pub(crate) fn partition_stage(
    f_field: &GridField,
    g_field: &GridField,
    seeds: &[usize],
    opts: &EquivalenceOptions,
) -> Result<usize, EquivalenceEvidence> {
    let grid = f_field.grid();
    let mut compared = 0;
    for &seed_cell in seeds {
        let defect = span_defect(f_field, g_field, seed_cell);
        if !(defect <= opts.span_tol) {
            return Err(EquivalenceEvidence::Span {
                cell: seed_cell,
                center: grid.center(seed_cell),
                defect,
            });
        }
        let fs = sample_fiber(f_field, f_field.value(seed_cell), opts.atol);
        let gs = sample_fiber(g_field, g_field.value(seed_cell), opts.atol);
        let fl = connected_components(grid, &fs, opts.connectivity);
        let gl = connected_components(grid, &gs, opts.connectivity);
        let (Some(fc), Some(gc)) = (fl.label_of(seed_cell), gl.label_of(seed_cell)) else {
            continue;
        };
        let clipped = fl.cells_of(fc).chain(gl.cells_of(gc)).any(|c| grid.on_boundary(c));
        if clipped {
            continue;
        }
        compared += 1;
        for &cell in fs.marked.iter().filter(|c| gs.contains(**c)) {
            let in_f = fl.label_of(cell) == Some(fc);
            let in_g = gl.label_of(cell) == Some(gc);
            if in_f != in_g
                && full_rank(f_field, cell, opts.rank_tol)
                && full_rank(g_field, cell, opts.rank_tol)
            {
                return Err(EquivalenceEvidence::Partition {
                    seed_cell,
                    cell,
                    center: grid.center(cell),
                    in_f,
                    in_g,
                });
            }
        }
    }
    Ok(compared)
}
