//! Integrable systems on `R^2n` with the canonical symplectic form
//! `sum dq_i ^ dp_i`.
//!
//! Sign conventions: `X_f = (df/dp, -df/dq)` and
//! `{f, g} = sum_i (df/dq_i dg/dp_i - df/dp_i dg/dq_i)`, so that the Lie
//! derivative of `f` along `X_g` is `{f, g}`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{
    is_identically_zero, BoxSampler, DomainFault, EvalError, Expr, Program, VariableList,
    ZeroVerdict,
};
use crate::expr::zero::Inconclusive;
use crate::phase::{seeded_rng, PhaseBox};

/// Default relative singular-value cutoff for numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;
/// Default full-rank fraction required by the density check.
pub const DEFAULT_FULL_RANK_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("expected {expected} integrals for {expected} degrees of freedom, got {got}")]
    IntegralCount { expected: usize, got: usize },
    #[error("integral {index} refers to a variable outside the {vars} declared ones")]
    UnknownVariable { index: usize, vars: usize },
    #[error("box has dimension {got}, expected {expected}")]
    BoxDimension { expected: usize, got: usize },
}

/// Poisson bracket `{f, g}` in canonical coordinates, simplified.
pub fn poisson_bracket(f: &Expr, g: &Expr, dof: usize) -> Expr {
    let mut acc = Expr::Const(0.0);
    for i in 0..dof {
        let (q, p) = (i, dof + i);
        let term = Expr::sub(
            Expr::mul(f.differentiate(q), g.differentiate(p)),
            Expr::mul(f.differentiate(p), g.differentiate(q)),
        );
        acc = Expr::add(acc, term);
    }
    acc.simplify()
}

/// Symbolic vector field with components ordered `(qdot_1..qdot_n, pdot_1..pdot_n)`.
#[derive(Debug, Clone)]
pub struct VectorFieldExpr {
    components: Vec<Expr>,
    programs: Vec<Program>,
}

impl VectorFieldExpr {
    pub fn new(components: Vec<Expr>) -> Self {
        let programs = components.iter().map(Expr::compile).collect();
        VectorFieldExpr { components, programs }
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// Writes the field at `x` into `out`.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64], stack: &mut Vec<f64>) -> Result<(), DomainFault> {
        for (o, prog) in out.iter_mut().zip(&self.programs) {
            *o = prog.eval_with(x, stack)?;
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.programs.iter().map(|p| p.eval(x)).collect()
    }
}

/// `X_f`, with `qdot_i = df/dp_i` and `pdot_i = -df/dq_i`.
pub fn hamiltonian_vector_field(f: &Expr, dof: usize) -> VectorFieldExpr {
    let qdot = (0..dof).map(|i| f.differentiate(dof + i));
    let pdot = (0..dof).map(|i| Expr::neg(f.differentiate(i)).simplify());
    VectorFieldExpr::new(qdot.chain(pdot).collect())
}

/// The triple `(R^2n, canonical form, F)` restricted to an analysis box.
#[derive(Debug, Clone)]
pub struct IntegrableSystem {
    name: String,
    vars: VariableList,
    integrals: Vec<Expr>,
    bounds: PhaseBox,
    programs: Vec<Program>,
    gradients: Vec<Vec<Program>>,
    fields: Vec<VectorFieldExpr>,
}

impl IntegrableSystem {
    pub fn new(
        name: impl Into<String>,
        dof: usize,
        integrals: Vec<Expr>,
        bounds: PhaseBox,
    ) -> Result<Self, SystemError> {
        if integrals.len() != dof {
            return Err(SystemError::IntegralCount {
                expected: dof,
                got: integrals.len(),
            });
        }
        if let Some(index) = integrals.iter().position(|f| f.var_bound() > 2 * dof) {
            return Err(SystemError::UnknownVariable { index, vars: 2 * dof });
        }
        if bounds.dim() != 2 * dof {
            return Err(SystemError::BoxDimension {
                expected: 2 * dof,
                got: bounds.dim(),
            });
        }
        let programs = integrals.iter().map(Expr::compile).collect();
        let gradients = integrals
            .iter()
            .map(|f| (0..2 * dof).map(|v| f.differentiate(v).compile()).collect())
            .collect();
        let fields = integrals
            .iter()
            .map(|f| hamiltonian_vector_field(f, dof))
            .collect();
        Ok(IntegrableSystem {
            name: name.into(),
            vars: VariableList::canonical(dof),
            integrals,
            bounds,
            programs,
            gradients,
            fields,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dof(&self) -> usize {
        self.vars.dof()
    }

    pub fn dim(&self) -> usize {
        2 * self.dof()
    }

    pub fn vars(&self) -> &VariableList {
        &self.vars
    }

    pub fn integrals(&self) -> &[Expr] {
        &self.integrals
    }

    pub fn bounds(&self) -> &PhaseBox {
        &self.bounds
    }

    pub fn field(&self, i: usize) -> &VectorFieldExpr {
        &self.fields[i]
    }

    /// `F(x)` into `out`.
    pub fn values_into(&self, x: &[f64], out: &mut [f64], stack: &mut Vec<f64>) -> Result<(), DomainFault> {
        for (o, prog) in out.iter_mut().zip(&self.programs) {
            *o = prog.eval_with(x, stack)?;
        }
        Ok(())
    }

    pub fn values(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.programs.iter().map(|p| p.eval(x)).collect()
    }

    /// Euclidean norm of the gradient of each integral, scaled per axis by
    /// `scale` (pass cell sizes to get the first-order change across a cell).
    pub fn scaled_gradient_norms(
        &self,
        x: &[f64],
        scale: &[f64],
        out: &mut [f64],
        stack: &mut Vec<f64>,
    ) -> Result<(), DomainFault> {
        for (o, row) in out.iter_mut().zip(&self.gradients) {
            let mut sum = 0.0;
            for (prog, h) in row.iter().zip(scale) {
                let d = prog.eval_with(x, stack)? * h;
                sum += d * d;
            }
            *o = sum.sqrt();
        }
        Ok(())
    }

    /// `DF(x)` row-major (`n` rows of length `2n`) into `out`.
    pub fn jacobian_into(&self, x: &[f64], out: &mut [f64], stack: &mut Vec<f64>) -> Result<(), DomainFault> {
        for (o, prog) in out.iter_mut().zip(self.gradients.iter().flatten()) {
            *o = prog.eval_with(x, stack)?;
        }
        Ok(())
    }

    /// The n x 2n matrix `DF(x)`.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let n = self.dof();
        let mut m = DMatrix::zeros(n, 2 * n);
        for (i, row) in self.gradients.iter().enumerate() {
            for (j, prog) in row.iter().enumerate() {
                m[(i, j)] = prog.eval(x)?;
            }
        }
        Ok(m)
    }

    /// Singular values of `DF(x)` in decreasing order.
    pub fn singular_values(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let m = self.jacobian(x)?;
        let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        Ok(s)
    }
}

/// Numerical rank from singular values: those at least `tol` times the largest.
pub fn rank_from_singular_values(sigma: &[f64], tol: f64) -> usize {
    let largest = sigma.iter().copied().fold(0.0, f64::max);
    if largest == 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s >= tol * largest).count()
}

pub fn jacobian_rank(sys: &IntegrableSystem, x: &[f64], tol: f64) -> Result<usize, EvalError> {
    assert!(tol > 0.0, "tol must be positive");
    Ok(rank_from_singular_values(&sys.singular_values(x)?, tol))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvolutionReport {
    /// `verdicts[i][j]` for the bracket `{f_i, f_j}`; symmetric.
    pub verdicts: Vec<Vec<ZeroVerdict>>,
    pub pass: bool,
    /// At least one accepted pair rests on sampling alone.
    pub numeric_only: bool,
}

impl InvolutionReport {
    pub fn failures(&self) -> impl Iterator<Item = (usize, usize, &ZeroVerdict)> {
        self.verdicts.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(move |(j, v)| i < *j && !v.is_zero())
                .map(move |(j, v)| (i, j, v))
        })
    }
}

pub fn check_involution(
    sys: &IntegrableSystem,
    count: usize,
    tol: f64,
    seed: u64,
) -> Result<InvolutionReport, Inconclusive> {
    let n = sys.dof();
    let mut verdicts = vec![vec![ZeroVerdict::SymbolicZero; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let bracket = poisson_bracket(&sys.integrals[i], &sys.integrals[j], n);
            let mut sampler = BoxSampler::new(sys.bounds.clone(), seed, (i * n + j) as u64);
            let v = is_identically_zero(&bracket, &mut sampler, count, tol)?;
            verdicts[j][i] = v.clone();
            verdicts[i][j] = v;
        }
    }
    let pass = verdicts.iter().flatten().all(ZeroVerdict::is_zero);
    let numeric_only = verdicts
        .iter()
        .flatten()
        .any(|v| matches!(v, ZeroVerdict::NumericZero { .. }));
    Ok(InvolutionReport {
        verdicts,
        pass,
        numeric_only,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    pub samples: usize,
    /// Points skipped because `DF` could not be evaluated there.
    pub skipped: usize,
    /// `histogram[r]` counts samples of rank `r`, for `r` in `0..=n`.
    pub histogram: Vec<usize>,
    pub full_rank_fraction: f64,
    pub low_rank_witnesses: Vec<Vec<f64>>,
}

impl RankReport {
    pub fn dense_full_rank(&self, threshold: f64) -> bool {
        self.full_rank_fraction >= threshold
    }
}

const MAX_WITNESSES: usize = 16;

/// Statistical surrogate for "rank `DF = n` on a dense open set".
pub fn rank_scan(sys: &IntegrableSystem, samples: usize, tol: f64, seed: u64) -> RankReport {
    assert!(samples >= 1, "samples must be at least 1");
    let mut rng = seeded_rng(seed, 0x7261_6e6b);
    let points: Vec<Vec<f64>> = (0..samples).map(|_| sys.bounds.sample(&mut rng)).collect();
    let ranks: Vec<Option<usize>> = points
        .par_iter()
        .map(|x| jacobian_rank(sys, x, tol).ok())
        .collect();
    let n = sys.dof();
    let mut histogram = vec![0; n + 1];
    let mut witnesses = Vec::new();
    let mut skipped = 0;
    for (x, r) in points.into_iter().zip(ranks) {
        match r {
            Some(r) => {
                histogram[r] += 1;
                if r < n && witnesses.len() < MAX_WITNESSES {
                    witnesses.push(x);
                }
            }
            None => skipped += 1,
        }
    }
    let evaluated = samples - skipped;
    let full_rank_fraction = if evaluated == 0 {
        0.0
    } else {
        histogram[n] as f64 / evaluated as f64
    };
    RankReport {
        samples: evaluated,
        skipped,
        histogram,
        full_rank_fraction,
        low_rank_witnesses: witnesses,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum CommutantVerdict {
    Member { numeric_only: bool },
    NonMember { index: usize, witness: Vec<f64>, value: f64 },
}

impl CommutantVerdict {
    pub fn is_member(&self) -> bool {
        matches!(self, CommutantVerdict::Member { .. })
    }
}

/// Membership of `g` in the commutant: `{g, f_i} = 0` for every `i`.
pub fn commutant_test(
    sys: &IntegrableSystem,
    g: &Expr,
    count: usize,
    tol: f64,
    seed: u64,
) -> Result<CommutantVerdict, Inconclusive> {
    let n = sys.dof();
    let mut numeric_only = false;
    for (i, f) in sys.integrals.iter().enumerate() {
        let bracket = poisson_bracket(g, f, n);
        let mut sampler = BoxSampler::new(sys.bounds.clone(), seed, 0x636f_0000 + i as u64);
        match is_identically_zero(&bracket, &mut sampler, count, tol)? {
            ZeroVerdict::SymbolicZero => {}
            ZeroVerdict::NumericZero { .. } => numeric_only = true,
            ZeroVerdict::Nonzero { witness, value } => {
                return Ok(CommutantVerdict::NonMember {
                    index: i,
                    witness,
                    value,
                })
            }
        }
    }
    Ok(CommutantVerdict::Member { numeric_only })
}
