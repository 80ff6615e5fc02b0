use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{Expr, Program};
use crate::hamsys::IntegrableSystem;
use crate::phase::seeded_rng;

/// `J = [[0, I], [-I, 0]]` in `(q, p)` order.
pub fn structure_matrix(dof: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * dof, 2 * dof);
    for i in 0..dof {
        j[(i, dof + i)] = 1.0;
        j[(dof + i, i)] = -1.0;
    }
    j
}

/// `max |(D^T J D - J)_{kl}|`.
pub fn symplectic_defect(d: &DMatrix<f64>) -> f64 {
    let j = structure_matrix(d.nrows() / 2);
    (d.transpose() * &j * d - j).amax()
}

/// `phi . psi`, component-wise.
pub fn compose_maps(phi: &[Expr], psi: &[Expr]) -> Vec<Expr> {
    phi.iter().map(|e| e.substitute(psi)).collect()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymplecticError {
    #[error("map has {got} components, expected {expected}")]
    Components { expected: usize, got: usize },
    #[error("systems have {0} and {1} degrees of freedom")]
    Dof(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// `Dphi^T J Dphi = J`.
    Symplectic,
    /// `f_i = f'_i . phi`.
    Pullback,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymplecticFailure {
    pub point: Vec<f64>,
    pub condition: Condition,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymplecticReport {
    pub pass: bool,
    pub samples: usize,
    pub max_symplectic_defect: f64,
    pub max_pullback_defect: f64,
    /// First sample violating a condition.
    pub failure: Option<SymplecticFailure>,
    /// Samples where `phi`, `Dphi` or an integral could not be evaluated.
    pub domain_errors: Vec<Vec<f64>>,
    /// Samples mapped outside the target system's box.
    pub outside_target: usize,
}

/// Samples `count` points of `f_sys`'s box and checks that `phi` is
/// symplectic there and pulls `g_sys`'s integrals back to `f_sys`'s.
pub fn symplectic_equivalence_check(
    f_sys: &IntegrableSystem,
    g_sys: &IntegrableSystem,
    phi: &[Expr],
    count: usize,
    tol: f64,
    seed: u64,
) -> Result<SymplecticReport, SymplecticError> {
    if f_sys.dof() != g_sys.dof() {
        return Err(SymplecticError::Dof(f_sys.dof(), g_sys.dof()));
    }
    let d = f_sys.dim();
    if phi.len() != d || phi.iter().any(|e| e.var_bound() > d) {
        return Err(SymplecticError::Components {
            expected: d,
            got: phi.len(),
        });
    }
    assert!(count >= 1, "count must be at least 1");
    let maps: Vec<Program> = phi.iter().map(Expr::compile).collect();
    let jac: Vec<Vec<Program>> = phi
        .iter()
        .map(|e| (0..d).map(|v| e.differentiate(v).compile()).collect())
        .collect();
    let mut rng = seeded_rng(seed, 0x7379_6d70);
    let mut report = SymplecticReport {
        pass: true,
        samples: 0,
        max_symplectic_defect: 0.0,
        max_pullback_defect: 0.0,
        failure: None,
        domain_errors: Vec::new(),
        outside_target: 0,
    };
    let mut stack = Vec::new();
    for _ in 0..count {
        let x = f_sys.bounds().sample(&mut rng);
        let evaluated = (|| {
            let y: Vec<f64> = maps.iter().map(|m| m.eval_with(&x, &mut stack)).collect::<Result<_, _>>().ok()?;
            let mut dm = DMatrix::zeros(d, d);
            for (r, row) in jac.iter().enumerate() {
                for (c, prog) in row.iter().enumerate() {
                    dm[(r, c)] = prog.eval_with(&x, &mut stack).ok()?;
                }
            }
            let fx = f_sys.values(&x).ok()?;
            let gy = g_sys.values(&y).ok()?;
            Some((y, dm, fx, gy))
        })();
        let Some((y, dm, fx, gy)) = evaluated else {
            report.domain_errors.push(x);
            continue;
        };
        report.samples += 1;
        if !g_sys.bounds().contains(&y) {
            report.outside_target += 1;
        }
        let sd = symplectic_defect(&dm);
        let pd = fx.iter().zip(&gy).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        report.max_symplectic_defect = report.max_symplectic_defect.max(sd);
        report.max_pullback_defect = report.max_pullback_defect.max(pd);
        if report.failure.is_none() {
            if !(sd <= tol) {
                report.failure = Some(SymplecticFailure {
                    point: x,
                    condition: Condition::Symplectic,
                    defect: sd,
                });
            } else if !(pd <= tol) {
                report.failure = Some(SymplecticFailure {
                    point: x,
                    condition: Condition::Pullback,
                    defect: pd,
                });
            }
        }
    }
    report.pass = report.failure.is_none() && report.domain_errors.is_empty();
    Ok(report)
}
