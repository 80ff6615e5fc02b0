//! Random expression trees for property tests and fuzz seeding.
//!
//! Generated trees are total on all of `R^k`: logarithms, square roots and
//! divisions only ever see strictly positive arguments of the form
//! `c + g^2`.

use rand::Rng;

use super::{BinaryOp, Expr, UnaryOp};

/// Draws an expression of depth at most `depth` over variables `vars`.
pub fn random_expr<R: Rng + ?Sized>(rng: &mut R, depth: usize, vars: &[usize]) -> Expr {
    if depth == 0 || rng.gen_bool(0.25) {
        return leaf(rng, vars);
    }
    let sub = |rng: &mut R| random_expr(rng, depth - 1, vars);
    match rng.gen_range(0..11) {
        0 => Expr::add(sub(rng), sub(rng)),
        1 => Expr::sub(sub(rng), sub(rng)),
        2 | 3 => Expr::mul(sub(rng), sub(rng)),
        4 => Expr::neg(sub(rng)),
        5 => Expr::unary(UnaryOp::Sin, sub(rng)),
        6 => Expr::unary(UnaryOp::Cos, sub(rng)),
        7 => {
            let k = [2.0, 3.0, -1.0][rng.gen_range(0..3)];
            if k < 0.0 {
                Expr::pow(positive(rng, depth - 1, vars), k)
            } else {
                Expr::pow(sub(rng), k)
            }
        }
        8 => Expr::div(sub(rng), positive(rng, depth - 1, vars)),
        9 => Expr::unary(UnaryOp::Log, positive(rng, depth - 1, vars)),
        _ => {
            // exp of a bounded argument keeps magnitudes tame
            Expr::unary(UnaryOp::Exp, Expr::unary(UnaryOp::Sin, sub(rng)))
        }
    }
}

fn leaf<R: Rng + ?Sized>(rng: &mut R, vars: &[usize]) -> Expr {
    if vars.is_empty() || rng.gen_bool(0.3) {
        let c: f64 = rng.gen_range(-3.0..3.0);
        Expr::Const((c * 4.0).round() / 4.0)
    } else {
        Expr::Var(vars[rng.gen_range(0..vars.len())])
    }
}

fn positive<R: Rng + ?Sized>(rng: &mut R, depth: usize, vars: &[usize]) -> Expr {
    let c = rng.gen_range(1..4) as f64 * 0.5;
    let g = random_expr(rng, depth, vars);
    let inner = Expr::binary(BinaryOp::Add, Expr::Const(c), Expr::pow(g, 2.0));
    if rng.gen_bool(0.3) {
        Expr::unary(UnaryOp::Sqrt, inner)
    } else {
        inner
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::seeded_rng;

    #[test]
    fn generated_trees_evaluate() {
        let mut rng = seeded_rng(7, 0);
        for _ in 0..500 {
            let e = random_expr(&mut rng, 4, &[0, 1, 2]);
            assert!(e.var_bound() <= 3);
            let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let v = e.evaluate(&x).expect("random trees are total");
            assert!(!v.is_nan());
        }
    }
}
