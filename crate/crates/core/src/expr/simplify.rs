//! A small, fixed rewrite system: constant folding, additive and
//! multiplicative identities, like-term collection and a canonical operand
//! order for `+` and `*`. The canonical order is what makes `f*g - g*f`
//! collapse to zero. Anything beyond this is left to numeric sampling.

use super::eval::DomainFault;
use super::{BinaryOp, Expr, UnaryOp};

impl Expr {
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Unary(op, a) => simplify_unary(*op, a.simplify()),
            Expr::Pow(a, k) => simplify_pow(a.simplify(), *k),
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                match op {
                    BinaryOp::Add | BinaryOp::Sub => {
                        let e = Expr::binary(*op, a, b);
                        simplify_sum(&e).unwrap_or(e)
                    }
                    BinaryOp::Mul => {
                        let e = Expr::mul(a, b);
                        simplify_product(&e).unwrap_or(e)
                    }
                    BinaryOp::Div => simplify_div(a, b),
                }
            }
        }
    }
}

fn fold(e: &Expr) -> Option<f64> {
    let prog = e.compile();
    let mut stack = Vec::new();
    match prog.eval_with(&[], &mut stack) {
        Ok(v) if v.is_finite() => Some(v),
        Ok(_) | Err(DomainFault(_)) => None,
    }
}

fn simplify_unary(op: UnaryOp, a: Expr) -> Expr {
    if let Expr::Const(_) = a {
        let e = Expr::unary(op, a);
        return match fold(&e) {
            Some(v) => Expr::Const(v),
            None => e,
        };
    }
    if op == UnaryOp::Neg {
        if let Expr::Unary(UnaryOp::Neg, inner) = a {
            return *inner;
        }
        if let Expr::Binary(BinaryOp::Mul, c, rest) = &a {
            if let Expr::Const(c) = **c {
                return simplify_product(&Expr::mul(Expr::Const(-c), (**rest).clone()))
                    .unwrap_or_else(|| Expr::neg(a.clone()));
            }
        }
    }
    Expr::unary(op, a)
}

fn simplify_pow(a: Expr, k: f64) -> Expr {
    if k == 1.0 {
        return a;
    }
    if k == 0.0 {
        return Expr::Const(1.0);
    }
    if let Expr::Const(_) = a {
        let e = Expr::pow(a, k);
        return match fold(&e) {
            Some(v) => Expr::Const(v),
            None => e,
        };
    }
    if let Expr::Pow(base, inner) = &a {
        // (b^s)^k = b^(s k) wherever both sides are defined, for integer k.
        if k.fract() == 0.0 {
            return simplify_pow((**base).clone(), inner * k);
        }
    }
    Expr::pow(a, k)
}

fn simplify_div(a: Expr, b: Expr) -> Expr {
    if a.is_const(0.0) && !b.is_const(0.0) {
        return Expr::Const(0.0);
    }
    match (&a, &b) {
        (_, Expr::Const(c)) if *c == 1.0 => a,
        (_, Expr::Const(c)) if *c == -1.0 => simplify_unary(UnaryOp::Neg, a),
        (Expr::Const(_), Expr::Const(_)) => {
            let e = Expr::div(a, b);
            match fold(&e) {
                Some(v) => Expr::Const(v),
                None => e,
            }
        }
        (_, Expr::Const(c)) if *c != 0.0 && (1.0 / c).is_finite() => {
            simplify_product(&Expr::mul(Expr::Const(1.0 / c), a.clone()))
                .unwrap_or_else(|| Expr::div(a, b))
        }
        _ if a == b => Expr::Const(1.0),
        _ => Expr::div(a, b),
    }
}

/// Splits a simplified term into `coefficient * core`.
fn split_coefficient(e: &Expr) -> (f64, Option<Expr>) {
    match e {
        Expr::Const(c) => (*c, None),
        Expr::Unary(UnaryOp::Neg, a) => {
            let (c, core) = split_coefficient(a);
            (-c, core)
        }
        Expr::Binary(BinaryOp::Mul, a, b) => match **a {
            Expr::Const(c) => (c, Some((**b).clone())),
            _ => (1.0, Some(e.clone())),
        },
        _ => (1.0, Some(e.clone())),
    }
}

fn collect_terms(e: &Expr, sign: f64, out: &mut Vec<(f64, Option<Expr>)>) {
    match e {
        Expr::Binary(BinaryOp::Add, a, b) => {
            collect_terms(a, sign, out);
            collect_terms(b, sign, out);
        }
        Expr::Binary(BinaryOp::Sub, a, b) => {
            collect_terms(a, sign, out);
            collect_terms(b, -sign, out);
        }
        Expr::Unary(UnaryOp::Neg, a) => collect_terms(a, -sign, out),
        _ => {
            let (c, core) = split_coefficient(e);
            out.push((sign * c, core));
        }
    }
}

fn cmp_core(a: &Option<Expr>, b: &Option<Expr>) -> std::cmp::Ordering {
    match (a, b) {
        (None, None) => std::cmp::Ordering::Equal,
        (None, Some(_)) => std::cmp::Ordering::Less,
        (Some(_), None) => std::cmp::Ordering::Greater,
        (Some(x), Some(y)) => x.structural_cmp(y),
    }
}

fn term_expr(coef: f64, core: Option<Expr>) -> Expr {
    match core {
        None => Expr::Const(coef),
        Some(core) if coef == 1.0 => core,
        Some(core) => Expr::mul(Expr::Const(coef), core),
    }
}

fn signed_term(coef: f64, core: Option<Expr>) -> Expr {
    match core {
        Some(core) if coef == -1.0 => Expr::neg(core),
        core => term_expr(coef, core),
    }
}

fn simplify_sum(e: &Expr) -> Option<Expr> {
    let mut terms = Vec::new();
    collect_terms(e, 1.0, &mut terms);
    terms.sort_by(|a, b| cmp_core(&a.1, &b.1));
    let mut merged: Vec<(f64, Option<Expr>)> = Vec::with_capacity(terms.len());
    for (c, core) in terms {
        match merged.last_mut() {
            Some((acc, last)) if *last == core => *acc += c,
            _ => merged.push((c, core)),
        }
    }
    if merged.iter().any(|(c, _)| !c.is_finite()) {
        return None;
    }
    let mut out: Option<Expr> = None;
    for (c, core) in merged.into_iter().filter(|(c, _)| *c != 0.0) {
        out = Some(match out {
            None => signed_term(c, core),
            Some(acc) if c < 0.0 => Expr::sub(acc, term_expr(-c, core)),
            Some(acc) => Expr::add(acc, term_expr(c, core)),
        });
    }
    Some(out.unwrap_or(Expr::Const(0.0)))
}

fn collect_factors(e: &Expr, coef: &mut f64, out: &mut Vec<(Expr, f64)>) {
    match e {
        Expr::Binary(BinaryOp::Mul, a, b) => {
            collect_factors(a, coef, out);
            collect_factors(b, coef, out);
        }
        Expr::Unary(UnaryOp::Neg, a) => {
            *coef = -*coef;
            collect_factors(a, coef, out);
        }
        Expr::Const(c) => *coef *= c,
        Expr::Pow(base, k) => out.push(((**base).clone(), *k)),
        other => out.push((other.clone(), 1.0)),
    }
}

fn simplify_product(e: &Expr) -> Option<Expr> {
    let mut coef = 1.0;
    let mut factors = Vec::new();
    collect_factors(e, &mut coef, &mut factors);
    if !coef.is_finite() {
        return None;
    }
    if coef == 0.0 {
        return Some(Expr::Const(0.0));
    }
    factors.sort_by(|a, b| a.0.structural_cmp(&b.0));
    let mut merged: Vec<(Expr, f64)> = Vec::with_capacity(factors.len());
    for (base, k) in factors {
        match merged.last_mut() {
            Some((last, acc)) if *last == base => *acc += k,
            _ => merged.push((base, k)),
        }
    }
    let mut core: Option<Expr> = None;
    let mut parts: Vec<Expr> = merged
        .into_iter()
        .filter(|(_, k)| *k != 0.0)
        .map(|(base, k)| simplify_pow(base, k))
        .collect();
    // Re-powering can expose constants (e.g. x^0) or reorder bases.
    parts.retain(|p| match p {
        Expr::Const(c) => {
            coef *= c;
            false
        }
        _ => true,
    });
    parts.sort_by(|a, b| a.structural_cmp(b));
    for p in parts {
        core = Some(match core {
            None => p,
            Some(acc) => Expr::mul(acc, p),
        });
    }
    Some(signed_term(coef, core))
}
