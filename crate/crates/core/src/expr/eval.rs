use super::{BinaryOp, DomainKind, EvalError, Expr, UnaryOp, VariableList};

fn apply_unary(op: UnaryOp, a: f64) -> Result<f64, DomainKind> {
    Ok(match op {
        UnaryOp::Neg => -a,
        UnaryOp::Sin => a.sin(),
        UnaryOp::Cos => a.cos(),
        UnaryOp::Exp => a.exp(),
        UnaryOp::Log => {
            if a <= 0.0 || a.is_nan() {
                return Err(DomainKind::LogNonPositive);
            }
            a.ln()
        }
        UnaryOp::Sqrt => {
            if a < 0.0 || a.is_nan() {
                return Err(DomainKind::SqrtNegative);
            }
            a.sqrt()
        }
    })
}

fn apply_binary(op: BinaryOp, a: f64, b: f64) -> Result<f64, DomainKind> {
    Ok(match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b == 0.0 {
                return Err(DomainKind::DivisionByZero);
            }
            a / b
        }
    })
}

fn apply_pow(a: f64, k: f64) -> Result<f64, DomainKind> {
    if a < 0.0 && k.fract() != 0.0 {
        return Err(DomainKind::InvalidPower);
    }
    if a == 0.0 && k < 0.0 {
        return Err(DomainKind::InvalidPower);
    }
    if k == 2.0 {
        return Ok(a * a);
    }
    if k.fract() == 0.0 && k.abs() <= 64.0 {
        return Ok(a.powi(k as i32));
    }
    Ok(a.powf(k))
}

impl Expr {
    /// Evaluates at a phase point in IEEE double precision.
    ///
    /// `x` must cover every variable the expression mentions. Domain
    /// violations report the offending subexpression (printed with
    /// canonical names for `x.len() / 2` degrees of freedom).
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, EvalError> {
        if self.var_bound() > x.len() {
            return Err(EvalError::Dimension {
                expected: self.var_bound(),
                got: x.len(),
            });
        }
        self.eval_inner(x).map_err(|(kind, at)| {
            let vars = VariableList::canonical(x.len().div_ceil(2).max(at.var_bound().div_ceil(2)));
            EvalError::Domain {
                kind,
                subexpr: at.display(&vars).to_string(),
            }
        })
    }

    fn eval_inner(&self, x: &[f64]) -> Result<f64, (DomainKind, &Expr)> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(i) => Ok(x[*i]),
            Expr::Unary(op, a) => {
                let v = a.eval_inner(x)?;
                apply_unary(*op, v).map_err(|k| (k, self))
            }
            Expr::Binary(op, a, b) => {
                let u = a.eval_inner(x)?;
                let v = b.eval_inner(x)?;
                apply_binary(*op, u, v).map_err(|k| (k, self))
            }
            Expr::Pow(a, k) => {
                let v = a.eval_inner(x)?;
                apply_pow(v, *k).map_err(|d| (d, self))
            }
        }
    }

    pub fn compile(&self) -> Program {
        let mut ops = Vec::with_capacity(self.node_count());
        let mut depth = 0;
        let mut max_stack = 0;
        emit(self, &mut ops, &mut depth, &mut max_stack);
        Program {
            ops,
            max_stack,
            var_bound: self.var_bound(),
            source: self.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Instr {
    Const(f64),
    Var(usize),
    Unary(UnaryOp),
    Binary(BinaryOp),
    Pow(f64),
}

fn emit(e: &Expr, ops: &mut Vec<Instr>, depth: &mut usize, max: &mut usize) {
    match e {
        Expr::Const(c) => {
            ops.push(Instr::Const(*c));
            *depth += 1;
        }
        Expr::Var(i) => {
            ops.push(Instr::Var(*i));
            *depth += 1;
        }
        Expr::Unary(op, a) => {
            emit(a, ops, depth, max);
            ops.push(Instr::Unary(*op));
        }
        Expr::Pow(a, k) => {
            emit(a, ops, depth, max);
            ops.push(Instr::Pow(*k));
        }
        Expr::Binary(op, a, b) => {
            emit(a, ops, depth, max);
            emit(b, ops, depth, max);
            ops.push(Instr::Binary(*op));
            *depth -= 1;
        }
    }
    *max = (*max).max(*depth);
}

/// Raised by [`Program::eval_with`]; carries no location so the hot path
/// stays allocation-free. Re-evaluate the source tree for a full report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DomainFault(pub DomainKind);

/// An expression flattened to postfix form for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Program {
    ops: Vec<Instr>,
    max_stack: usize,
    var_bound: usize,
    source: Expr,
}

impl Program {
    pub fn source(&self) -> &Expr {
        &self.source
    }

    pub fn stack_size(&self) -> usize {
        self.max_stack
    }

    /// Evaluates using `stack` as scratch space.
    ///
    /// Panics if `x` is shorter than the expression's variable bound.
    pub fn eval_with(&self, x: &[f64], stack: &mut Vec<f64>) -> Result<f64, DomainFault> {
        assert!(x.len() >= self.var_bound, "point too short for program");
        stack.clear();
        for op in &self.ops {
            match *op {
                Instr::Const(c) => stack.push(c),
                Instr::Var(i) => stack.push(x[i]),
                Instr::Unary(u) => {
                    let top = stack.last_mut().expect("stack underflow");
                    *top = apply_unary(u, *top).map_err(DomainFault)?;
                }
                Instr::Pow(k) => {
                    let top = stack.last_mut().expect("stack underflow");
                    *top = apply_pow(*top, k).map_err(DomainFault)?;
                }
                Instr::Binary(b) => {
                    let rhs = stack.pop().expect("stack underflow");
                    let top = stack.last_mut().expect("stack underflow");
                    *top = apply_binary(b, *top, rhs).map_err(DomainFault)?;
                }
            }
        }
        Ok(stack.pop().expect("empty program"))
    }

    /// Evaluates with a full error report on failure.
    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let mut stack = Vec::with_capacity(self.max_stack);
        match self.eval_with(x, &mut stack) {
            Ok(v) => Ok(v),
            Err(_) => self.source.evaluate(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn v1() -> VariableList {
        VariableList::canonical(1)
    }

    #[test]
    fn spec_values() {
        let e = parse("q1^2+p1^2", &v1()).unwrap();
        assert_eq!(e.evaluate(&[1.0, 2.0]).unwrap(), 5.0);
        let e = parse("(q1^2+p1^2)/2", &v1()).unwrap();
        assert!((e.evaluate(&[0.6, 0.8]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let e = parse("1 + log(q1)", &v1()).unwrap();
        let err = e.evaluate(&[-1.0, 0.0]).unwrap_err();
        assert_eq!(
            err,
            EvalError::Domain {
                kind: DomainKind::LogNonPositive,
                subexpr: "log(q1)".into()
            }
        );
        let e = parse("p1 / q1", &v1()).unwrap();
        assert!(matches!(
            e.evaluate(&[0.0, 1.0]),
            Err(EvalError::Domain { kind: DomainKind::DivisionByZero, .. })
        ));
        let e = parse("sqrt(q1)", &v1()).unwrap();
        assert!(matches!(
            e.evaluate(&[-0.5, 1.0]),
            Err(EvalError::Domain { kind: DomainKind::SqrtNegative, .. })
        ));
        let e = parse("q1^0.5", &v1()).unwrap();
        assert!(matches!(
            e.evaluate(&[-0.5, 1.0]),
            Err(EvalError::Domain { kind: DomainKind::InvalidPower, .. })
        ));
    }

    #[test]
    fn short_point_is_rejected() {
        let e = parse("p1", &v1()).unwrap();
        assert_eq!(
            e.evaluate(&[1.0]),
            Err(EvalError::Dimension { expected: 2, got: 1 })
        );
    }

    #[test]
    fn program_matches_tree() {
        let e = parse("sin(q1)*exp(-p1^2/2) - 3/(1+q1^2) + sqrt(p1^2+1)^3", &v1()).unwrap();
        let prog = e.compile();
        let mut stack = Vec::new();
        for &(q, p) in &[(0.1, 0.2), (-1.3, 2.5), (0.0, 0.0)] {
            let a = e.evaluate(&[q, p]).unwrap();
            let b = prog.eval_with(&[q, p], &mut stack).unwrap();
            assert_eq!(a, b);
        }
        let bad = parse("log(q1 - 1)", &v1()).unwrap().compile();
        assert!(bad.eval_with(&[0.5, 0.0], &mut stack).is_err());
        assert!(bad.eval(&[0.5, 0.0]).unwrap_err().to_string().contains("log(q1 - 1)"));
    }
}
