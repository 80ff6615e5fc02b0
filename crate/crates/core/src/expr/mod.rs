//! Scalar expressions over the phase variables `q1..qn, p1..pn`.
//!
//! Expressions are immutable trees. They are produced by [`parse`], by
//! [`Expr::differentiate`] and by [`Expr::simplify`], and evaluated either
//! directly ([`Expr::evaluate`]) or through a compiled [`Program`] on hot
//! paths.
//!
//! # Grammar
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?          right associative
//! primary := number | 'pi' | variable | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | exp | log | sqrt
//! ```
//!
//! Precedence is `^` > unary minus > `* /` > `+ -`, so `-q1^2` is
//! `-(q1^2)`. Whitespace is insignificant. The exponent of `^` must not
//! depend on any variable; it is folded to a number at parse time.

mod diff;
mod eval;
mod parse;
pub mod random;
mod simplify;
pub mod zero;

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

pub use eval::{DomainFault, Program};
pub use parse::{parse, MAX_DEPTH};
pub use zero::{is_identically_zero, BoxSampler, PointSampler, ZeroVerdict};

/// Unary functions available in the expression language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            _ => return None,
        })
    }
}

/// Binary operators. Powers are a separate node kind because their
/// exponent is always a constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

/// Expression tree. Arity is encoded in the variant, and `Var` holds an
/// index into the owning [`VariableList`].
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
}

/// The canonical coordinate names of `R^2n`: `q1..qn` followed by `p1..pn`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableList {
    names: Vec<String>,
    dof: usize,
}

impl VariableList {
    pub fn canonical(dof: usize) -> Self {
        let names = (1..=dof)
            .map(|i| format!("q{i}"))
            .chain((1..=dof).map(|i| format!("p{i}")))
            .collect();
        VariableList { names, dof }
    }

    /// Degrees of freedom `n`; the list holds `2n` names.
    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn q(&self, i: usize) -> usize {
        assert!(i < self.dof);
        i
    }

    pub fn p(&self, i: usize) -> usize {
        assert!(i < self.dof);
        self.dof + i
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown variable `{name}` at {position}")]
    UnknownVariable { name: String, position: usize },
    #[error("unknown function `{name}` at {position}")]
    UnknownFunction { name: String, position: usize },
    #[error("exponent at {position} depends on a variable")]
    NonConstantExponent { position: usize },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Syntax { position, .. }
            | ParseError::UnknownVariable { position, .. }
            | ParseError::UnknownFunction { position, .. }
            | ParseError::NonConstantExponent { position } => *position,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    LogNonPositive,
    DivisionByZero,
    SqrtNegative,
    /// Negative base with a non-integer exponent, or zero to a negative power.
    InvalidPower,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainKind::LogNonPositive => "log of a non-positive value",
            DomainKind::DivisionByZero => "division by zero",
            DomainKind::SqrtNegative => "sqrt of a negative value",
            DomainKind::InvalidPower => "power outside its real domain",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{kind} in `{subexpr}`")]
    Domain { kind: DomainKind, subexpr: String },
    #[error("expected a point with {expected} coordinates, got {got}")]
    Dimension { expected: usize, got: usize },
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn var(i: usize) -> Self {
        Expr::Var(i)
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Self {
        Expr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Self {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn add(a: Expr, b: Expr) -> Self {
        Expr::binary(BinaryOp::Add, a, b)
    }

    pub fn sub(a: Expr, b: Expr) -> Self {
        Expr::binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(a: Expr, b: Expr) -> Self {
        Expr::binary(BinaryOp::Mul, a, b)
    }

    pub fn div(a: Expr, b: Expr) -> Self {
        Expr::binary(BinaryOp::Div, a, b)
    }

    pub fn neg(a: Expr) -> Self {
        Expr::unary(UnaryOp::Neg, a)
    }

    pub fn pow(base: Expr, exponent: f64) -> Self {
        Expr::Pow(Box::new(base), exponent)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_const(&self, value: f64) -> bool {
        self.as_const() == Some(value)
    }

    /// Largest variable index plus one, or 0 for a closed expression.
    pub fn var_bound(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.var_bound(),
            Expr::Binary(_, a, b) => a.var_bound().max(b.var_bound()),
        }
    }

    pub fn depends_on(&self, v: usize) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(i) => *i == v,
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.depends_on(v),
            Expr::Binary(_, a, b) => a.depends_on(v) || b.depends_on(v),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Unary(_, a) | Expr::Pow(a, _) => 1 + a.node_count(),
            Expr::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    /// Replaces every `Var(i)` by `values[i]`.
    ///
    /// Panics if a variable index is out of range for `values`.
    pub fn substitute(&self, values: &[Expr]) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => values[*i].clone(),
            Expr::Unary(op, a) => Expr::unary(*op, a.substitute(values)),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.substitute(values), b.substitute(values)),
            Expr::Pow(a, k) => Expr::pow(a.substitute(values), *k),
        }
    }

    /// Renders the expression with the given variable names. The output
    /// parses back to the same tree when the tree is in simplified form.
    pub fn display<'a>(&'a self, vars: &'a VariableList) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, vars }
    }

    /// Total structural order, used to canonicalize commutative operands.
    pub(crate) fn structural_cmp(&self, other: &Expr) -> Ordering {
        fn rank(e: &Expr) -> u8 {
            match e {
                Expr::Const(_) => 0,
                Expr::Var(_) => 1,
                Expr::Pow(..) => 2,
                Expr::Unary(..) => 3,
                Expr::Binary(..) => 4,
            }
        }
        match (self, other) {
            (Expr::Const(a), Expr::Const(b)) => a.total_cmp(b),
            (Expr::Var(a), Expr::Var(b)) => a.cmp(b),
            (Expr::Pow(a, k), Expr::Pow(b, l)) => a.structural_cmp(b).then(k.total_cmp(l)),
            (Expr::Unary(o1, a), Expr::Unary(o2, b)) => o1.cmp(o2).then_with(|| a.structural_cmp(b)),
            (Expr::Binary(o1, a1, b1), Expr::Binary(o2, a2, b2)) => o1
                .cmp(o2)
                .then_with(|| a1.structural_cmp(a2))
                .then_with(|| b1.structural_cmp(b2)),
            _ => rank(self).cmp(&rank(other)),
        }
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    vars: &'a VariableList,
}

// Binding strength used by the printer: higher binds tighter.
const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => PREC_NEG,
        Expr::Const(_) | Expr::Var(_) => PREC_ATOM,
        Expr::Unary(UnaryOp::Neg, _) => PREC_NEG,
        Expr::Unary(..) => PREC_ATOM,
        Expr::Pow(..) => PREC_POW,
        Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => PREC_ADD,
        Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => PREC_MUL,
    }
}

impl ExprDisplay<'_> {
    fn write(&self, e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match e {
            Expr::Const(c) => {
                if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) {
                    write!(f, "(-{})", -c)
                } else {
                    write!(f, "{c}")
                }
            }
            Expr::Var(i) => match self.vars.names().get(*i) {
                Some(name) => f.write_str(name),
                None => write!(f, "<var{i}>"),
            },
            Expr::Unary(UnaryOp::Neg, a) => {
                f.write_str("-")?;
                self.operand(a, precedence(a) < PREC_NEG, f)
            }
            Expr::Unary(op, a) => {
                write!(f, "{}(", op.name())?;
                self.write(a, f)?;
                f.write_str(")")
            }
            Expr::Pow(a, k) => {
                self.operand(a, precedence(a) <= PREC_POW, f)?;
                if *k < 0.0 || (*k == 0.0 && k.is_sign_negative()) {
                    write!(f, "^(-{})", -k)
                } else {
                    write!(f, "^{k}")
                }
            }
            Expr::Binary(op, a, b) => {
                let p = precedence(e);
                self.operand(a, precedence(a) < p, f)?;
                write!(f, " {} ", op.symbol())?;
                // Left-associative parse: an equal-precedence right operand needs parentheses.
                self.operand(b, precedence(b) <= p && precedence(b) != PREC_NEG, f)
            }
        }
    }

    fn operand(&self, e: &Expr, parens: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if parens {
            f.write_str("(")?;
            self.write(e, f)?;
            f.write_str(")")
        } else {
            self.write(e, f)
        }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, f)
    }
}
