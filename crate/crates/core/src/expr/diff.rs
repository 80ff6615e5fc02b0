use super::{BinaryOp, Expr, UnaryOp};

impl Expr {
    /// Exact partial derivative with respect to variable `v`, simplified.
    pub fn differentiate(&self, v: usize) -> Expr {
        self.derive(v).simplify()
    }

    fn derive(&self, v: usize) -> Expr {
        if !self.depends_on(v) {
            return Expr::Const(0.0);
        }
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == v { 1.0 } else { 0.0 }),
            Expr::Unary(op, a) => {
                let da = a.derive(v);
                let outer = match op {
                    UnaryOp::Neg => return Expr::neg(da),
                    UnaryOp::Sin => Expr::unary(UnaryOp::Cos, (**a).clone()),
                    UnaryOp::Cos => Expr::neg(Expr::unary(UnaryOp::Sin, (**a).clone())),
                    UnaryOp::Exp => self.clone(),
                    UnaryOp::Log => return Expr::div(da, (**a).clone()),
                    UnaryOp::Sqrt => {
                        return Expr::div(da, Expr::mul(Expr::Const(2.0), self.clone()));
                    }
                };
                Expr::mul(outer, da)
            }
            Expr::Binary(op, a, b) => {
                let (da, db) = (a.derive(v), b.derive(v));
                match op {
                    BinaryOp::Add => Expr::add(da, db),
                    BinaryOp::Sub => Expr::sub(da, db),
                    BinaryOp::Mul => Expr::add(
                        Expr::mul(da, (**b).clone()),
                        Expr::mul((**a).clone(), db),
                    ),
                    BinaryOp::Div => Expr::div(
                        Expr::sub(
                            Expr::mul(da, (**b).clone()),
                            Expr::mul((**a).clone(), db),
                        ),
                        Expr::pow((**b).clone(), 2.0),
                    ),
                }
            }
            Expr::Pow(a, k) => Expr::mul(
                Expr::mul(Expr::Const(*k), Expr::pow((**a).clone(), k - 1.0)),
                a.derive(v),
            ),
        }
    }
}
