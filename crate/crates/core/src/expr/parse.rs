use super::{Expr, ParseError, UnaryOp, VariableList};

/// Nesting limit for parentheses, function calls and unary operators.
pub const MAX_DEPTH: usize = 200;

/// Parses `source` against the declared variables.
pub fn parse(source: &str, vars: &VariableList) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: source.as_bytes(),
        pos: 0,
        vars,
        depth: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax(format!("unexpected `{}`", p.src[p.pos] as char)));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a VariableList,
    depth: usize,
}

impl Parser<'_> {
    fn syntax(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            position: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.syntax("expression nested too deeply"));
        }
        Ok(())
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        match self.peek() {
            Some(got) if got == c => {
                self.pos += 1;
                Ok(())
            }
            Some(got) => Err(self.syntax(format!("expected `{}`, found `{}`", c as char, got as char))),
            None => Err(self.syntax(format!("expected `{}` at end of input", c as char))),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::add(lhs, self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::mul(lhs, self.unary()?);
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::div(lhs, self.unary()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                self.enter()?;
                let inner = self.unary()?;
                self.depth -= 1;
                // A negated literal is a negative constant.
                Ok(match inner {
                    Expr::Const(c) => Expr::Const(-c),
                    other => Expr::neg(other),
                })
            }
            Some(b'+') => {
                self.pos += 1;
                self.enter()?;
                let inner = self.unary();
                self.depth -= 1;
                inner
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        self.skip_ws();
        let at = self.pos;
        self.enter()?;
        let exponent = self.unary()?;
        self.depth -= 1;
        if exponent.var_bound() > 0 {
            return Err(ParseError::NonConstantExponent { position: at });
        }
        match exponent.evaluate(&[]) {
            Ok(k) if k.is_finite() => Ok(Expr::pow(base, k)),
            _ => Err(ParseError::Syntax {
                position: at,
                message: "exponent does not evaluate to a finite number".into(),
            }),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                self.enter()?;
                let e = self.expr()?;
                self.depth -= 1;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => Err(self.syntax(format!("unexpected `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let src = self.src;
        let digits = |mut i: usize| {
            while i < src.len() && src[i].is_ascii_digit() {
                i += 1;
            }
            i
        };
        let mut end = digits(start);
        if end < src.len() && src[end] == b'.' {
            end = digits(end + 1);
        }
        if end < src.len() && (src[end] == b'e' || src[end] == b'E') {
            let mut exp = end + 1;
            if exp < src.len() && (src[exp] == b'+' || src[exp] == b'-') {
                exp += 1;
            }
            let exp_end = digits(exp);
            // `2e` or `2ex` is not an exponent; leave it for the caller to reject.
            if exp_end > exp {
                end = exp_end;
            }
        }
        // The slice is ASCII by construction.
        let text = std::str::from_utf8(&src[start..end]).expect("ascii");
        let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
            position: start,
            message: format!("malformed number `{text}`"),
        })?;
        if !value.is_finite() {
            return Err(ParseError::Syntax {
                position: start,
                message: format!("number `{text}` out of range"),
            });
        }
        self.pos = end;
        Ok(Expr::Const(value))
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let mut end = start;
        while end < self.src.len() && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_') {
            end += 1;
        }
        let name = std::str::from_utf8(&self.src[start..end]).expect("ascii");
        self.pos = end;
        if self.peek() == Some(b'(') {
            let Some(op) = UnaryOp::from_name(name) else {
                return Err(ParseError::UnknownFunction {
                    name: name.to_string(),
                    position: start,
                });
            };
            self.pos += 1;
            self.enter()?;
            let arg = self.expr()?;
            self.depth -= 1;
            self.expect(b')')?;
            return Ok(Expr::unary(op, arg));
        }
        if name == "pi" {
            return Ok(Expr::Const(std::f64::consts::PI));
        }
        match self.vars.index_of(name) {
            Some(i) => Ok(Expr::Var(i)),
            None => Err(ParseError::UnknownVariable {
                name: name.to_string(),
                position: start,
            }),
        }
    }
}
