use crate::error::ParseError;

use super::expr::{Expr, Func};

/// Parse an expression over chart coordinates `x1..x{dim}`.
///
/// Grammar, loosest binding first:
///
/// ```text
/// sum     := product (('+' | '-') product)*
/// product := unary (('*' | '/') unary)*
/// unary   := '-' unary | power
/// power   := atom ('^' unary)?
/// atom    := number | 'x'<index> | func '(' sum ')' | '(' sum ')'
/// ```
///
/// `^` is right associative and binds tighter than unary minus, so `-x1^2`
/// is `-(x1^2)`. A variable-free exponent that evaluates to an integer becomes
/// an integer power; anything else is rewritten as `exp(b*log(a))`.
pub fn parse(text: &str, dim: usize) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        dim,
    };
    p.skip_ws();
    if p.pos == p.src.len() {
        return Err(p.syntax("empty expression"));
    }
    let e = p.sum()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: message.to_string(),
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

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.product()?;
                lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'-') {
                let rhs = self.product()?;
                lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.unary()?;
                lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'/') {
                let rhs = self.unary()?;
                lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            let inner = self.unary()?;
            Ok(Expr::Neg(Box::new(inner)))
        } else if self.eat(b'+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let exponent = self.unary()?;
        if exponent.arity() == 0 {
            if let Ok(k) = exponent.eval(&[]) {
                if k.fract() == 0.0 && k.abs() <= i32::MAX as f64 {
                    return Ok(Expr::Pow(Box::new(base), k as i32));
                }
            }
        }
        Ok(Expr::call(
            Func::Exp,
            Expr::Mul(
                Box::new(exponent),
                Box::new(Expr::call(Func::Log, base)),
            ),
        ))
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let Some(c) = self.peek() else {
            return Err(self.syntax("unexpected end of input"));
        };
        if c == b'(' {
            self.pos += 1;
            let e = self.sum()?;
            if !self.eat(b')') {
                return Err(self.syntax("expected `)`"));
            }
            return Ok(e);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() {
            return self.identifier();
        }
        Err(self.syntax(&format!("unexpected character `{}`", c as char)))
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                digits(self);
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");

        if let Some(rest) = name.strip_prefix('x') {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = rest.parse().unwrap_or(usize::MAX);
                if index == 0 || index > self.dim {
                    return Err(ParseError::VariableOutOfRange {
                        index,
                        dim: self.dim,
                        offset: start,
                    });
                }
                return Ok(Expr::Var(index - 1));
            }
        }
        if let Some(func) = Func::from_name(name) {
            if !self.eat(b'(') {
                return Err(self.syntax(&format!("expected `(` after `{name}`")));
            }
            let arg = self.sum()?;
            if !self.eat(b')') {
                return Err(self.syntax("expected `)`"));
            }
            return Ok(Expr::call(func, arg));
        }
        Err(ParseError::UnknownIdentifier {
            name: name.to_string(),
            offset: start,
        })
    }
}
