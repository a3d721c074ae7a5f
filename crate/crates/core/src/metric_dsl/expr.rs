use std::fmt;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Tanh,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }
}

/// Expression tree over chart coordinates. Variables are zero-based
/// internally and print as `x1..xd`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Integer power.
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

/// Why an expression could not be evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalError(pub String);

impl EvalError {
    pub fn into_domain(self, entry: impl Into<String>) -> Error {
        Error::Domain {
            entry: entry.into(),
            message: self.0,
        }
    }
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(index: usize) -> Expr {
        Expr::Var(index)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 1.0)
    }

    // Smart constructors applying the idempotent rules 0*x -> 0, 1*x -> x,
    // x+0 -> x and friends. Nothing else is rewritten.

    pub fn add(a: Expr, b: Expr) -> Expr {
        if a.is_zero() {
            b
        } else if b.is_zero() {
            a
        } else {
            Expr::Add(Box::new(a), Box::new(b))
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        if b.is_zero() {
            a
        } else if a.is_zero() {
            Expr::neg(b)
        } else {
            Expr::Sub(Box::new(a), Box::new(b))
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        if a.is_zero() || b.is_zero() {
            Expr::Const(0.0)
        } else if a.is_one() {
            b
        } else if b.is_one() {
            a
        } else {
            Expr::Mul(Box::new(a), Box::new(b))
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        if a.is_zero() {
            Expr::Const(0.0)
        } else if b.is_one() {
            a
        } else {
            Expr::Div(Box::new(a), Box::new(b))
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) if c == 0.0 => Expr::Const(0.0),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn pow(a: Expr, k: i32) -> Expr {
        match k {
            0 => Expr::Const(1.0),
            1 => a,
            _ => Expr::Pow(Box::new(a), k),
        }
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    /// Largest variable index used plus one (0 for constants).
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.arity(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.arity().max(b.arity())
            }
        }
    }

    /// Renumber every variable `xi` to `x(i + offset)`.
    pub fn shift_vars(&self, offset: usize) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => Expr::Var(i + offset),
            Expr::Neg(a) => Expr::Neg(Box::new(a.shift_vars(offset))),
            Expr::Pow(a, k) => Expr::Pow(Box::new(a.shift_vars(offset)), *k),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.shift_vars(offset))),
            Expr::Add(a, b) => Expr::Add(Box::new(a.shift_vars(offset)), Box::new(b.shift_vars(offset))),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.shift_vars(offset)), Box::new(b.shift_vars(offset))),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.shift_vars(offset)), Box::new(b.shift_vars(offset))),
            Expr::Div(a, b) => Expr::Div(Box::new(a.shift_vars(offset)), Box::new(b.shift_vars(offset))),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => *x
                .get(*i)
                .ok_or_else(|| EvalError(format!("x{} not supplied", i + 1)))?,
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let den = b.eval(x)?;
                if den == 0.0 {
                    return Err(EvalError("division by zero".into()));
                }
                a.eval(x)? / den
            }
            Expr::Pow(a, k) => {
                let base = a.eval(x)?;
                if base == 0.0 && *k < 0 {
                    return Err(EvalError("negative power of zero".into()));
                }
                base.powi(*k)
            }
            Expr::Call(f, a) => {
                let arg = a.eval(x)?;
                match f {
                    Func::Exp => arg.exp(),
                    Func::Log => {
                        if arg <= 0.0 {
                            return Err(EvalError(format!("log of non-positive value {arg}")));
                        }
                        arg.ln()
                    }
                    Func::Sqrt => {
                        if arg < 0.0 {
                            return Err(EvalError(format!("sqrt of negative value {arg}")));
                        }
                        arg.sqrt()
                    }
                    Func::Sin => arg.sin(),
                    Func::Cos => arg.cos(),
                    Func::Tanh => arg.tanh(),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError(format!("non-finite value {v}")))
        }
    }

    /// Exact partial derivative with respect to variable `var` (zero-based).
    pub fn differentiate(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => Expr::neg(a.differentiate(var)),
            Expr::Add(a, b) => Expr::add(a.differentiate(var), b.differentiate(var)),
            Expr::Sub(a, b) => Expr::sub(a.differentiate(var), b.differentiate(var)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.differentiate(var), (**b).clone()),
                Expr::mul((**a).clone(), b.differentiate(var)),
            ),
            Expr::Div(a, b) => {
                // (a' b - a b') / b^2
                let num = Expr::sub(
                    Expr::mul(a.differentiate(var), (**b).clone()),
                    Expr::mul((**a).clone(), b.differentiate(var)),
                );
                Expr::div(num, Expr::pow((**b).clone(), 2))
            }
            Expr::Pow(a, k) => {
                let da = a.differentiate(var);
                if da.is_zero() {
                    return Expr::Const(0.0);
                }
                Expr::mul(
                    Expr::mul(Expr::Const(*k as f64), Expr::pow((**a).clone(), k - 1)),
                    da,
                )
            }
            Expr::Call(f, a) => {
                let da = a.differentiate(var);
                if da.is_zero() {
                    return Expr::Const(0.0);
                }
                let inner = (**a).clone();
                let outer = match f {
                    Func::Exp => Expr::call(Func::Exp, inner),
                    Func::Log => Expr::div(Expr::Const(1.0), inner),
                    Func::Sqrt => Expr::div(
                        Expr::Const(1.0),
                        Expr::mul(Expr::Const(2.0), Expr::call(Func::Sqrt, inner)),
                    ),
                    Func::Sin => Expr::call(Func::Cos, inner),
                    Func::Cos => Expr::neg(Expr::call(Func::Sin, inner)),
                    Func::Tanh => Expr::sub(
                        Expr::Const(1.0),
                        Expr::pow(Expr::call(Func::Tanh, inner), 2),
                    ),
                };
                Expr::mul(outer, da)
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(c) if *c < 0.0 => 3,
            Expr::Const(_) | Expr::Var(_) | Expr::Call(..) => 5,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // Debug formatting of f64 is the shortest round-trip representation.
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_child(f, 4)
            }
            Expr::Add(a, b) => {
                a.fmt_child(f, 1)?;
                write!(f, " + ")?;
                b.fmt_child(f, 2)
            }
            Expr::Sub(a, b) => {
                a.fmt_child(f, 1)?;
                write!(f, " - ")?;
                b.fmt_child(f, 2)
            }
            Expr::Mul(a, b) => {
                a.fmt_child(f, 2)?;
                write!(f, "*")?;
                b.fmt_child(f, 3)
            }
            Expr::Div(a, b) => {
                a.fmt_child(f, 2)?;
                write!(f, "/")?;
                b.fmt_child(f, 4)
            }
            Expr::Pow(a, k) => {
                a.fmt_child(f, 5)?;
                if *k < 0 {
                    write!(f, "^({k})")
                } else {
                    write!(f, "^{k}")
                }
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> Expr {
        Expr::Var(i)
    }

    #[test]
    fn product_rule_simplifies() {
        let e = Expr::mul(x(0), x(1));
        assert_eq!(e.differentiate(0), x(1));
        assert_eq!(e.differentiate(1), x(0));
    }

    #[test]
    fn chain_rule_through_exp() {
        let e = Expr::call(Func::Exp, Expr::pow(x(0), 2));
        let d = e.differentiate(0).eval(&[1.0]).unwrap();
        assert!((d - 2.0 * std::f64::consts::E).abs() < 1e-14);
    }

    #[test]
    fn derivative_of_other_variable_is_zero() {
        assert_eq!(x(0).differentiate(1), Expr::Const(0.0));
    }

    #[test]
    fn domain_errors() {
        assert!(Expr::call(Func::Log, Expr::Const(-1.0)).eval(&[]).is_err());
        assert!(Expr::div(Expr::Const(1.0), x(0)).eval(&[0.0]).is_err());
        assert!(Expr::call(Func::Sqrt, Expr::Const(-1.0)).eval(&[]).is_err());
    }

    #[test]
    fn shift_renumbers() {
        let e = Expr::add(x(0), Expr::pow(x(1), 2)).shift_vars(2);
        assert_eq!(e.arity(), 4);
        assert_eq!(e.eval(&[0.0, 0.0, 1.0, 3.0]).unwrap(), 10.0);
    }
}
