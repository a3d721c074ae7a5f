//! Seeded random expressions and positive definite cometrics for property
//! tests and validation runs.

use rand::Rng;

use super::{CometricDef, Expr, Func};
use crate::error::Result;

/// Random expression of depth at most `depth` in variables `x1..x{dim}`.
///
/// Every node is chosen so that the result is finite everywhere: division
/// is always by `1 + b^2`, `log` and `sqrt` only see `1 + a^2`, and `exp`
/// and powers only wrap leaves or bounded subexpressions.
pub fn random_expr<R: Rng + ?Sized>(rng: &mut R, dim: usize, depth: usize) -> Expr {
    if depth <= 1 || rng.gen_bool(0.2) {
        return leaf(rng, dim);
    }
    let sub = |rng: &mut R| random_expr(rng, dim, depth - 1);
    let bounded = |rng: &mut R| {
        let e = random_expr(rng, dim, depth - 1);
        if matches!(e, Expr::Var(_) | Expr::Const(_)) {
            e
        } else {
            Expr::call(Func::Sin, e)
        }
    };
    let one_plus_sq = |e: Expr| Expr::add(Expr::Const(1.0), Expr::pow(e, 2));
    match rng.gen_range(0..11) {
        0 => Expr::Add(Box::new(sub(rng)), Box::new(sub(rng))),
        1 => Expr::Sub(Box::new(sub(rng)), Box::new(sub(rng))),
        2 | 3 => Expr::Mul(Box::new(sub(rng)), Box::new(sub(rng))),
        4 => Expr::Div(Box::new(sub(rng)), Box::new(one_plus_sq(sub(rng)))),
        5 => Expr::Pow(Box::new(bounded(rng)), rng.gen_range(2..=3)),
        6 => Expr::call(Func::Exp, bounded(rng)),
        7 => Expr::call(Func::Log, one_plus_sq(sub(rng))),
        8 => Expr::call(Func::Sqrt, one_plus_sq(sub(rng))),
        9 => Expr::call(if rng.gen_bool(0.5) { Func::Sin } else { Func::Cos }, sub(rng)),
        _ => Expr::call(Func::Tanh, sub(rng)),
    }
}

fn leaf<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Expr {
    if rng.gen_bool(0.7) {
        Expr::Var(rng.gen_range(0..dim))
    } else {
        // three decimals keep printed forms short
        Expr::Const((rng.gen_range(-1.5..1.5) * 1000.0_f64).round() / 1000.0)
    }
}

/// Random cometric that is positive definite at every point.
///
/// Built as `g^{ij} = s_i s_j m^{ij}` with `s_i = exp(0.3 sin f_i)`,
/// `m^{ii} = d + 0.5 tanh(e_i)` and `m^{ij} = 0.4 tanh(e_ij)`, so `m` is
/// strictly diagonally dominant and the scaling is a congruence. Inner
/// expressions have depth at most `depth - 2`.
pub fn random_cometric<R: Rng + ?Sized>(rng: &mut R, dim: usize, depth: usize) -> Result<CometricDef> {
    let inner = depth.saturating_sub(2).max(1);
    let scale: Vec<Expr> = (0..dim)
        .map(|_| {
            let f = random_expr(rng, dim, inner);
            Expr::call(
                Func::Exp,
                Expr::mul(Expr::Const(0.3), Expr::call(Func::Sin, f)),
            )
        })
        .collect();
    let mut core = vec![vec![Expr::Const(0.0); dim]; dim];
    for i in 0..dim {
        for j in i..dim {
            let e = Expr::call(Func::Tanh, random_expr(rng, dim, inner));
            core[i][j] = if i == j {
                Expr::add(Expr::Const(dim as f64), Expr::mul(Expr::Const(0.5), e))
            } else {
                Expr::mul(Expr::Const(0.4), e)
            };
        }
    }
    CometricDef::from_upper(dim, |i, j| {
        Expr::mul(Expr::mul(scale[i].clone(), scale[j].clone()), core[i][j].clone())
    })
}

/// Uniform point in `[-radius, radius]^dim`.
pub fn random_point<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-radius..radius)).collect()
}
