//! Cometric entries written as arithmetic expressions in chart coordinates,
//! with exact symbolic first and second derivatives.

mod expr;
mod parser;
pub mod random;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chart_oracle::CometricJet;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::landmark::LandmarkMetric;

pub use expr::{EvalError, Expr, Func};
pub use parser::parse;

/// Partial derivative of `e` with respect to `var` (zero-based).
pub fn differentiate(e: &Expr, var: usize) -> Expr {
    e.differentiate(var)
}

/// Symmetric cometric `g^{ij}(x)` given entrywise by expressions. Only the
/// upper triangle is stored, together with its first and second symbolic
/// derivatives (`s <= t` only).
#[derive(Debug, Clone)]
pub struct CometricDef {
    dim: usize,
    upper: Vec<UpperEntry>,
}

#[derive(Debug, Clone)]
struct UpperEntry {
    i: usize,
    j: usize,
    value: Expr,
    d1: Vec<Expr>,
    /// Indexed by the packed pair `s <= t`, row by row.
    d2: Vec<Expr>,
}

/// On-disk form: `{"dim":2,"entries":{"1,1":"x2^2","2,2":"x2^2"}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CometricFile {
    pub dim: usize,
    pub entries: BTreeMap<String, String>,
}

impl CometricDef {
    /// Build from a full `dim x dim` table, reading only the upper triangle.
    pub fn from_upper(dim: usize, entry: impl Fn(usize, usize) -> Expr) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("cometric dimension must be positive".into()));
        }
        let mut upper = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in i..dim {
                let value = entry(i, j);
                if value.arity() > dim {
                    return Err(Error::Config(format!(
                        "entry ({},{}) uses x{} beyond dimension {dim}",
                        i + 1,
                        j + 1,
                        value.arity()
                    )));
                }
                let d1: Vec<Expr> = (0..dim).map(|s| value.differentiate(s)).collect();
                let mut d2 = Vec::with_capacity(dim * (dim + 1) / 2);
                for s in 0..dim {
                    for t in s..dim {
                        d2.push(d1[s].differentiate(t));
                    }
                }
                upper.push(UpperEntry { i, j, value, d1, d2 });
            }
        }
        Ok(CometricDef { dim, upper })
    }

    /// Parse the entry map of a cometric file. Keys are one-based `"i,j"`.
    /// Lower-triangle keys are mirrored; off-diagonal entries default to 0;
    /// a missing diagonal entry is an error.
    pub fn from_entries(dim: usize, entries: &BTreeMap<String, String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("cometric dimension must be positive".into()));
        }
        let mut table: BTreeMap<(usize, usize), (Expr, &str)> = BTreeMap::new();
        for (key, text) in entries {
            let (i, j) = parse_key(key, dim)?;
            let e = parse(text, dim)?;
            let slot = (i.min(j), i.max(j));
            if let Some((_, prev)) = table.get(&slot) {
                if prev.trim() != text.trim() {
                    return Err(Error::Config(format!(
                        "entry ({},{}) given twice with different values",
                        slot.0 + 1,
                        slot.1 + 1
                    )));
                }
            }
            table.insert(slot, (e, text.as_str()));
        }
        for i in 0..dim {
            if !table.contains_key(&(i, i)) {
                return Err(Error::Config(format!(
                    "missing diagonal entry \"{},{}\"",
                    i + 1,
                    i + 1
                )));
            }
        }
        Self::from_upper(dim, |i, j| {
            table
                .get(&(i, j))
                .map(|(e, _)| e.clone())
                .unwrap_or(Expr::Const(0.0))
        })
    }

    pub fn from_file(file: &CometricFile) -> Result<Self> {
        Self::from_entries(file.dim, &file.entries)
    }

    pub fn to_file(&self) -> CometricFile {
        let entries = self
            .upper
            .iter()
            .filter(|u| u.i == u.j || !u.value.is_zero())
            .map(|u| (format!("{},{}", u.i + 1, u.j + 1), u.value.to_string()))
            .collect();
        CometricFile {
            dim: self.dim,
            entries,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry `(i, j)` as an expression (zero-based, either order).
    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        let (a, b) = (i.min(j), i.max(j));
        &self.upper[self.upper_index(a, b)].value
    }

    fn upper_index(&self, i: usize, j: usize) -> usize {
        i * (2 * self.dim - i + 1) / 2 + (j - i)
    }

    /// Cometric matrix alone at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let d = self.dim;
        let mut g = DMatrix::zeros(d, d);
        for u in &self.upper {
            let v = u.value.eval(x).map_err(|e| e.into_domain(key(u.i, u.j)))?;
            g[(u.i, u.j)] = v;
            g[(u.j, u.i)] = v;
        }
        Ok(g)
    }

    /// Values, first and second derivatives at `x`, plus the inverse metric.
    pub fn jet(&self, x: &[f64]) -> Result<CometricJet> {
        self.check_point(x)?;
        let d = self.dim;
        let mut ginv = DMatrix::zeros(d, d);
        let mut dginv = vec![DMatrix::zeros(d, d); d];
        let mut ddginv = vec![DMatrix::zeros(d, d); d * d];
        for u in &self.upper {
            let ev = |e: &Expr| e.eval(x).map_err(|err| err.into_domain(key(u.i, u.j)));
            let v = ev(&u.value)?;
            ginv[(u.i, u.j)] = v;
            ginv[(u.j, u.i)] = v;
            for s in 0..d {
                let v = ev(&u.d1[s])?;
                dginv[s][(u.i, u.j)] = v;
                dginv[s][(u.j, u.i)] = v;
            }
            let mut k = 0;
            for s in 0..d {
                for t in s..d {
                    let v = ev(&u.d2[k])?;
                    k += 1;
                    for (a, b) in [(s, t), (t, s)] {
                        ddginv[a * d + b][(u.i, u.j)] = v;
                        ddginv[a * d + b][(u.j, u.i)] = v;
                    }
                }
            }
        }
        CometricJet::new(ginv, dginv, ddginv)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }
}

fn key(i: usize, j: usize) -> String {
    format!("{},{}", i + 1, j + 1)
}

fn parse_key(key: &str, dim: usize) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("malformed entry key `{key}`, expected \"i,j\""));
    let (a, b) = key.split_once(',').ok_or_else(bad)?;
    let i: usize = a.trim().parse().map_err(|_| bad())?;
    let j: usize = b.trim().parse().map_err(|_| bad())?;
    if i == 0 || j == 0 || i > dim || j > dim {
        return Err(Error::Config(format!(
            "entry key `{key}` out of range for dimension {dim}"
        )));
    }
    Ok((i - 1, j - 1))
}

/// Anything that can produce a cometric jet at a chart point.
#[derive(Debug, Clone)]
pub enum Cometric {
    Expr(CometricDef),
    Landmark(LandmarkMetric),
}

impl Cometric {
    pub fn dim(&self) -> usize {
        match self {
            Cometric::Expr(def) => def.dim(),
            Cometric::Landmark(m) => m.chart_dim(),
        }
    }

    pub fn jet(&self, x: &[f64]) -> Result<CometricJet> {
        match self {
            Cometric::Expr(def) => def.jet(x),
            Cometric::Landmark(m) => m.cometric_jet(x),
        }
    }
}

/// Convenience wrapper over [`CometricDef::jet`] / landmark jets.
pub fn cometric_jet(def: &Cometric, x: &[f64]) -> Result<CometricJet> {
    def.jet(x)
}

/// Analytic cometrics used as trusted inputs.
pub mod catalog {
    use super::*;

    /// `g^{ij} = δ^{ij}` on `R^d`.
    pub fn euclidean(d: usize) -> Result<CometricDef> {
        CometricDef::from_upper(d, |i, j| Expr::Const(if i == j { 1.0 } else { 0.0 }))
    }

    /// Unit sphere in stereographic coordinates: `g^{ij} = ((1+|x|^2)^2/4) δ^{ij}`.
    pub fn sphere_stereographic(d: usize) -> Result<CometricDef> {
        let r2 = (0..d)
            .map(|k| Expr::pow(Expr::Var(k), 2))
            .fold(Expr::Const(1.0), Expr::add);
        let factor = Expr::div(Expr::pow(r2, 2), Expr::Const(4.0));
        CometricDef::from_upper(d, |i, j| {
            if i == j {
                factor.clone()
            } else {
                Expr::Const(0.0)
            }
        })
    }

    /// Upper half-plane `x2 > 0`: `g^{ij} = x2^2 δ^{ij}`.
    pub fn hyperbolic_half_plane() -> Result<CometricDef> {
        CometricDef::from_upper(2, |i, j| {
            if i == j {
                Expr::pow(Expr::Var(1), 2)
            } else {
                Expr::Const(0.0)
            }
        })
    }

    /// Landmark cometric for `count` points in `R^ambient`.
    pub fn landmark(kernel: KernelSpec, count: usize, ambient: usize) -> Result<Cometric> {
        Ok(Cometric::Landmark(LandmarkMetric::new(kernel, count, ambient)?))
    }

    /// Resolve `sphere`, `sphere:<d>`, `hyperbolic` or `euclidean:<d>`.
    pub fn by_name(name: &str) -> Result<Cometric> {
        let (head, arg) = match name.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (name, None),
        };
        let dim_arg = |default: Option<usize>| -> Result<usize> {
            match arg {
                Some(a) => a
                    .parse()
                    .map_err(|_| Error::Config(format!("bad dimension in `{name}`"))),
                None => default.ok_or_else(|| Error::Config(format!("`{name}` needs a dimension"))),
            }
        };
        let def = match head {
            "euclidean" => euclidean(dim_arg(None)?)?,
            "sphere" => sphere_stereographic(dim_arg(Some(2))?)?,
            "hyperbolic" => hyperbolic_half_plane()?,
            _ => return Err(Error::Config(format!("unknown catalog cometric `{name}`"))),
        };
        Ok(Cometric::Expr(def))
    }
}
