//! Explicit Riemannian submersions in charts and a numerical check of the
//! curvature identity relating base, total space and vertical brackets.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mario_curvature::{coform_gram, mario_coordinate, Coform};
use crate::metric_dsl::{catalog as metrics, parse, CometricDef, Expr};

/// Tolerance of the metric-quotient check `Tp g_E⁻¹ Tpᵀ = g_B⁻¹ ∘ p`.
pub const QUOTIENT_TOLERANCE: f64 = 1e-8;

/// Sampling region for test points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// Uniform in `[-r, r]^d`.
    Cube(f64),
    /// Uniform in the ball of radius `r`.
    Ball(f64),
}

/// Total and base chart cometrics with a projection given by expressions.
#[derive(Debug, Clone)]
pub struct SubmersionCase {
    pub name: String,
    pub total: CometricDef,
    pub base: CometricDef,
    projection: Vec<Expr>,
    /// `differential[a * d_E + i] = ∂_i p^a`.
    differential: Vec<Expr>,
    pub region: Region,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OneillRecord {
    pub base_numerator: f64,
    pub total_numerator: f64,
    /// Squared `g_E`-norm of the vertical part of the bracket of the lifts.
    pub vertical_term: f64,
    /// `base − total − ¾ vertical`.
    pub residual: f64,
    /// `|α|²|β|² − ⟨α,β⟩²` on the base.
    pub denominator: f64,
}

impl OneillRecord {
    pub fn base_sectional(&self) -> f64 {
        self.base_numerator / self.denominator
    }

    pub fn total_sectional(&self) -> f64 {
        self.total_numerator / self.denominator
    }

    /// `¾ |[X̃, Ỹ]^ver|²` normalized by the plane area.
    pub fn vertical_sectional(&self) -> f64 {
        0.75 * self.vertical_term / self.denominator
    }
}

impl SubmersionCase {
    pub fn new(
        name: impl Into<String>,
        total: CometricDef,
        base: CometricDef,
        projection: Vec<Expr>,
        region: Region,
    ) -> Result<Self> {
        if projection.len() != base.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                got: projection.len(),
            });
        }
        if base.dim() > total.dim() {
            return Err(Error::Config("base dimension exceeds total dimension".into()));
        }
        if projection.iter().any(|p| p.arity() > total.dim()) {
            return Err(Error::Config("projection uses variables outside the total chart".into()));
        }
        let de = total.dim();
        let differential = projection
            .iter()
            .flat_map(|p| (0..de).map(move |i| p.differentiate(i)))
            .collect();
        Ok(SubmersionCase {
            name: name.into(),
            total,
            base,
            projection,
            differential,
            region,
        })
    }

    pub fn total_dim(&self) -> usize {
        self.total.dim()
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.total_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        self.projection
            .iter()
            .enumerate()
            .map(|(a, p)| p.eval(x).map_err(|e| e.into_domain(format!("p{}", a + 1))))
            .collect()
    }

    /// `Tp` at `x` as a `d_B × d_E` matrix.
    pub fn differential(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let (db, de) = (self.base_dim(), self.total_dim());
        let mut m = DMatrix::zeros(db, de);
        for a in 0..db {
            for i in 0..de {
                m[(a, i)] = self.differential[a * de + i]
                    .eval(x)
                    .map_err(|e| e.into_domain(format!("dp{}/dx{}", a + 1, i + 1)))?;
            }
        }
        Ok(m)
    }

    /// `max |Tp g_E⁻¹ Tpᵀ − g_B⁻¹(p(x))|`; rank deficiency of `Tp` is an error.
    pub fn quotient_defect(&self, x: &[f64]) -> Result<f64> {
        let tp = self.differential(x)?;
        let pushed = &tp * self.total.eval(x)? * tp.transpose();
        if pushed.clone().cholesky().is_none() {
            return Err(Error::RankDeficient);
        }
        let base = self.base.eval(&self.project(x)?)?;
        Ok((pushed - base).amax())
    }

    /// Sample a point in the case's test region.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.total_dim();
        match self.region {
            Region::Cube(r) => (0..d).map(|_| rng.gen_range(-r..r)).collect(),
            Region::Ball(r) => loop {
                let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-r..r)).collect();
                if v.iter().map(|t| t * t).sum::<f64>() < r * r {
                    break v;
                }
            },
        }
    }
}

/// `(p*α)♯ = g_E⁻¹ Tpᵀ α`, the horizontal lift of `α♯`.
pub fn pullback_sharp(case: &SubmersionCase, x: &[f64], alpha: &Coform) -> Result<DVector<f64>> {
    if alpha.dim() != case.base_dim() {
        return Err(Error::DimensionMismatch {
            expected: case.base_dim(),
            got: alpha.dim(),
        });
    }
    let tp = case.differential(x)?;
    let ginv = case.total.eval(x)?;
    if (&tp * &ginv * tp.transpose()).cholesky().is_none() {
        return Err(Error::RankDeficient);
    }
    Ok(ginv * (tp.transpose() * DVector::from_column_slice(&alpha.0)))
}

fn pullback(case: &SubmersionCase, x: &[f64], alpha: &Coform) -> Result<Coform> {
    let tp = case.differential(x)?;
    Ok(Coform((tp.transpose() * DVector::from_column_slice(&alpha.0)).as_slice().to_vec()))
}

/// Compare base and total-space curvature numerators with the vertical
/// bracket term for constant coordinate coforms `α, β` on the base.
pub fn oneill_check(case: &SubmersionCase, x: &[f64], alpha: &Coform, beta: &Coform) -> Result<OneillRecord> {
    let de = case.total_dim();
    let y = case.project(x)?;
    let base_jet = case.base.jet(&y)?;
    let base = mario_coordinate(&base_jet, alpha, beta)?;
    let (denominator, _) = coform_gram(&base_jet, alpha, beta);

    let total_jet = case.total.jet(x)?;
    let total = mario_coordinate(&total_jet, &pullback(case, x, alpha)?, &pullback(case, x, beta)?)?;

    // bracket of the lifted fields by central differences
    let h = f64::EPSILON.cbrt();
    let mut da = DMatrix::zeros(de, de);
    let mut db = DMatrix::zeros(de, de);
    let mut xp = x.to_vec();
    for j in 0..de {
        let step = h * (1.0 + x[j].abs());
        xp[j] = x[j] + step;
        let (ap, bp) = (pullback_sharp(case, &xp, alpha)?, pullback_sharp(case, &xp, beta)?);
        xp[j] = x[j] - step;
        let (am, bm) = (pullback_sharp(case, &xp, alpha)?, pullback_sharp(case, &xp, beta)?);
        xp[j] = x[j];
        da.set_column(j, &((ap - am) / (2.0 * step)));
        db.set_column(j, &((bp - bm) / (2.0 * step)));
    }
    let xa = pullback_sharp(case, x, alpha)?;
    let xb = pullback_sharp(case, x, beta)?;
    let bracket = &db * &xa - &da * &xb;

    // vertical part: remove the g_E-orthogonal projection onto the horizontal space
    let tp = case.differential(x)?;
    let ginv = &total_jet.ginv;
    let q = &tp * ginv * tp.transpose();
    let chol = q.cholesky().ok_or(Error::RankDeficient)?;
    let horizontal = ginv * tp.transpose() * chol.solve(&(&tp * &bracket));
    let vertical = bracket - horizontal;
    let vertical_term = vertical.dot(&(&total_jet.gcov * &vertical));

    Ok(OneillRecord {
        base_numerator: base.total,
        total_numerator: total.total,
        vertical_term,
        residual: base.total - total.total - 0.75 * vertical_term,
        denominator,
    })
}

/// Hand-derived cases.
pub mod catalog {
    use super::*;

    fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    fn c(v: f64) -> Expr {
        Expr::Const(v)
    }

    /// Block-diagonal product of `a` on the first coordinates and `b` on the
    /// rest, projecting to the first factor.
    pub fn product(a: CometricDef, b: CometricDef, region: Region) -> Result<SubmersionCase> {
        let (da, dbn) = (a.dim(), b.dim());
        let total = CometricDef::from_upper(da + dbn, |i, j| {
            if i < da && j < da {
                a.entry(i, j).clone()
            } else if i >= da && j >= da {
                b.entry(i - da, j - da).shift_vars(da)
            } else {
                c(0.0)
            }
        })?;
        let projection = (0..da).map(var).collect();
        SubmersionCase::new("product", total, a, projection, region)
    }

    /// Round `S²` chart times a warped line `R`, projecting to the sphere.
    pub fn product_default() -> Result<SubmersionCase> {
        let line = CometricDef::from_upper(1, |_, _| parse("exp(sin(x1)) + 0.5*x1^2", 1).expect("valid expression"))?;
        product(metrics::sphere_stereographic(2)?, line, Region::Cube(1.0))
    }

    /// Flat `R² → R`, projection to the first coordinate.
    pub fn flat() -> Result<SubmersionCase> {
        let mut case = product(metrics::euclidean(1)?, metrics::euclidean(1)?, Region::Cube(1.0))?;
        case.name = "flat".into();
        Ok(case)
    }

    /// Hopf fibration `S³ → S²(½)`. The total chart is stereographic
    /// `y ∈ R³ ↦ X = (2y, |y|² − 1)/(1 + |y|²)` on the unit sphere; the base
    /// chart is `w = z1/z2` with `z1 = X1 + iX2`, `z2 = X3 + iX4`, carrying
    /// `g^{ij} = (1 + |w|²)² δ^{ij}`.
    pub fn hopf() -> Result<SubmersionCase> {
        let r2 = (0..3).map(|k| Expr::pow(var(k), 2)).fold(c(0.0), Expr::add);
        let den = Expr::add(c(1.0), r2.clone());
        let x: Vec<Expr> = (0..3)
            .map(|k| Expr::div(Expr::mul(c(2.0), var(k)), den.clone()))
            .chain(std::iter::once(Expr::div(Expr::sub(r2.clone(), c(1.0)), den.clone())))
            .collect();
        let z2 = Expr::add(Expr::pow(x[2].clone(), 2), Expr::pow(x[3].clone(), 2));
        let w1 = Expr::div(
            Expr::add(Expr::mul(x[0].clone(), x[2].clone()), Expr::mul(x[1].clone(), x[3].clone())),
            z2.clone(),
        );
        let w2 = Expr::div(
            Expr::sub(Expr::mul(x[1].clone(), x[2].clone()), Expr::mul(x[0].clone(), x[3].clone())),
            z2,
        );
        let base_factor = Expr::pow(
            Expr::add(c(1.0), Expr::add(Expr::pow(var(0), 2), Expr::pow(var(1), 2))),
            2,
        );
        let base = CometricDef::from_upper(2, |i, j| if i == j { base_factor.clone() } else { c(0.0) })?;
        SubmersionCase::new(
            "hopf",
            metrics::sphere_stereographic(3)?,
            base,
            vec![w1, w2],
            Region::Ball(0.5),
        )
    }

    /// `product`, `hopf` or `flat`.
    pub fn by_name(name: &str) -> Result<SubmersionCase> {
        match name {
            "product" => product_default(),
            "hopf" => hopf(),
            "flat" => flat(),
            other => Err(Error::Config(format!(
                "unknown submersion case `{other}` (expected product, hopf or flat)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn coforms() -> (Coform, Coform) {
        (Coform::basis(2, 0), Coform::basis(2, 1))
    }

    #[test]
    fn catalog_cases_are_metric_quotients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for case in [catalog::product_default().unwrap(), catalog::hopf().unwrap(), catalog::flat().unwrap()] {
            for _ in 0..10 {
                let x = case.random_point(&mut rng);
                assert!(case.quotient_defect(&x).unwrap() <= QUOTIENT_TOLERANCE, "{}", case.name);
            }
        }
    }

    #[test]
    fn product_lift_is_coordinate_field() {
        let case = catalog::product(metrics::euclidean(2).unwrap(), metrics::euclidean(1).unwrap(), Region::Cube(1.0)).unwrap();
        let v = pullback_sharp(&case, &[0.3, -0.2, 0.7], &Coform::basis(2, 0)).unwrap();
        assert_eq!(v.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn lifts_are_horizontal_and_isometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for case in [catalog::product_default().unwrap(), catalog::hopf().unwrap()] {
            for _ in 0..5 {
                let x = case.random_point(&mut rng);
                let a = Coform::new(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
                let b = Coform::new(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
                let va = pullback_sharp(&case, &x, &a).unwrap();
                let vb = pullback_sharp(&case, &x, &b).unwrap();
                let gcov = case.total.jet(&x).unwrap().gcov;
                let gb = case.base.eval(&case.project(&x).unwrap()).unwrap();
                let base_ip = DVector::from_column_slice(&a.0).dot(&(&gb * DVector::from_column_slice(&b.0)));
                assert!((va.dot(&(&gcov * &vb)) - base_ip).abs() < 1e-10);
                // orthogonal to the kernel of Tp
                let tp = case.differential(&x).unwrap();
                let euclid = DMatrix::identity(case.total_dim(), case.total_dim())
                    - tp.transpose() * (&tp * tp.transpose()).try_inverse().unwrap() * &tp;
                for k in euclid.column_iter() {
                    assert!(va.dot(&(&gcov * k)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn hopf_unit_lift() {
        let case = catalog::hopf().unwrap();
        let x = [0.1, -0.2, 0.15];
        let y = case.project(&x).unwrap();
        let scale = 1.0 / (1.0 + y[0] * y[0] + y[1] * y[1]);
        let v = pullback_sharp(&case, &x, &Coform::new(vec![scale, 0.0])).unwrap();
        let gcov = case.total.jet(&x).unwrap().gcov;
        assert!((v.dot(&(&gcov * &v)) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn product_equality_case() {
        let case = catalog::product_default().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (a, b) = coforms();
        for _ in 0..10 {
            let rec = oneill_check(&case, &case.random_point(&mut rng), &a, &b).unwrap();
            assert!(rec.vertical_term.abs() <= 1e-20);
            assert!(rec.residual.abs() <= 1e-10);
            assert!((rec.base_sectional() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn flat_case_is_zero() {
        let case = catalog::flat().unwrap();
        // a one-dimensional base only carries degenerate planes
        let rec = oneill_check(&case, &[0.2, 0.4], &Coform::new(vec![1.0]), &Coform::new(vec![-2.0])).unwrap();
        assert_eq!((rec.base_numerator, rec.total_numerator, rec.vertical_term, rec.residual), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn hopf_curvatures() {
        let case = catalog::hopf().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (a, b) = coforms();
        for _ in 0..10 {
            let rec = oneill_check(&case, &case.random_point(&mut rng), &a, &b).unwrap();
            assert!((rec.base_sectional() - 4.0).abs() < 1e-8);
            assert!((rec.total_sectional() - 1.0).abs() < 1e-8);
            assert!((rec.vertical_sectional() - 3.0).abs() < 1e-6);
            assert!(rec.residual.abs() <= 1e-6 * (1.0 + rec.base_numerator.abs()));
            assert!(rec.vertical_term >= 0.0);
        }
    }

    #[test]
    fn unknown_case() {
        assert!(catalog::by_name("torus").is_err());
    }
}
