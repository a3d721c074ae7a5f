//! Sectional curvature numerators computed from the cometric jet alone, in
//! three independent forms: the raw coordinate contraction, the covariant
//! closed form, and the force/stress decomposition.
//!
//! All functions take constant-coefficient chart coforms `α, β` and return
//! `g(R(α♯,β♯)β♯, α♯)`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::chart_oracle::{CometricJet, PLANE_TOLERANCE};
use crate::error::{Error, Result};

/// Constant-coefficient chart covector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coform(pub Vec<f64>);

impl Coform {
    pub fn new(components: Vec<f64>) -> Self {
        Coform(components)
    }

    /// The coordinate differential `dx_{index+1}`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut c = vec![0.0; dim];
        c[index] = 1.0;
        Coform(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Coform {
    fn from(v: Vec<f64>) -> Self {
        Coform(v)
    }
}

/// The four contributions to the numerator and the resulting curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBreakdown {
    pub r11: f64,
    pub r12: f64,
    pub r2: f64,
    pub r3: f64,
    /// `r11 + r12 + r2 + r3`.
    pub total: f64,
    /// `|α|²|β|² − g⁻¹(α,β)²`.
    pub denominator: f64,
    /// `total / denominator`; absent when the plane is degenerate.
    pub sectional: Option<f64>,
}

impl CurvatureBreakdown {
    pub fn from_terms(r11: f64, r12: f64, r2: f64, r3: f64, denominator: f64, scale: f64) -> Self {
        let total = r11 + r12 + r2 + r3;
        let sectional = if denominator > PLANE_TOLERANCE * scale {
            Some(total / denominator)
        } else {
            None
        };
        CurvatureBreakdown {
            r11,
            r12,
            r2,
            r3,
            total,
            denominator,
            sectional,
        }
    }

    pub fn r1(&self) -> f64 {
        self.r11 + self.r12
    }

    /// Sectional curvature, or a degenerate-plane error.
    pub fn curvature(&self) -> Result<f64> {
        self.sectional.ok_or(Error::DegeneratePlane {
            gram: self.denominator,
        })
    }
}

fn check(cj: &CometricJet, alpha: &Coform, beta: &Coform) -> Result<()> {
    for c in [alpha, beta] {
        if c.dim() != cj.dim {
            return Err(Error::DimensionMismatch {
                expected: cj.dim,
                got: c.dim(),
            });
        }
        if c.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("coform has non-finite components".into()));
        }
    }
    Ok(())
}

/// `(|α|²|β|² − g⁻¹(α,β)², |α|²|β|²)`.
pub fn coform_gram(cj: &CometricJet, alpha: &Coform, beta: &Coform) -> (f64, f64) {
    let aa = cj.co_inner(&alpha.0, &alpha.0);
    let bb = cj.co_inner(&beta.0, &beta.0);
    let ab = cj.co_inner(&alpha.0, &beta.0);
    (aa * bb - ab * ab, aa * bb)
}

/// Coordinate form: contract `P_ijkl = (α_iβ_k − α_kβ_i)(α_jβ_l − α_lβ_j)`
/// against
/// `R1 = ½ g^{is}(g^{jt} g^{kl}_{,t})_{,s}`,
/// `R2 = −⅛ g^{ij}_{,s} g^{st} g^{kl}_{,t}` and
/// `R3 = −¾ g^{is} g^{kp}_{,s} g_pq g^{jt} g^{lq}_{,t}`.
pub fn mario_coordinate(cj: &CometricJet, alpha: &Coform, beta: &Coform) -> Result<CurvatureBreakdown> {
    check(cj, alpha, beta)?;
    let d = cj.dim;
    let (a, b) = (&alpha.0, &beta.0);
    let g = &cj.ginv;
    let dg = &cj.dginv;

    let mut amat = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            amat[i * d + k] = a[i] * b[k] - a[k] * b[i];
        }
    }
    let am = |i: usize, k: usize| amat[i * d + k];
    let idx = |i: usize, j: usize, k: usize, l: usize| ((i * d + j) * d + k) * d + l;

    // E11[ijkl] = g^{is} g^{jt} g^{kl}_{,st}
    // E12[ijkl] = g^{is} g^{jt}_{,s} g^{kl}_{,t}
    // E2[ijkl]  = g^{ij}_{,s} g^{st} g^{kl}_{,t}
    let n4 = d * d * d * d;
    let mut e11 = vec![0.0; n4];
    let mut e12 = vec![0.0; n4];
    let mut e2 = vec![0.0; n4];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let (mut s11, mut s12, mut s2) = (0.0, 0.0, 0.0);
                    for s in 0..d {
                        for t in 0..d {
                            s11 += g[(i, s)] * g[(j, t)] * cj.dd(s, t)[(k, l)];
                            s12 += g[(i, s)] * dg[s][(j, t)] * dg[t][(k, l)];
                            s2 += dg[s][(i, j)] * g[(s, t)] * dg[t][(k, l)];
                        }
                    }
                    e11[idx(i, j, k, l)] = s11;
                    e12[idx(i, j, k, l)] = s12;
                    e2[idx(i, j, k, l)] = s2;
                }
            }
        }
    }

    // V[ik][p] = g^{is} g^{kp}_{,s}
    let mut v = vec![0.0; d * d * d];
    for i in 0..d {
        for k in 0..d {
            for p in 0..d {
                let mut acc = 0.0;
                for s in 0..d {
                    acc += g[(i, s)] * dg[s][(k, p)];
                }
                v[(i * d + k) * d + p] = acc;
            }
        }
    }

    let (mut r11, mut r12, mut r2, mut r3) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let p = am(i, k) * am(j, l);
                    if p == 0.0 {
                        continue;
                    }
                    let mut e3 = 0.0;
                    for pp in 0..d {
                        for q in 0..d {
                            e3 += v[(i * d + k) * d + pp] * cj.gcov[(pp, q)] * v[(j * d + l) * d + q];
                        }
                    }
                    r11 += p * e11[idx(i, j, k, l)];
                    r12 += p * e12[idx(i, j, k, l)];
                    r2 += p * e2[idx(i, j, k, l)];
                    r3 += p * e3;
                }
            }
        }
    }
    let (den, scale) = coform_gram(cj, alpha, beta);
    Ok(CurvatureBreakdown::from_terms(
        0.5 * r11,
        0.5 * r12,
        -0.125 * r2,
        -0.75 * r3,
        den,
        scale,
    ))
}

/// Gradient and Hessian of the scalar `g⁻¹(a,b)` at the jet point.
struct ScalarJet {
    grad: Vec<f64>,
    hess: Vec<f64>,
}

fn pairing_jet(cj: &CometricJet, a: &[f64], b: &[f64]) -> ScalarJet {
    let d = cj.dim;
    let pair = |m: &nalgebra::DMatrix<f64>| {
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += a[i] * m[(i, j)] * b[j];
            }
        }
        acc
    };
    let grad = (0..d).map(|s| pair(&cj.dginv[s])).collect();
    let mut hess = vec![0.0; d * d];
    for s in 0..d {
        for t in 0..d {
            hess[s * d + t] = pair(cj.dd(s, t));
        }
    }
    ScalarJet { grad, hess }
}

/// Value and first derivatives of the vector field `a♯`.
struct FieldJet {
    value: Vec<f64>,
    /// `deriv[s * d + t] = ∂_s (a♯)^t`.
    deriv: Vec<f64>,
}

fn sharp_jet(cj: &CometricJet, a: &[f64]) -> FieldJet {
    let d = cj.dim;
    let mut value = vec![0.0; d];
    let mut deriv = vec![0.0; d * d];
    for t in 0..d {
        for i in 0..d {
            value[t] += a[i] * cj.ginv[(i, t)];
        }
        for s in 0..d {
            let mut acc = 0.0;
            for i in 0..d {
                acc += a[i] * cj.dginv[s][(i, t)];
            }
            deriv[s * d + t] = acc;
        }
    }
    FieldJet { value, deriv }
}

/// `X(Y f) = X^s ∂_s Y^t ∂_t f + X^s Y^t ∂_st f`.
fn second_directional(x: &FieldJet, y: &FieldJet, f: &ScalarJet) -> f64 {
    let d = x.value.len();
    let mut acc = 0.0;
    for s in 0..d {
        for t in 0..d {
            acc += x.value[s] * (y.deriv[s * d + t] * f.grad[t] + y.value[t] * f.hess[s * d + t]);
        }
    }
    acc
}

/// `[X, Y]^t = X^s ∂_s Y^t − Y^s ∂_s X^t`.
fn bracket(x: &FieldJet, y: &FieldJet) -> Vec<f64> {
    let d = x.value.len();
    (0..d)
        .map(|t| {
            (0..d)
                .map(|s| x.value[s] * y.deriv[s * d + t] - y.value[s] * x.deriv[s * d + t])
                .sum()
        })
        .collect()
}

/// Covariant form:
/// `R1 = ½(α♯α♯|β|² − (α♯β♯ + β♯α♯) g⁻¹(α,β) + β♯β♯|α|²)`,
/// `R2 = ¼(|d g⁻¹(α,β)|² − g⁻¹(d|α|², d|β|²))`,
/// `R3 = −¾ g([α♯,β♯],[α♯,β♯])`,
/// with the directional derivatives expanded through the jet.
pub fn mario_covariant(cj: &CometricJet, alpha: &Coform, beta: &Coform) -> Result<f64> {
    check(cj, alpha, beta)?;
    let (a, b) = (&alpha.0[..], &beta.0[..]);
    let xa = sharp_jet(cj, a);
    let xb = sharp_jet(cj, b);
    let faa = pairing_jet(cj, a, a);
    let fbb = pairing_jet(cj, b, b);
    let fab = pairing_jet(cj, a, b);

    let r1 = 0.5
        * (second_directional(&xa, &xa, &fbb)
            - second_directional(&xa, &xb, &fab)
            - second_directional(&xb, &xa, &fab)
            + second_directional(&xb, &xb, &faa));
    let r2 = 0.25 * (cj.co_inner(&fab.grad, &fab.grad) - cj.co_inner(&faa.grad, &fbb.grad));
    let br = bracket(&xa, &xb);
    let r3 = -0.75 * cj.inner(&br, &br);
    Ok(r1 + r2 + r3)
}

/// Force `F(α,β)_s = ½ α_i β_j ∂_s g^{ij}`.
pub fn force(cj: &CometricJet, alpha: &Coform, beta: &Coform) -> Result<Coform> {
    check(cj, alpha, beta)?;
    Ok(Coform(
        cj.dginv
            .iter()
            .map(|m| 0.5 * crate::chart_oracle::sym_bilinear(m, &alpha.0, &beta.0))
            .collect(),
    ))
}

/// Stress `D(α,β)^t = α_i g^{is} β_k ∂_s g^{kt}`, the derivative of `β♯`
/// along `α♯` for constant coforms.
pub fn stress(cj: &CometricJet, alpha: &Coform, beta: &Coform) -> Result<DVector<f64>> {
    check(cj, alpha, beta)?;
    let d = cj.dim;
    let ash = cj.sharp(&alpha.0);
    let mut out = DVector::zeros(d);
    for t in 0..d {
        let mut acc = 0.0;
        for s in 0..d {
            let mut inner = 0.0;
            for k in 0..d {
                inner += beta.0[k] * cj.dginv[s][(k, t)];
            }
            acc += ash[s] * inner;
        }
        out[t] = acc;
    }
    Ok(out)
}

/// Force/stress form of the numerator.
pub fn mario_force_stress(cj: &CometricJet, alpha: &Coform, beta: &Coform) -> Result<CurvatureBreakdown> {
    check(cj, alpha, beta)?;
    let d = cj.dim;
    let (a, b) = (&alpha.0[..], &beta.0[..]);
    let ash = cj.sharp(a);
    let bsh = cj.sharp(b);

    // second derivatives of pairings along frozen sharps
    let hess_pair = |u: &DVector<f64>, v: &DVector<f64>, p: &[f64], q: &[f64]| {
        let mut acc = 0.0;
        for s in 0..d {
            for t in 0..d {
                acc += u[s] * v[t] * crate::chart_oracle::bilinear(cj.dd(s, t), p, q);
            }
        }
        acc
    };
    let r11 = 0.5
        * (hess_pair(&ash, &ash, b, b) - 2.0 * hess_pair(&ash, &bsh, a, b) + hess_pair(&bsh, &bsh, a, a));

    let f_aa = force(cj, alpha, alpha)?;
    let f_bb = force(cj, beta, beta)?;
    let f_ab = force(cj, alpha, beta)?;
    let d_aa = stress(cj, alpha, alpha)?;
    let d_bb = stress(cj, beta, beta)?;
    let d_ab = stress(cj, alpha, beta)?;
    let d_ba = stress(cj, beta, alpha)?;
    let pair = |f: &Coform, v: &DVector<f64>| f.0.iter().zip(v.iter()).map(|(x, y)| x * y).sum::<f64>();

    let r12 = pair(&f_aa, &d_bb) + pair(&f_bb, &d_aa) - pair(&f_ab, &(&d_ab + &d_ba));
    let r2 = cj.co_inner(&f_ab.0, &f_ab.0) - cj.co_inner(&f_aa.0, &f_bb.0);
    let br = &d_ab - &d_ba;
    let r3 = -0.75 * cj.inner(br.as_slice(), br.as_slice());

    let (den, scale) = coform_gram(cj, alpha, beta);
    Ok(CurvatureBreakdown::from_terms(r11, r12, r2, r3, den, scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart_oracle::{sectional_curvature, sectional_numerator_oracle};
    use crate::metric_dsl::catalog;
    use crate::metric_dsl::random::{random_cometric, random_point};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e(d: usize, i: usize) -> Coform {
        Coform::basis(d, i)
    }

    #[test]
    fn euclidean_terms_vanish() {
        let cj = catalog::euclidean(3).unwrap().jet(&[0.1, 0.2, 0.3]).unwrap();
        let (a, b) = (Coform(vec![1.0, 2.0, 0.0]), Coform(vec![0.0, -1.0, 3.0]));
        for br in [mario_coordinate(&cj, &a, &b).unwrap(), mario_force_stress(&cj, &a, &b).unwrap()] {
            assert_eq!((br.r11, br.r12, br.r2, br.r3, br.total), (0.0, 0.0, 0.0, 0.0, 0.0));
            assert_eq!(br.sectional, Some(0.0));
        }
        assert_eq!(mario_covariant(&cj, &a, &b).unwrap(), 0.0);
        assert!(force(&cj, &a, &b).unwrap().0.iter().all(|v| *v == 0.0));
        assert!(stress(&cj, &a, &b).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sphere_origin_is_one() {
        let cj = catalog::sphere_stereographic(2).unwrap().jet(&[0.0, 0.0]).unwrap();
        let br = mario_coordinate(&cj, &e(2, 0), &e(2, 1)).unwrap();
        assert!((br.sectional.unwrap() - 1.0).abs() < 1e-13);
        assert!((br.total - 1.0 / 16.0).abs() < 1e-15);
        let fs = mario_force_stress(&cj, &e(2, 0), &e(2, 1)).unwrap();
        assert!((fs.total - br.total).abs() < 1e-9 * (1.0 + br.total.abs()));
    }

    #[test]
    fn half_plane_covariant_is_minus_one() {
        let cj = catalog::hyperbolic_half_plane().unwrap().jet(&[0.0, 1.0]).unwrap();
        let (a, b) = (e(2, 0), e(2, 1));
        let n = mario_covariant(&cj, &a, &b).unwrap();
        let (den, _) = coform_gram(&cj, &a, &b);
        assert!((n / den + 1.0).abs() < 1e-13);
    }

    #[test]
    fn equal_coforms_give_exact_zero() {
        let cj = catalog::sphere_stereographic(2).unwrap().jet(&[0.4, -0.1]).unwrap();
        let a = Coform(vec![0.3, 0.7]);
        let br = mario_coordinate(&cj, &a, &a).unwrap();
        assert_eq!(br.total, 0.0);
        assert_eq!(br.sectional, None);
        assert!(br.curvature().is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let cj = catalog::euclidean(2).unwrap().jet(&[0.0, 0.0]).unwrap();
        assert!(matches!(
            mario_coordinate(&cj, &Coform(vec![1.0]), &e(2, 1)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn bracket_identity_and_force_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let def = random_cometric(&mut rng, 3, 4).unwrap();
        let x = random_point(&mut rng, 3, 1.0);
        let cj = def.jet(&x).unwrap();
        let a = Coform(random_point(&mut rng, 3, 1.0));
        let b = Coform(random_point(&mut rng, 3, 1.0));
        assert_eq!(force(&cj, &a, &b).unwrap(), force(&cj, &b, &a).unwrap());
        let lhs = stress(&cj, &a, &b).unwrap() - stress(&cj, &b, &a).unwrap();
        for t in 0..3 {
            let mut rhs = 0.0;
            for i in 0..3 {
                for k in 0..3 {
                    for s in 0..3 {
                        rhs += (a.0[i] * b.0[k] - a.0[k] * b.0[i]) * cj.ginv[(i, s)] * cj.dginv[s][(k, t)];
                    }
                }
            }
            assert!((lhs[t] - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn stress_matches_directional_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let def = random_cometric(&mut rng, 3, 4).unwrap();
        let x = random_point(&mut rng, 3, 1.0);
        let cj = def.jet(&x).unwrap();
        let a = Coform(random_point(&mut rng, 3, 1.0));
        let b = Coform(random_point(&mut rng, 3, 1.0));
        let dir = cj.sharp(&a.0);
        let h = 1e-5;
        let shifted = |sign: f64| {
            let y: Vec<f64> = x.iter().zip(dir.iter()).map(|(p, v)| p + sign * h * v).collect();
            def.jet(&y).unwrap().sharp(&b.0)
        };
        let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * h);
        let st = stress(&cj, &a, &b).unwrap();
        assert!((fd - &st).amax() < 1e-6 * (1.0 + st.amax()));
    }

    #[test]
    fn three_paths_and_oracle_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for d in 2..=4 {
            for _ in 0..5 {
                let def = random_cometric(&mut rng, d, 4).unwrap();
                let x = random_point(&mut rng, d, 1.0);
                let cj = def.jet(&x).unwrap();
                let a = Coform(random_point(&mut rng, d, 1.0));
                let b = Coform(random_point(&mut rng, d, 1.0));
                let coord = mario_coordinate(&cj, &a, &b).unwrap();
                let cov = mario_covariant(&cj, &a, &b).unwrap();
                let fs = mario_force_stress(&cj, &a, &b).unwrap();
                let tol = 1e-9 * (1.0 + coord.total.abs());
                assert!((coord.total - cov).abs() < tol);
                assert!((coord.total - fs.total).abs() < tol);
                assert!((coord.r11 - fs.r11).abs() < tol);
                assert!((coord.r12 - fs.r12).abs() < tol);
                assert!((coord.r2 - fs.r2).abs() < tol);
                assert!((coord.r3 - fs.r3).abs() < tol);
                assert!(fs.r3 <= 0.0);
                let u = cj.sharp(&a.0);
                let v = cj.sharp(&b.0);
                let oracle = sectional_numerator_oracle(&cj, u.as_slice(), v.as_slice()).unwrap();
                assert!((oracle - coord.total).abs() < 1e-7 * (1.0 + oracle.abs()));
                let k = sectional_curvature(oracle, u.as_slice(), v.as_slice(), &cj.gcov).unwrap();
                assert!((k - coord.sectional.unwrap()).abs() < 1e-7 * (1.0 + k.abs()));
            }
        }
    }
}
