//! Reference curvature from Christoffel symbols and the coordinate Riemann
//! tensor, with `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::spd_inverse;

/// Relative Gram determinant below which a plane is treated as degenerate.
pub const PLANE_TOLERANCE: f64 = 1e-12;

/// Cometric `g^{ij}` at a point with its first and second partials and the
/// metric `g_ij` obtained by one inversion.
#[derive(Debug, Clone)]
pub struct CometricJet {
    pub dim: usize,
    pub ginv: DMatrix<f64>,
    /// `dginv[s] = ∂_s g^{ij}`.
    pub dginv: Vec<DMatrix<f64>>,
    /// `ddginv[s * dim + t] = ∂_s ∂_t g^{ij}`.
    pub ddginv: Vec<DMatrix<f64>>,
    pub gcov: DMatrix<f64>,
    /// 2-norm condition number of `ginv`.
    pub condition: f64,
}

impl CometricJet {
    /// Assemble a jet and invert the cometric. Inputs are assumed symmetric.
    pub fn new(
        ginv: DMatrix<f64>,
        dginv: Vec<DMatrix<f64>>,
        ddginv: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let dim = ginv.nrows();
        if ginv.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: ginv.ncols(),
            });
        }
        if dginv.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: dginv.len(),
            });
        }
        if ddginv.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: ddginv.len(),
            });
        }
        let (mut gcov, condition) = spd_inverse(&ginv)?;
        symmetrize(&mut gcov);
        Ok(CometricJet {
            dim,
            ginv,
            dginv,
            ddginv,
            gcov,
            condition,
        })
    }

    pub fn dd(&self, s: usize, t: usize) -> &DMatrix<f64> {
        &self.ddginv[s * self.dim + t]
    }

    /// `α♯ = g^{ij} α_i ∂_j`.
    pub fn sharp(&self, alpha: &[f64]) -> DVector<f64> {
        let d = self.dim;
        let mut out = DVector::zeros(d);
        for j in 0..d {
            let mut acc = 0.0;
            for i in 0..d {
                acc += self.ginv[(i, j)] * alpha[i];
            }
            out[j] = acc;
        }
        out
    }

    /// `g_ij u^j`.
    pub fn flat(&self, u: &[f64]) -> DVector<f64> {
        let d = self.dim;
        let mut out = DVector::zeros(d);
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.gcov[(i, j)] * u[j];
            }
            out[i] = acc;
        }
        out
    }

    /// `g^{ij} α_i β_j`.
    pub fn co_inner(&self, alpha: &[f64], beta: &[f64]) -> f64 {
        bilinear(&self.ginv, alpha, beta)
    }

    /// `g_ij u^i v^j`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        bilinear(&self.gcov, u, v)
    }
}

pub(crate) fn bilinear(m: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        let mut row = 0.0;
        for j in 0..m.ncols() {
            row += m[(i, j)] * b[j];
        }
        acc += a[i] * row;
    }
    acc
}

/// `a^T m b` for symmetric `m`, evaluated so that swapping `a` and `b`
/// gives a bitwise identical result.
pub(crate) fn sym_bilinear(m: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        acc += m[(i, i)] * (a[i] * b[i]);
        for j in (i + 1)..m.ncols() {
            acc += m[(i, j)] * (a[i] * b[j] + a[j] * b[i]);
        }
    }
    acc
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Metric `g_ij` with first and second partials, from a [`CometricJet`].
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub dim: usize,
    pub g: DMatrix<f64>,
    pub ginv: DMatrix<f64>,
    pub dginv: Vec<DMatrix<f64>>,
    /// `dg[s] = ∂_s g_ij`.
    pub dg: Vec<DMatrix<f64>>,
    /// `ddg[s * dim + t] = ∂_s ∂_t g_ij`.
    pub ddg: Vec<DMatrix<f64>>,
}

impl MetricJet {
    /// `∂g = −g ∂(g⁻¹) g` and
    /// `∂_s∂_t g = −∂_t g ∂_s(g⁻¹) g − g ∂_s∂_t(g⁻¹) g − g ∂_s(g⁻¹) ∂_t g`.
    pub fn from_cometric(cj: &CometricJet) -> Self {
        let d = cj.dim;
        let g = &cj.gcov;
        let dg: Vec<DMatrix<f64>> = cj
            .dginv
            .iter()
            .map(|h| {
                let mut m = -(g * h * g);
                symmetrize(&mut m);
                m
            })
            .collect();
        let mut ddg = vec![DMatrix::zeros(d, d); d * d];
        for s in 0..d {
            for t in s..d {
                let hs = &cj.dginv[s];
                let mut m = -(&dg[t] * hs * g) - g * cj.dd(s, t) * g - g * hs * &dg[t];
                symmetrize(&mut m);
                ddg[s * d + t] = m.clone();
                ddg[t * d + s] = m;
            }
        }
        MetricJet {
            dim: d,
            g: g.clone(),
            ginv: cj.ginv.clone(),
            dginv: cj.dginv.clone(),
            dg,
            ddg,
        }
    }
}

/// Connection coefficients `Γ^k_ij`, stored `[k][i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Christoffel {
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }
}

/// `Γ^k_ij = ½ g^{kl} (∂_i g_jl + ∂_j g_il − ∂_l g_ij)`.
pub fn christoffel(mj: &MetricJet) -> Christoffel {
    let d = mj.dim;
    let mut data = vec![0.0; d * d * d];
    for k in 0..d {
        for i in 0..d {
            for j in i..d {
                let mut acc = 0.0;
                for l in 0..d {
                    let koszul = mj.dg[i][(j, l)] + mj.dg[j][(i, l)] - mj.dg[l][(i, j)];
                    acc += mj.ginv[(k, l)] * koszul;
                }
                data[(k * d + i) * d + j] = 0.5 * acc;
                data[(k * d + j) * d + i] = 0.5 * acc;
            }
        }
    }
    Christoffel { dim: d, data }
}

/// `∂_s Γ^k_ij` from exact second metric derivatives, stored `[s][k][i][j]`.
pub fn christoffel_derivative(mj: &MetricJet) -> Vec<f64> {
    let d = mj.dim;
    let mut out = vec![0.0; d * d * d * d];
    for s in 0..d {
        for k in 0..d {
            for i in 0..d {
                for j in i..d {
                    let mut acc = 0.0;
                    for l in 0..d {
                        let koszul = mj.dg[i][(j, l)] + mj.dg[j][(i, l)] - mj.dg[l][(i, j)];
                        let dkoszul = mj.ddg[s * d + i][(j, l)] + mj.ddg[s * d + j][(i, l)]
                            - mj.ddg[s * d + l][(i, j)];
                        acc += mj.dginv[s][(k, l)] * koszul + mj.ginv[(k, l)] * dkoszul;
                    }
                    out[((s * d + k) * d + i) * d + j] = 0.5 * acc;
                    out[((s * d + k) * d + j) * d + i] = 0.5 * acc;
                }
            }
        }
    }
    out
}

/// `∂_s Γ^k_ij` by central differences of [`christoffel`], step
/// `eps^{1/3} (1 + |x|)`.
pub fn christoffel_derivative_fd<F>(jet_at: F, x: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<CometricJet>,
{
    let d = x.len();
    let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = f64::EPSILON.cbrt() * (1.0 + xnorm);
    let mut out = vec![0.0; d * d * d * d];
    let mut xp = x.to_vec();
    for s in 0..d {
        xp[s] = x[s] + h;
        let plus = christoffel(&MetricJet::from_cometric(&jet_at(&xp)?));
        xp[s] = x[s] - h;
        let minus = christoffel(&MetricJet::from_cometric(&jet_at(&xp)?));
        xp[s] = x[s];
        let block = &mut out[s * d * d * d..(s + 1) * d * d * d];
        for (o, (p, m)) in block.iter_mut().zip(plus.data.iter().zip(&minus.data)) {
            *o = (p - m) / (2.0 * h);
        }
    }
    Ok(out)
}

/// Riemann components `R^l_ijk` with `R(∂_i,∂_j)∂_k = R^l_ijk ∂_l`, stored
/// `[l][i][j][k]`.
pub fn riemann(gamma: &Christoffel, dgamma: &[f64]) -> Vec<f64> {
    let d = gamma.dim;
    let dg = |s: usize, k: usize, i: usize, j: usize| dgamma[((s * d + k) * d + i) * d + j];
    let mut out = vec![0.0; d * d * d * d];
    for l in 0..d {
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let mut acc = dg(i, l, j, k) - dg(j, l, i, k);
                    for m in 0..d {
                        acc += gamma.get(l, i, m) * gamma.get(m, j, k)
                            - gamma.get(l, j, m) * gamma.get(m, i, k);
                    }
                    out[((l * d + i) * d + j) * d + k] = acc;
                }
            }
        }
    }
    out
}

/// `g(R(u,v)v,u)` contracted from Riemann components.
pub fn numerator_from_riemann(g: &DMatrix<f64>, riem: &[f64], u: &[f64], v: &[f64]) -> f64 {
    let d = g.nrows();
    let mut acc = 0.0;
    for l in 0..d {
        // (R(u,v)v)^l
        let mut rl = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    rl += u[i] * v[j] * v[k] * riem[((l * d + i) * d + j) * d + k];
                }
            }
        }
        for m in 0..d {
            acc += g[(l, m)] * rl * u[m];
        }
    }
    acc
}

/// Gram determinant `|u|²|v|² − g(u,v)²`, rejecting near-degenerate planes.
pub fn plane_gram(u: &[f64], v: &[f64], gcov: &DMatrix<f64>) -> Result<f64> {
    let uu = bilinear(gcov, u, u);
    let vv = bilinear(gcov, v, v);
    let uv = bilinear(gcov, u, v);
    let gram = uu * vv - uv * uv;
    if !(gram > PLANE_TOLERANCE * uu * vv) {
        return Err(Error::DegeneratePlane { gram });
    }
    Ok(gram)
}

fn check_vectors(d: usize, u: &[f64], v: &[f64]) -> Result<()> {
    for w in [u, v] {
        if w.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: w.len(),
            });
        }
    }
    Ok(())
}

/// Oracle numerator `g(R(u,v)v,u)` with `∂Γ` from the exact second
/// derivatives carried by the jet.
pub fn sectional_numerator_oracle(cj: &CometricJet, u: &[f64], v: &[f64]) -> Result<f64> {
    check_vectors(cj.dim, u, v)?;
    plane_gram(u, v, &cj.gcov)?;
    let mj = MetricJet::from_cometric(cj);
    let gamma = christoffel(&mj);
    let dgamma = christoffel_derivative(&mj);
    Ok(numerator_from_riemann(&mj.g, &riemann(&gamma, &dgamma), u, v))
}

/// Oracle numerator with `∂Γ` taken by central differences of the
/// Christoffel symbols, for cometrics without exact second derivatives.
pub fn sectional_numerator_oracle_fd<F>(jet_at: F, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<CometricJet>,
{
    let cj = jet_at(x)?;
    check_vectors(cj.dim, u, v)?;
    plane_gram(u, v, &cj.gcov)?;
    let mj = MetricJet::from_cometric(&cj);
    let gamma = christoffel(&mj);
    let dgamma = christoffel_derivative_fd(&jet_at, x)?;
    Ok(numerator_from_riemann(&mj.g, &riemann(&gamma, &dgamma), u, v))
}

/// `k = numerator / (|u|²|v|² − g(u,v)²)`.
pub fn sectional_curvature(numerator: f64, u: &[f64], v: &[f64], gcov: &DMatrix<f64>) -> Result<f64> {
    Ok(numerator / plane_gram(u, v, gcov)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_dsl::catalog;
    use crate::metric_dsl::random::{random_cometric, random_point};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sphere_k(x: &[f64], u: &[f64], v: &[f64]) -> f64 {
        let cj = catalog::sphere_stereographic(2).unwrap().jet(x).unwrap();
        let n = sectional_numerator_oracle(&cj, u, v).unwrap();
        sectional_curvature(n, u, v, &cj.gcov).unwrap()
    }

    #[test]
    fn euclidean_is_flat() {
        let cj = catalog::euclidean(3).unwrap().jet(&[1.0, 2.0, 3.0]).unwrap();
        let mj = MetricJet::from_cometric(&cj);
        assert!(christoffel(&mj).data.iter().all(|v| *v == 0.0));
        let n = sectional_numerator_oracle(&cj, &[1.0, 0.0, 2.0], &[0.0, 1.0, 1.0]).unwrap();
        assert_eq!(n, 0.0);
    }

    #[test]
    fn half_plane_christoffel_symbols() {
        let cj = catalog::hyperbolic_half_plane().unwrap().jet(&[0.0, 1.0]).unwrap();
        let gamma = christoffel(&MetricJet::from_cometric(&cj));
        // zero-based: Γ^1_12 -> (0,0,1)
        assert_abs_diff_eq!(gamma.get(0, 0, 1), -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(gamma.get(0, 1, 0), -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(gamma.get(1, 0, 0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(gamma.get(1, 1, 1), -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(gamma.get(0, 0, 0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(gamma.get(1, 0, 1), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn half_plane_is_minus_one() {
        let cj = catalog::hyperbolic_half_plane().unwrap().jet(&[0.0, 1.0]).unwrap();
        let (u, v) = ([1.0, 0.0], [0.0, 1.0]);
        let n = sectional_numerator_oracle(&cj, &u, &v).unwrap();
        assert_abs_diff_eq!(sectional_curvature(n, &u, &v, &cj.gcov).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn sphere_numerator_at_origin() {
        // sharps of dx1, dx2 at the origin are e1/4, e2/4
        let cj = catalog::sphere_stereographic(2).unwrap().jet(&[0.0, 0.0]).unwrap();
        let (u, v) = ([0.25, 0.0], [0.0, 0.25]);
        assert_abs_diff_eq!(sectional_numerator_oracle(&cj, &u, &v).unwrap(), 1.0 / 16.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sphere_k(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn sphere_is_one_away_from_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let x = random_point(&mut rng, 2, 2.0);
            let u = random_point(&mut rng, 2, 1.0);
            let v = random_point(&mut rng, 2, 1.0);
            assert_abs_diff_eq!(sphere_k(&x, &u, &v), 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn scaling_invariance() {
        let x = [0.3, -0.2];
        let (u, v) = ([1.0, 0.4], [0.2, -1.0]);
        let k1 = sphere_k(&x, &u, &v);
        let k2 = sphere_k(&x, &[2.0, 0.8], &v);
        assert!((k1 - k2).abs() < 1e-12);
    }

    #[test]
    fn parallel_vectors_are_rejected() {
        let cj = catalog::sphere_stereographic(2).unwrap().jet(&[0.1, 0.1]).unwrap();
        assert!(matches!(
            sectional_numerator_oracle(&cj, &[1.0, 2.0], &[2.0, 4.0]),
            Err(Error::DegeneratePlane { .. })
        ));
    }

    #[test]
    fn exact_and_fd_christoffel_derivatives_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for d in 2..=3 {
            let def = random_cometric(&mut rng, d, 4).unwrap();
            let x = random_point(&mut rng, d, 1.0);
            let exact = christoffel_derivative(&MetricJet::from_cometric(&def.jet(&x).unwrap()));
            let fd = christoffel_derivative_fd(|y| def.jet(y), &x).unwrap();
            let scale = exact.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            for (a, b) in exact.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-6 * scale, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn metric_jet_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let def = random_cometric(&mut rng, 3, 4).unwrap();
        let x = random_point(&mut rng, 3, 1.0);
        let mj = MetricJet::from_cometric(&def.jet(&x).unwrap());
        let h = 1e-5;
        for s in 0..3 {
            let mut xp = x.clone();
            xp[s] += h;
            let gp = MetricJet::from_cometric(&def.jet(&xp).unwrap());
            xp[s] -= 2.0 * h;
            let gm = MetricJet::from_cometric(&def.jet(&xp).unwrap());
            let fd = (&gp.g - &gm.g) / (2.0 * h);
            assert!((&fd - &mj.dg[s]).amax() < 1e-8);
            for t in 0..3 {
                let fd2 = (&gp.dg[t] - &gm.dg[t]) / (2.0 * h);
                assert!((&fd2 - &mj.ddg[s * 3 + t]).amax() < 1e-7);
            }
        }
    }
}
