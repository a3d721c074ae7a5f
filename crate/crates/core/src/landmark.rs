//! Landmark space: `p` labelled points in `R^D` with the kernel cometric
//! `g^{(a,i)(b,j)} = K(q_a − q_b) δ^{ij}`.
//!
//! Chart coordinates and covectors are flattened landmark-major, index
//! `a * D + i`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chart_oracle::CometricJet;
use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelSpec, RadialJet};
use crate::linalg::solve_spd;
use crate::mario_curvature::CurvatureBreakdown;

/// Relative distance below which two landmarks count as coincident.
pub const DISTINCT_TOLERANCE: f64 = 1e-10;

/// Positions and momenta of `p` landmarks in `R^D`.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkState {
    pub ambient: usize,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

/// JSON form: `{"D":2,"q":[[0,0],[1,0]],"p":[[0,1],[0,-1]]}` with an optional
/// second covector field `beta` used for curvature.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LandmarkFile {
    #[serde(rename = "D")]
    pub ambient: usize,
    pub q: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<Vec<f64>>>,
}

fn flatten(ambient: usize, rows: &[Vec<f64>], what: &str) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(rows.len() * ambient);
    for row in rows {
        if row.len() != ambient {
            return Err(Error::Config(format!(
                "{what} entry has {} components, expected D = {ambient}",
                row.len()
            )));
        }
        out.extend_from_slice(row);
    }
    Ok(out)
}

fn unflatten(ambient: usize, flat: &[f64]) -> Vec<Vec<f64>> {
    flat.chunks(ambient).map(<[f64]>::to_vec).collect()
}

impl LandmarkFile {
    pub fn state(&self) -> Result<LandmarkState> {
        if self.q.len() != self.p.len() {
            return Err(Error::DimensionMismatch {
                expected: self.q.len(),
                got: self.p.len(),
            });
        }
        LandmarkState::new(
            self.ambient,
            flatten(self.ambient, &self.q, "q")?,
            flatten(self.ambient, &self.p, "p")?,
        )
    }

    pub fn beta_flat(&self) -> Result<Option<Vec<f64>>> {
        match &self.beta {
            None => Ok(None),
            Some(b) => {
                if b.len() != self.q.len() {
                    return Err(Error::DimensionMismatch {
                        expected: self.q.len(),
                        got: b.len(),
                    });
                }
                flatten(self.ambient, b, "beta").map(Some)
            }
        }
    }

    pub fn from_state(state: &LandmarkState, beta: Option<&[f64]>) -> Self {
        LandmarkFile {
            ambient: state.ambient,
            q: unflatten(state.ambient, &state.q),
            p: unflatten(state.ambient, &state.p),
            beta: beta.map(|b| unflatten(state.ambient, b)),
        }
    }
}

/// Reject coincident landmarks, relative to the configuration diameter.
pub fn check_distinct(ambient: usize, q: &[f64]) -> Result<()> {
    let count = q.len() / ambient;
    let pt = |a: usize| &q[a * ambient..(a + 1) * ambient];
    let mut diameter: f64 = 0.0;
    let mut closest = f64::INFINITY;
    let mut pair = (0, 0);
    for a in 0..count {
        for b in (a + 1)..count {
            let dist = dist(pt(a), pt(b));
            diameter = diameter.max(dist);
            if dist < closest {
                closest = dist;
                pair = (a, b);
            }
        }
    }
    if count > 1 && !(closest > DISTINCT_TOLERANCE * diameter && closest > 0.0) {
        return Err(Error::DegenerateConfiguration(format!(
            "landmarks {} and {} coincide (distance {closest:e}, diameter {diameter:e})",
            pair.0, pair.1
        )));
    }
    Ok(())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl LandmarkState {
    pub fn new(ambient: usize, q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if ambient == 0 {
            return Err(Error::Config("ambient dimension must be positive".into()));
        }
        if !q.len().is_multiple_of(ambient) || q.is_empty() {
            return Err(Error::Config(format!(
                "position vector of length {} is not a positive multiple of D = {ambient}",
                q.len()
            )));
        }
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                got: p.len(),
            });
        }
        if q.iter().chain(&p).any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite landmark data".into()));
        }
        check_distinct(ambient, &q)?;
        Ok(LandmarkState { ambient, q, p })
    }

    pub fn count(&self) -> usize {
        self.q.len() / self.ambient
    }

    pub fn point(&self, a: usize) -> &[f64] {
        &self.q[a * self.ambient..(a + 1) * self.ambient]
    }

    pub fn momentum(&self, a: usize) -> &[f64] {
        &self.p[a * self.ambient..(a + 1) * self.ambient]
    }
}

/// Kernel cometric on `p` landmarks in `R^D`.
#[derive(Debug, Clone)]
pub struct LandmarkMetric {
    kernel: Kernel,
    count: usize,
    ambient: usize,
}

/// Pairwise kernel data for one configuration.
struct Pairs {
    d: usize,
    n: usize,
    /// `diff[(a*n+b)*d..]` = `q_a − q_b`.
    diff: Vec<f64>,
    r2: Vec<f64>,
    jet: Vec<RadialJet>,
}

impl Pairs {
    fn r(&self, a: usize, b: usize) -> &[f64] {
        let k = a * self.n + b;
        &self.diff[k * self.d..(k + 1) * self.d]
    }

    fn k(&self, a: usize, b: usize) -> f64 {
        self.jet[a * self.n + b].value
    }

    fn grad(&self, a: usize, b: usize) -> impl Iterator<Item = f64> + '_ {
        let g1 = self.jet[a * self.n + b].g1;
        self.r(a, b).iter().map(move |x| g1 * x)
    }

    fn hess_form(&self, a: usize, b: usize, x: &[f64], y: &[f64]) -> f64 {
        let k = a * self.n + b;
        self.jet[k].hessian_form(self.r(a, b), self.r2[k], x, y)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LandmarkMetric {
    pub fn new(kernel: KernelSpec, count: usize, ambient: usize) -> Result<Self> {
        if kernel.n != ambient {
            return Err(Error::DimensionMismatch {
                expected: ambient,
                got: kernel.n,
            });
        }
        if count == 0 {
            return Err(Error::Config("need at least one landmark".into()));
        }
        Ok(LandmarkMetric {
            kernel: Kernel::new(&kernel)?,
            count,
            ambient,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn chart_dim(&self) -> usize {
        self.count * self.ambient
    }

    fn check_q(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.chart_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.chart_dim(),
                got: q.len(),
            });
        }
        check_distinct(self.ambient, q)
    }

    fn check_state(&self, state: &LandmarkState) -> Result<()> {
        if state.ambient != self.ambient || state.count() != self.count {
            return Err(Error::DimensionMismatch {
                expected: self.chart_dim(),
                got: state.q.len(),
            });
        }
        Ok(())
    }

    fn pairs(&self, q: &[f64]) -> Pairs {
        let (n, d) = (self.count, self.ambient);
        let mut diff = vec![0.0; n * n * d];
        let mut r2 = vec![0.0; n * n];
        let mut jet = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let k = a * n + b;
                let mut s = 0.0;
                for i in 0..d {
                    let v = q[a * d + i] - q[b * d + i];
                    diff[k * d + i] = v;
                    s += v * v;
                }
                r2[k] = s;
                jet.push(self.kernel.radial(s));
            }
        }
        Pairs { d, n, diff, r2, jet }
    }

    /// `p x p` kernel Gram matrix `K(q_a − q_b)`.
    pub fn gram(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        self.check_q(q)?;
        let pr = self.pairs(q);
        Ok(DMatrix::from_fn(self.count, self.count, |a, b| pr.k(a, b)))
    }

    /// Full cometric jet of dimension `pD`.
    pub fn cometric_jet(&self, q: &[f64]) -> Result<CometricJet> {
        self.check_q(q)?;
        self.kernel.spec().require_curvature_grade()?;
        let (n, d) = (self.count, self.ambient);
        let dim = n * d;
        let pr = self.pairs(q);
        let mut ginv = DMatrix::zeros(dim, dim);
        let mut dginv = vec![DMatrix::zeros(dim, dim); dim];
        let mut ddginv = vec![DMatrix::zeros(dim, dim); dim * dim];
        for a in 0..n {
            for b in 0..n {
                let kab = pr.k(a, b);
                let grad: Vec<f64> = pr.grad(a, b).collect();
                let k = a * n + b;
                let r = pr.r(a, b);
                for i in 0..d {
                    ginv[(a * d + i, b * d + i)] = kab;
                }
                if a == b {
                    continue;
                }
                // only c ∈ {a, b} contribute, with sign δ_ca − δ_cb
                for (c, sc) in [(a, 1.0), (b, -1.0)] {
                    for m in 0..d {
                        let s = c * d + m;
                        for i in 0..d {
                            dginv[s][(a * d + i, b * d + i)] = sc * grad[m];
                        }
                        for (e, se) in [(a, 1.0), (b, -1.0)] {
                            for nn in 0..d {
                                let t = e * d + nn;
                                let h = pr.jet[k].hessian_entry(r, pr.r2[k], m, nn);
                                for i in 0..d {
                                    ddginv[s * dim + t][(a * d + i, b * d + i)] = sc * se * h;
                                }
                            }
                        }
                    }
                }
            }
        }
        CometricJet::new(ginv, dginv, ddginv)
    }

    /// `u_c = Σ_d K(q_c − q_d) α_d`, the velocity field sampled at the landmarks.
    pub fn sharp(&self, q: &[f64], alpha: &[f64]) -> Result<Vec<f64>> {
        self.check_q(q)?;
        self.check_covector(alpha)?;
        Ok(self.sharp_with(&self.pairs(q), alpha))
    }

    fn sharp_with(&self, pr: &Pairs, alpha: &[f64]) -> Vec<f64> {
        let (n, d) = (self.count, self.ambient);
        let mut out = vec![0.0; n * d];
        for c in 0..n {
            for b in 0..n {
                let k = pr.k(c, b);
                for i in 0..d {
                    out[c * d + i] += k * alpha[b * d + i];
                }
            }
        }
        out
    }

    fn check_covector(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.chart_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.chart_dim(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `H = ½ Σ_{a,b} (p_a·p_b) K(q_a − q_b)`.
    pub fn hamiltonian(&self, state: &LandmarkState) -> Result<f64> {
        self.check_state(state)?;
        let pr = self.pairs(&state.q);
        let u = self.sharp_with(&pr, &state.p);
        Ok(0.5 * dot(&u, &state.p))
    }

    /// Hamilton's equations: `q̇_a = Σ_b K(q_a − q_b) p_b` and
    /// `ṗ_a = −Σ_b (p_a·p_b) ∇K(q_a − q_b)`.
    pub fn geodesic_rhs(&self, q: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if q.len() != self.chart_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.chart_dim(),
                got: q.len(),
            });
        }
        self.check_covector(p)?;
        let (n, d) = (self.count, self.ambient);
        let pr = self.pairs(q);
        let qdot = self.sharp_with(&pr, p);
        let mut pdot = vec![0.0; n * d];
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let w = dot(&p[a * d..(a + 1) * d], &p[b * d..(b + 1) * d]);
                for (i, g) in pr.grad(a, b).enumerate() {
                    pdot[a * d + i] -= w * g;
                }
            }
        }
        Ok((qdot, pdot))
    }

    /// Chart force `F(α,β)_c = ½ Σ_b (α_c·β_b + β_c·α_b) ∇K(q_c − q_b)`.
    pub fn force(&self, q: &[f64], alpha: &[f64], beta: &[f64]) -> Result<Vec<f64>> {
        self.check_q(q)?;
        self.check_covector(alpha)?;
        self.check_covector(beta)?;
        Ok(self.force_with(&self.pairs(q), alpha, beta))
    }

    fn force_with(&self, pr: &Pairs, alpha: &[f64], beta: &[f64]) -> Vec<f64> {
        let (n, d) = (self.count, self.ambient);
        let mut out = vec![0.0; n * d];
        for c in 0..n {
            for b in 0..n {
                if b == c {
                    continue;
                }
                let w = 0.5
                    * (dot(&alpha[c * d..(c + 1) * d], &beta[b * d..(b + 1) * d])
                        + dot(&beta[c * d..(c + 1) * d], &alpha[b * d..(b + 1) * d]));
                for (i, g) in pr.grad(c, b).enumerate() {
                    out[c * d + i] += w * g;
                }
            }
        }
        out
    }

    /// Chart stress `D(α,β)_c = Σ_b [(u_c − u_b)·∇K(q_c − q_b)] β_b` with
    /// `u = α♯`. This is the derivative of `β♯` along `α♯`; the stress box
    /// written for general submanifolds carries the opposite sign.
    pub fn stress(&self, q: &[f64], alpha: &[f64], beta: &[f64]) -> Result<Vec<f64>> {
        self.check_q(q)?;
        self.check_covector(alpha)?;
        self.check_covector(beta)?;
        let pr = self.pairs(q);
        let u = self.sharp_with(&pr, alpha);
        Ok(self.stress_with(&pr, &u, beta))
    }

    fn stress_with(&self, pr: &Pairs, u: &[f64], beta: &[f64]) -> Vec<f64> {
        let (n, d) = (self.count, self.ambient);
        let mut out = vec![0.0; n * d];
        let mut du = vec![0.0; d];
        for c in 0..n {
            for b in 0..n {
                if b == c {
                    continue;
                }
                for i in 0..d {
                    du[i] = u[c * d + i] - u[b * d + i];
                }
                let w: f64 = pr.grad(c, b).zip(&du).map(|(g, x)| g * x).sum();
                for i in 0..d {
                    out[c * d + i] += w * beta[b * d + i];
                }
            }
        }
        out
    }

    /// Curvature numerator of the plane spanned by the covector fields
    /// `α, β`, using only kernel values, gradients and Hessians.
    pub fn curvature(&self, q: &[f64], alpha: &[f64], beta: &[f64]) -> Result<CurvatureBreakdown> {
        self.check_q(q)?;
        self.check_covector(alpha)?;
        self.check_covector(beta)?;
        self.kernel.spec().require_curvature_grade()?;
        let (n, d) = (self.count, self.ambient);
        let pr = self.pairs(q);
        let ua = self.sharp_with(&pr, alpha);
        let ub = self.sharp_with(&pr, beta);
        let blk = |v: &[f64], a: usize| v[a * d..(a + 1) * d].to_vec();

        // X^s Y^t ∂_st Σ_{a,b} (γ_a·δ_b) K(q_a − q_b) for constant X, Y
        let hess_pair = |x: &[f64], y: &[f64], gam: &[f64], del: &[f64]| {
            let mut acc = 0.0;
            for a in 0..n {
                for b in 0..n {
                    if a == b {
                        continue;
                    }
                    let xd: Vec<f64> = (0..d).map(|i| x[a * d + i] - x[b * d + i]).collect();
                    let yd: Vec<f64> = (0..d).map(|i| y[a * d + i] - y[b * d + i]).collect();
                    acc += dot(&blk(gam, a), &blk(del, b)) * pr.hess_form(a, b, &xd, &yd);
                }
            }
            acc
        };
        let r11 = 0.5
            * (hess_pair(&ua, &ua, beta, beta) - 2.0 * hess_pair(&ua, &ub, alpha, beta)
                + hess_pair(&ub, &ub, alpha, alpha));

        let f_aa = self.force_with(&pr, alpha, alpha);
        let f_bb = self.force_with(&pr, beta, beta);
        let f_ab = self.force_with(&pr, alpha, beta);
        let d_aa = self.stress_with(&pr, &ua, alpha);
        let d_bb = self.stress_with(&pr, &ub, beta);
        let d_ab = self.stress_with(&pr, &ua, beta);
        let d_ba = self.stress_with(&pr, &ub, alpha);
        let sym: Vec<f64> = d_ab.iter().zip(&d_ba).map(|(x, y)| x + y).collect();
        let r12 = dot(&f_aa, &d_bb) + dot(&f_bb, &d_aa) - dot(&f_ab, &sym);

        // cometric pairing Σ_{c,e} K(q_c − q_e) F_c·G_e
        let co = |f: &[f64], g: &[f64]| dot(f, &self.sharp_with(&pr, g));
        let r2 = co(&f_ab, &f_ab) - co(&f_aa, &f_bb);

        // metric norm of the bracket: Σ_i V_iᵀ K⁻¹ V_i per ambient component
        let gram = DMatrix::from_fn(n, n, |a, b| pr.k(a, b));
        let mut norm = 0.0;
        for i in 0..d {
            let v = DVector::from_fn(n, |a, _| d_ab[a * d + i] - d_ba[a * d + i]);
            if v.iter().all(|x| *x == 0.0) {
                continue;
            }
            let w = solve_spd(&gram, &v)?;
            norm += v.dot(&w);
        }
        let r3 = -0.75 * norm;

        let aa = co(alpha, alpha);
        let bb = co(beta, beta);
        let ab = co(alpha, beta);
        Ok(CurvatureBreakdown::from_terms(
            r11,
            r12,
            r2,
            r3,
            aa * bb - ab * ab,
            aa * bb,
        ))
    }
}

/// Convenience wrapper: `LandmarkMetric::cometric_jet`.
pub fn landmark_cometric_jet(metric: &LandmarkMetric, q: &[f64]) -> Result<CometricJet> {
    metric.cometric_jet(q)
}

pub fn hamiltonian(metric: &LandmarkMetric, state: &LandmarkState) -> Result<f64> {
    metric.hamiltonian(state)
}

/// Time derivative `(q̇, ṗ)` of a landmark state.
pub fn geodesic_rhs(metric: &LandmarkMetric, state: &LandmarkState) -> Result<(Vec<f64>, Vec<f64>)> {
    metric.check_state(state)?;
    metric.geodesic_rhs(&state.q, &state.p)
}

pub fn landmark_curvature(
    metric: &LandmarkMetric,
    q: &[f64],
    alpha: &[f64],
    beta: &[f64],
) -> Result<CurvatureBreakdown> {
    metric.curvature(q, alpha, beta)
}

/// Default second covector for a landmark file without `beta`: each
/// momentum rotated by a quarter turn in its first two components.
pub fn default_beta(ambient: usize, p: &[f64]) -> Result<Vec<f64>> {
    if ambient < 2 {
        return Err(Error::Config(
            "a second covector field `beta` is required when D = 1".into(),
        ));
    }
    let mut out = p.to_vec();
    for chunk in out.chunks_mut(ambient) {
        let (x, y) = (chunk[0], chunk[1]);
        chunk[0] = -y;
        chunk[1] = x;
    }
    Ok(out)
}
