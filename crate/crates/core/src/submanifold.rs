//! Discrete submanifolds of `R^n` sampled by quadrature, with normal
//! covector-density momenta. With `m = 0` and unit weights this is exactly
//! the landmark space.
//!
//! Samples, momenta and per-sample vectors are flattened sample-major,
//! index `s * n + i`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelSpec, RadialJet};
use crate::landmark::check_distinct;
use crate::linalg::{eigen_range, MAX_CONDITION};
use crate::mario_curvature::CurvatureBreakdown;

/// Sampled `m`-dimensional submanifold of `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSubmanifold {
    n: usize,
    m: usize,
    samples: Vec<f64>,
    weights: Vec<f64>,
    /// `m` orthonormal tangents per sample, `[(s * m + k) * n + i]`.
    tangents: Vec<f64>,
    /// Orthogonal projectors onto the normal space, `[(s * n + i) * n + j]`.
    projectors: Vec<f64>,
}

/// Shape file: `{"n":2,"m":1,"samples":[[..]],"weights":[..],
/// "tangents":[[[..]]],"momenta":[[..]]}` with optional `beta`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapeFile {
    pub n: usize,
    pub m: usize,
    pub samples: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub tangents: Vec<Vec<Vec<f64>>>,
    pub momenta: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<Vec<f64>>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn flatten(n: usize, rows: &[Vec<f64>], what: &str) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(rows.len() * n);
    for r in rows {
        if r.len() != n {
            return Err(Error::Config(format!(
                "{what} entry has {} components, expected n = {n}",
                r.len()
            )));
        }
        out.extend_from_slice(r);
    }
    Ok(out)
}

/// Gram-Schmidt on the given vectors; errors if they are not independent.
fn orthonormalize(n: usize, vecs: &mut [f64]) -> Result<()> {
    let k = vecs.len() / n;
    for a in 0..k {
        for b in 0..a {
            let (head, tail) = vecs.split_at_mut(a * n);
            let vb = &head[b * n..(b + 1) * n];
            let va = &mut tail[..n];
            let c = dot(va, vb);
            for i in 0..n {
                va[i] -= c * vb[i];
            }
        }
        let va = &mut vecs[a * n..(a + 1) * n];
        let len = dot(va, va).sqrt();
        if !(len > 1e-12) {
            return Err(Error::GeometryDegraded(
                "tangent frame is rank deficient".into(),
            ));
        }
        for v in va.iter_mut() {
            *v /= len;
        }
    }
    Ok(())
}

fn projectors_from(n: usize, m: usize, count: usize, tangents: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; count * n * n];
    for s in 0..count {
        for i in 0..n {
            for j in 0..n {
                let mut v = if i == j { 1.0 } else { 0.0 };
                for k in 0..m {
                    let t = &tangents[(s * m + k) * n..(s * m + k + 1) * n];
                    v -= t[i] * t[j];
                }
                p[(s * n + i) * n + j] = v;
            }
        }
    }
    p
}

/// Unit tangents of a closed polygon by central differences along the
/// sample ordering.
fn closed_curve_tangents(n: usize, samples: &[f64]) -> Result<Vec<f64>> {
    let count = samples.len() / n;
    if count < 3 {
        return Err(Error::GeometryDegraded(format!(
            "a closed curve needs at least 3 samples, got {count}"
        )));
    }
    let pt = |s: usize| &samples[s * n..(s + 1) * n];
    let mut out = vec![0.0; count * n];
    for s in 0..count {
        let prev = pt((s + count - 1) % count);
        let here = pt(s);
        let next = pt((s + 1) % count);
        let back: Vec<f64> = (0..n).map(|i| here[i] - prev[i]).collect();
        let fwd: Vec<f64> = (0..n).map(|i| next[i] - here[i]).collect();
        // a hairpin at sample scale means the curve folded onto itself
        if dot(&back, &fwd) <= 0.0 {
            return Err(Error::GeometryDegraded(format!(
                "curve folds back on itself at sample {s}"
            )));
        }
        // fourth-order stencil when the curve has enough samples
        let t: Vec<f64> = if count >= 5 {
            let prev2 = pt((s + count - 2) % count);
            let next2 = pt((s + 2) % count);
            (0..n)
                .map(|i| 8.0 * (next[i] - prev[i]) - (next2[i] - prev2[i]))
                .collect()
        } else {
            (0..n).map(|i| next[i] - prev[i]).collect()
        };
        let len = dot(&t, &t).sqrt();
        let scale = dot(&back, &back).sqrt().max(dot(&fwd, &fwd).sqrt());
        if !(len > 1e-12 * scale) || len == 0.0 {
            return Err(Error::GeometryDegraded(format!(
                "cannot derive a tangent at sample {s}"
            )));
        }
        for i in 0..n {
            out[s * n + i] = t[i] / len;
        }
    }
    Ok(out)
}

impl DiscreteSubmanifold {
    /// Generic constructor. `tangents` holds `m` vectors per sample (they are
    /// orthonormalized); it must be empty when `m = 0`.
    pub fn new(n: usize, m: usize, samples: Vec<f64>, weights: Vec<f64>, mut tangents: Vec<f64>) -> Result<Self> {
        if n == 0 || m >= n {
            return Err(Error::Config(format!(
                "need 0 <= m < n, got m = {m}, n = {n}"
            )));
        }
        if samples.is_empty() || !samples.len().is_multiple_of(n) {
            return Err(Error::Config("sample array length is not a positive multiple of n".into()));
        }
        let count = samples.len() / n;
        if weights.len() != count {
            return Err(Error::DimensionMismatch {
                expected: count,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Config("quadrature weights must be positive".into()));
        }
        if tangents.len() != count * m * n {
            return Err(Error::DimensionMismatch {
                expected: count * m * n,
                got: tangents.len(),
            });
        }
        if samples.iter().chain(&tangents).any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite sample data".into()));
        }
        check_distinct(n, &samples)?;
        for s in 0..count {
            orthonormalize(n, &mut tangents[s * m * n..(s + 1) * m * n])?;
        }
        let projectors = projectors_from(n, m, count, &tangents);
        Ok(DiscreteSubmanifold {
            n,
            m,
            samples,
            weights,
            tangents,
            projectors,
        })
    }

    /// Landmarks as a 0-dimensional submanifold with unit weights.
    pub fn points(n: usize, samples: Vec<f64>) -> Result<Self> {
        let count = samples.len() / n.max(1);
        Self::new(n, 0, samples, vec![1.0; count], Vec::new())
    }

    /// Closed curve with tangents from periodic central differences.
    pub fn closed_curve(n: usize, samples: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config("curves need n >= 2".into()));
        }
        let tangents = closed_curve_tangents(n, &samples)?;
        Self::new(n, 1, samples, weights, tangents)
    }

    /// Same weights and dimension at new sample positions, with frames
    /// re-derived from the samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        match self.m {
            0 => Self::new(self.n, 0, samples, self.weights.clone(), Vec::new()),
            1 => Self::closed_curve(self.n, samples, self.weights.clone()),
            m => Err(Error::Unsupported(format!(
                "frame re-derivation for m = {m} (only points and closed curves)"
            ))),
        }
    }

    pub fn from_file(file: &ShapeFile) -> Result<(Self, Vec<f64>, Option<Vec<f64>>)> {
        let (n, m) = (file.n, file.m);
        let samples = flatten(n, &file.samples, "samples")?;
        let count = file.samples.len();
        let shape = if m == 1 && file.tangents.is_empty() {
            Self::closed_curve(n, samples, file.weights.clone())?
        } else {
            let frames_given = !(m == 0 && file.tangents.is_empty());
            if frames_given && file.tangents.len() != count {
                return Err(Error::DimensionMismatch {
                    expected: count,
                    got: file.tangents.len(),
                });
            }
            let mut tangents = Vec::with_capacity(count * m * n);
            for frame in &file.tangents {
                if frame.len() != m {
                    return Err(Error::Config(format!(
                        "each tangent frame must hold m = {m} vectors"
                    )));
                }
                tangents.extend(flatten(n, frame, "tangents")?);
            }
            Self::new(n, m, samples, file.weights.clone(), tangents)?
        };
        if file.momenta.len() != count {
            return Err(Error::DimensionMismatch {
                expected: count,
                got: file.momenta.len(),
            });
        }
        let momenta = flatten(n, &file.momenta, "momenta")?;
        let beta = match &file.beta {
            None => None,
            Some(b) => {
                if b.len() != count {
                    return Err(Error::DimensionMismatch {
                        expected: count,
                        got: b.len(),
                    });
                }
                Some(flatten(n, b, "beta")?)
            }
        };
        Ok((shape, momenta, beta))
    }

    pub fn to_file(&self, momenta: &[f64], beta: Option<&[f64]>) -> ShapeFile {
        let rows = |v: &[f64]| v.chunks(self.n).map(<[f64]>::to_vec).collect::<Vec<_>>();
        ShapeFile {
            n: self.n,
            m: self.m,
            samples: rows(&self.samples),
            weights: self.weights.clone(),
            tangents: (0..self.count())
                .map(|s| rows(&self.tangents[s * self.m * self.n..(s + 1) * self.m * self.n]))
                .collect(),
            momenta: rows(momenta),
            beta: beta.map(rows),
        }
    }

    pub fn ambient(&self) -> usize {
        self.n
    }

    pub fn manifold_dim(&self) -> usize {
        self.m
    }

    pub fn count(&self) -> usize {
        self.weights.len()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sample(&self, s: usize) -> &[f64] {
        &self.samples[s * self.n..(s + 1) * self.n]
    }

    pub fn tangent(&self, s: usize, k: usize) -> &[f64] {
        let (m, n) = (self.m, self.n);
        &self.tangents[(s * m + k) * n..(s * m + k + 1) * n]
    }

    /// Normal projector at sample `s`, row-major `n x n`.
    pub fn projector(&self, s: usize) -> &[f64] {
        let n = self.n;
        &self.projectors[s * n * n..(s + 1) * n * n]
    }

    /// Apply the normal projectors samplewise.
    pub fn project_normal(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        if self.m == 0 {
            return v.to_vec();
        }
        let mut out = vec![0.0; v.len()];
        for s in 0..self.count() {
            let p = self.projector(s);
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += p[i * n + j] * v[s * n + j];
                }
                out[s * n + i] = acc;
            }
        }
        out
    }

    /// Orthonormal basis of each normal space, `n − m` vectors per sample.
    pub fn normal_basis(&self) -> Vec<f64> {
        let (n, k) = (self.n, self.n - self.m);
        let mut out = Vec::with_capacity(self.count() * k * n);
        for s in 0..self.count() {
            let p = self.projector(s);
            let mut basis: Vec<f64> = Vec::with_capacity(k * n);
            for e in 0..n {
                if basis.len() == k * n {
                    break;
                }
                let mut v: Vec<f64> = (0..n).map(|i| p[i * n + e]).collect();
                for b in basis.chunks(n) {
                    let c = dot(&v, b);
                    for i in 0..n {
                        v[i] -= c * b[i];
                    }
                }
                let len = dot(&v, &v).sqrt();
                if len > 1e-6 {
                    basis.extend(v.iter().map(|x| x / len));
                }
            }
            out.extend(basis);
        }
        out
    }

    /// Trapezoid sum of the weights.
    pub fn total_volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `max_s |a_s − P_s a_s| / |a_s|` over samples with nonzero momentum.
    pub fn normality_defect(&self, a: &[f64]) -> f64 {
        let n = self.n;
        let proj = self.project_normal(a);
        let mut worst: f64 = 0.0;
        for s in 0..self.count() {
            let v = &a[s * n..(s + 1) * n];
            let norm = dot(v, v).sqrt();
            if norm == 0.0 {
                continue;
            }
            let diff: f64 = (0..n).map(|i| (v[i] - proj[s * n + i]).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(diff / norm);
        }
        worst
    }
}

/// Per-sample normal covector densities `a_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMomentum {
    pub a: Vec<f64>,
}

/// Tolerance on the normality defect of initial momenta.
pub const INITIAL_NORMALITY: f64 = 1e-10;

impl NormalMomentum {
    /// Accepts momenta whose normality defect is at most [`INITIAL_NORMALITY`].
    pub fn new(shape: &DiscreteSubmanifold, a: Vec<f64>) -> Result<Self> {
        if a.len() != shape.samples.len() {
            return Err(Error::DimensionMismatch {
                expected: shape.samples.len(),
                got: a.len(),
            });
        }
        let defect = shape.normality_defect(&a);
        if defect > INITIAL_NORMALITY {
            return Err(Error::Config(format!(
                "momentum is not normal (defect {defect:e})"
            )));
        }
        Ok(NormalMomentum { a })
    }

    /// Project arbitrary covectors onto the normal bundle.
    pub fn projected(shape: &DiscreteSubmanifold, a: &[f64]) -> Result<Self> {
        if a.len() != shape.samples.len() {
            return Err(Error::DimensionMismatch {
                expected: shape.samples.len(),
                got: a.len(),
            });
        }
        Ok(NormalMomentum {
            a: shape.project_normal(a),
        })
    }

    pub fn zeros(shape: &DiscreteSubmanifold) -> Self {
        NormalMomentum {
            a: vec![0.0; shape.samples.len()],
        }
    }
}

/// Kernel metric on discrete submanifolds.
#[derive(Debug, Clone)]
pub struct SubmanifoldMetric {
    kernel: Kernel,
}

struct Pairs {
    n: usize,
    count: usize,
    diff: Vec<f64>,
    r2: Vec<f64>,
    jet: Vec<RadialJet>,
}

impl Pairs {
    fn new(kernel: &Kernel, x: &[f64], n: usize) -> Self {
        let count = x.len() / n;
        let mut diff = vec![0.0; count * count * n];
        let mut r2 = vec![0.0; count * count];
        let mut jet = Vec::with_capacity(count * count);
        for s in 0..count {
            for t in 0..count {
                let k = s * count + t;
                let mut acc = 0.0;
                for i in 0..n {
                    let v = x[s * n + i] - x[t * n + i];
                    diff[k * n + i] = v;
                    acc += v * v;
                }
                r2[k] = acc;
                jet.push(kernel.radial(acc));
            }
        }
        Pairs {
            n,
            count,
            diff,
            r2,
            jet,
        }
    }

    fn r(&self, s: usize, t: usize) -> &[f64] {
        let k = s * self.count + t;
        &self.diff[k * self.n..(k + 1) * self.n]
    }

    fn k(&self, s: usize, t: usize) -> f64 {
        self.jet[s * self.count + t].value
    }

    fn g1(&self, s: usize, t: usize) -> f64 {
        self.jet[s * self.count + t].g1
    }

    fn hess_form(&self, s: usize, t: usize, a: &[f64], b: &[f64]) -> f64 {
        let k = s * self.count + t;
        self.jet[k].hessian_form(self.r(s, t), self.r2[k], a, b)
    }
}

impl SubmanifoldMetric {
    pub fn new(kernel: &KernelSpec) -> Result<Self> {
        Ok(SubmanifoldMetric {
            kernel: Kernel::new(kernel)?,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    fn check(&self, shape: &DiscreteSubmanifold, vs: &[&[f64]]) -> Result<()> {
        if self.kernel.dim() != shape.n {
            return Err(Error::DimensionMismatch {
                expected: shape.n,
                got: self.kernel.dim(),
            });
        }
        for v in vs {
            if v.len() != shape.samples.len() {
                return Err(Error::DimensionMismatch {
                    expected: shape.samples.len(),
                    got: v.len(),
                });
            }
        }
        Ok(())
    }

    fn pairs(&self, shape: &DiscreteSubmanifold) -> Pairs {
        Pairs::new(&self.kernel, &shape.samples, shape.n)
    }

    /// Effective point momenta `w_s a_s`.
    fn weighted(shape: &DiscreteSubmanifold, a: &[f64]) -> Vec<f64> {
        let n = shape.n;
        a.iter()
            .enumerate()
            .map(|(k, v)| shape.weights[k / n] * v)
            .collect()
    }

    /// `u(x_s) = Σ_t K(x_s − x_t) w_t a_t`, summed in landmark order.
    fn velocity_at_samples(&self, pr: &Pairs, shape: &DiscreteSubmanifold, a: &[f64]) -> Vec<f64> {
        let (n, count) = (shape.n, shape.count());
        let pa = Self::weighted(shape, a);
        let mut out = vec![0.0; count * n];
        for s in 0..count {
            for t in 0..count {
                let k = pr.k(s, t);
                for i in 0..n {
                    out[s * n + i] += k * pa[t * n + i];
                }
            }
        }
        out
    }

    /// `Σ_{s,t} w_s w_t a_s·K(x_s − x_t) b_t`.
    pub fn induced_pairing(&self, shape: &DiscreteSubmanifold, a: &[f64], b: &[f64]) -> Result<f64> {
        self.check(shape, &[a, b])?;
        let pr = self.pairs(shape);
        Ok(self.pairing_with(&pr, shape, a, b))
    }

    fn pairing_with(&self, pr: &Pairs, shape: &DiscreteSubmanifold, a: &[f64], b: &[f64]) -> f64 {
        let u = self.velocity_at_samples(pr, shape, b);
        let pa = Self::weighted(shape, a);
        pa.iter().zip(&u).map(|(x, y)| y * x).sum()
    }

    /// Horizontal velocity `u(y) = Σ_t K(y − x_t) a_t w_t` anywhere in `R^n`.
    pub fn horizontal_velocity(&self, shape: &DiscreteSubmanifold, a: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check(shape, &[a])?;
        let n = shape.n;
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: y.len(),
            });
        }
        let mut out = vec![0.0; n];
        for t in 0..shape.count() {
            let r2: f64 = (0..n).map(|i| (y[i] - shape.samples[t * n + i]).powi(2)).sum();
            let k = self.kernel.radial(r2).value * shape.weights[t];
            for i in 0..n {
                out[i] += k * a[t * n + i];
            }
        }
        Ok(out)
    }

    /// `Σ_t w_t (c_s·d_t) ∇K(x_s − x_t)`, i.e. `(Du_d(x_s))^T c_s`.
    fn jacobian_transpose(&self, pr: &Pairs, shape: &DiscreteSubmanifold, c: &[f64], d: &[f64]) -> Vec<f64> {
        let (n, count) = (shape.n, shape.count());
        let mut out = vec![0.0; count * n];
        for s in 0..count {
            for t in 0..count {
                if s == t {
                    continue;
                }
                let w = dot(&c[s * n..(s + 1) * n], &d[t * n..(t + 1) * n]) * shape.weights[t];
                let g1 = pr.g1(s, t);
                for (i, r) in pr.r(s, t).iter().enumerate() {
                    out[s * n + i] += w * (g1 * r);
                }
            }
        }
        out
    }

    /// Hamiltonian `½ ⟨a, a⟩_F`.
    pub fn hamiltonian(&self, shape: &DiscreteSubmanifold, a: &[f64]) -> Result<f64> {
        Ok(0.5 * self.induced_pairing(shape, a, a)?)
    }

    /// `ẋ_s = u(x_s)` and `ȧ_s = −(Du(x_s))^T a_s` with weights carried by
    /// the samples.
    pub fn geodesic_step_system(&self, shape: &DiscreteSubmanifold, a: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(shape, &[a])?;
        let pr = self.pairs(shape);
        Ok(self.step_with(&pr, shape, a))
    }

    fn step_with(&self, pr: &Pairs, shape: &DiscreteSubmanifold, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let xdot = self.velocity_at_samples(pr, shape, a);
        let mut adot = self.jacobian_transpose(pr, shape, a, a);
        for v in adot.iter_mut() {
            *v = -*v;
        }
        (xdot, adot)
    }

    /// Raw right-hand side for positions `x` sharing `shape`'s weights.
    /// Frames are not needed for the flow itself.
    pub(crate) fn rhs_at(&self, shape: &DiscreteSubmanifold, x: &[f64], a: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let pr = Pairs::new(&self.kernel, x, shape.n);
        let moved = DiscreteSubmanifold {
            samples: x.to_vec(),
            ..shape.clone()
        };
        self.step_with(&pr, &moved, a)
    }

    pub(crate) fn hamiltonian_at(&self, shape: &DiscreteSubmanifold, x: &[f64], a: &[f64]) -> f64 {
        let pr = Pairs::new(&self.kernel, x, shape.n);
        let moved = DiscreteSubmanifold {
            samples: x.to_vec(),
            ..shape.clone()
        };
        0.5 * self.pairing_with(&pr, &moved, a, a)
    }

    /// `F_N(α,β)_s = P_s ½[(Du_β)^T a_s + (Du_α)^T b_s]`.
    pub fn force_n(&self, shape: &DiscreteSubmanifold, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        self.check(shape, &[a, b])?;
        let pr = self.pairs(shape);
        Ok(self.force_with(&pr, shape, a, b))
    }

    fn force_with(&self, pr: &Pairs, shape: &DiscreteSubmanifold, a: &[f64], b: &[f64]) -> Vec<f64> {
        let x = self.jacobian_transpose(pr, shape, a, b);
        let y = self.jacobian_transpose(pr, shape, b, a);
        // sum in a fixed symmetric order so F(α,β) = F(β,α) bitwise
        let raw: Vec<f64> = x.iter().zip(&y).map(|(p, q)| 0.5 * (p + q)).collect();
        shape.project_normal(&raw)
    }

    /// `D_N(α,β)_s = −P_s Σ_t [(u_α(x_s) − u_α(x_t))·∇K(x_s − x_t)] w_t b_t`.
    pub fn stress_n(&self, shape: &DiscreteSubmanifold, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        self.check(shape, &[a, b])?;
        let pr = self.pairs(shape);
        let ua = self.velocity_at_samples(&pr, shape, a);
        Ok(self.stress_with(&pr, shape, &ua, b))
    }

    fn stress_with(&self, pr: &Pairs, shape: &DiscreteSubmanifold, ua: &[f64], b: &[f64]) -> Vec<f64> {
        let (n, count) = (shape.n, shape.count());
        let mut raw = vec![0.0; count * n];
        for s in 0..count {
            for t in 0..count {
                if s == t {
                    continue;
                }
                let g1 = pr.g1(s, t);
                let mut lie = 0.0;
                for (i, r) in pr.r(s, t).iter().enumerate() {
                    lie += (g1 * r) * (ua[s * n + i] - ua[t * n + i]);
                }
                let c = lie * shape.weights[t];
                for i in 0..n {
                    raw[s * n + i] -= c * b[t * n + i];
                }
            }
        }
        shape.project_normal(&raw)
    }

    /// The four curvature terms by double quadrature.
    ///
    /// The stress box carries a leading minus relative to the chart stress
    /// (the derivative of `β♯` along `α♯`), so `R12` pairs forces with
    /// `−D_N`. `R3` is `−¾ h_N^T (N^T G N)^{-1} h_N` with `h = D_N(α,β) −
    /// D_N(β,α)`, `G` the unweighted sample Gram and `N` the normal basis.
    pub fn curvature_terms(&self, shape: &DiscreteSubmanifold, a: &[f64], b: &[f64]) -> Result<CurvatureBreakdown> {
        self.check(shape, &[a, b])?;
        self.kernel.spec().require_curvature_grade()?;
        let (n, count) = (shape.n, shape.count());
        let pr = self.pairs(shape);
        let pa = Self::weighted(shape, a);
        let pb = Self::weighted(shape, b);
        let ua = self.velocity_at_samples(&pr, shape, a);
        let ub = self.velocity_at_samples(&pr, shape, b);

        let hess_pair = |x: &[f64], y: &[f64], c: &[f64], d: &[f64]| {
            let mut acc = 0.0;
            let mut xd = vec![0.0; n];
            let mut yd = vec![0.0; n];
            for s in 0..count {
                for t in 0..count {
                    if s == t {
                        continue;
                    }
                    for i in 0..n {
                        xd[i] = x[s * n + i] - x[t * n + i];
                        yd[i] = y[s * n + i] - y[t * n + i];
                    }
                    acc += dot(&c[s * n..(s + 1) * n], &d[t * n..(t + 1) * n]) * pr.hess_form(s, t, &xd, &yd);
                }
            }
            acc
        };
        let r11 = 0.5 * (hess_pair(&ua, &ua, &pb, &pb) - 2.0 * hess_pair(&ua, &ub, &pa, &pb) + hess_pair(&ub, &ub, &pa, &pa));

        let f_aa = self.force_with(&pr, shape, a, a);
        let f_bb = self.force_with(&pr, shape, b, b);
        let f_ab = self.force_with(&pr, shape, a, b);
        let d_aa = self.stress_with(&pr, shape, &ua, a);
        let d_bb = self.stress_with(&pr, shape, &ub, b);
        let d_ab = self.stress_with(&pr, shape, &ua, b);
        let d_ba = self.stress_with(&pr, shape, &ub, a);
        let wpair = |f: &[f64], d: &[f64]| -> f64 {
            (0..count)
                .map(|s| shape.weights[s] * dot(&f[s * n..(s + 1) * n], &d[s * n..(s + 1) * n]))
                .sum()
        };
        let sym: Vec<f64> = d_ab.iter().zip(&d_ba).map(|(x, y)| x + y).collect();
        let r12 = -(wpair(&f_aa, &d_bb) + wpair(&f_bb, &d_aa) - wpair(&f_ab, &sym));

        let r2 = self.pairing_with(&pr, shape, &f_ab, &f_ab) - self.pairing_with(&pr, shape, &f_aa, &f_bb);

        let h: Vec<f64> = d_ab.iter().zip(&d_ba).map(|(x, y)| x - y).collect();
        let r3 = -0.75 * self.normal_norm_with(&pr, shape, &h)?;

        let aa = self.pairing_with(&pr, shape, a, a);
        let bb = self.pairing_with(&pr, shape, b, b);
        let ab = self.pairing_with(&pr, shape, a, b);
        Ok(CurvatureBreakdown::from_terms(r11, r12, r2, r3, aa * bb - ab * ab, aa * bb))
    }

    /// `‖h‖²_{L_F}` for a normal vector field sampled at the samples.
    pub fn normal_norm(&self, shape: &DiscreteSubmanifold, h: &[f64]) -> Result<f64> {
        self.check(shape, &[h])?;
        let pr = self.pairs(shape);
        self.normal_norm_with(&pr, shape, h)
    }

    fn normal_norm_with(&self, pr: &Pairs, shape: &DiscreteSubmanifold, h: &[f64]) -> Result<f64> {
        if h.iter().all(|v| *v == 0.0) {
            return Ok(0.0);
        }
        let (n, count, k) = (shape.n, shape.count(), shape.n - shape.m);
        let basis = shape.normal_basis();
        let nu = |s: usize, i: usize| &basis[(s * k + i) * n..(s * k + i + 1) * n];
        let dim = count * k;
        let gram = DMatrix::from_fn(dim, dim, |r, c| {
            let (s, i) = (r / k, r % k);
            let (t, j) = (c / k, c % k);
            pr.k(s, t) * dot(nu(s, i), nu(t, j))
        });
        let hn = DVector::from_fn(dim, |r, _| {
            let (s, i) = (r / k, r % k);
            dot(nu(s, i), &h[s * n..(s + 1) * n])
        });
        let (min, max) = eigen_range(&gram);
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::Conditioning { condition });
        }
        let chol = gram.cholesky().ok_or(Error::Conditioning { condition })?;
        let sol = chol.solve(&hn);
        Ok(hn.dot(&sol))
    }
}

/// Free-function forms of the [`SubmanifoldMetric`] methods.
pub fn induced_pairing(metric: &SubmanifoldMetric, shape: &DiscreteSubmanifold, a: &NormalMomentum, b: &NormalMomentum) -> Result<f64> {
    metric.induced_pairing(shape, &a.a, &b.a)
}

pub fn horizontal_velocity(metric: &SubmanifoldMetric, shape: &DiscreteSubmanifold, a: &NormalMomentum, y: &[f64]) -> Result<Vec<f64>> {
    metric.horizontal_velocity(shape, &a.a, y)
}

pub fn geodesic_step_system(metric: &SubmanifoldMetric, shape: &DiscreteSubmanifold, a: &NormalMomentum) -> Result<(Vec<f64>, Vec<f64>)> {
    metric.geodesic_step_system(shape, &a.a)
}

pub fn force_n(metric: &SubmanifoldMetric, shape: &DiscreteSubmanifold, a: &NormalMomentum, b: &NormalMomentum) -> Result<NormalMomentum> {
    Ok(NormalMomentum {
        a: metric.force_n(shape, &a.a, &b.a)?,
    })
}

pub fn stress_n(metric: &SubmanifoldMetric, shape: &DiscreteSubmanifold, a: &NormalMomentum, b: &NormalMomentum) -> Result<Vec<f64>> {
    metric.stress_n(shape, &a.a, &b.a)
}

pub fn curvature_terms(metric: &SubmanifoldMetric, shape: &DiscreteSubmanifold, a: &NormalMomentum, b: &NormalMomentum) -> Result<CurvatureBreakdown> {
    metric.curvature_terms(shape, &a.a, &b.a)
}

/// Catalog shapes and momenta.
pub mod catalog {
    use super::*;

    /// Circle of the given radius about the origin in `R^2`, `samples` equally
    /// spaced points with trapezoid weights `2πr / S`.
    pub fn circle(radius: f64, samples: usize) -> Result<DiscreteSubmanifold> {
        if !(radius > 0.0) || samples < 3 {
            return Err(Error::Config("circle needs radius > 0 and at least 3 samples".into()));
        }
        let x: Vec<f64> = (0..samples)
            .flat_map(|s| {
                let th = 2.0 * PI * s as f64 / samples as f64;
                [radius * th.cos(), radius * th.sin()]
            })
            .collect();
        let w = vec![2.0 * PI * radius / samples as f64; samples];
        DiscreteSubmanifold::closed_curve(2, x, w)
    }

    /// Angle of each sample of a curve about the origin.
    fn angles(shape: &DiscreteSubmanifold) -> Vec<f64> {
        (0..shape.count())
            .map(|s| {
                let p = shape.sample(s);
                p[1].atan2(p[0])
            })
            .collect()
    }

    /// Outward radial momentum `f(θ) n(θ)` for a planar curve around the origin.
    pub fn radial_momentum(shape: &DiscreteSubmanifold, profile: impl Fn(f64) -> f64) -> Vec<f64> {
        let th = angles(shape);
        let raw: Vec<f64> = th
            .iter()
            .flat_map(|&t| {
                let f = profile(t);
                [f * t.cos(), f * t.sin()]
            })
            .collect();
        shape.project_normal(&raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmark::LandmarkMetric;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bessel2() -> KernelSpec {
        KernelSpec::bessel(2, 3, 0.5)
    }

    #[test]
    fn circle_geometry() {
        let c = catalog::circle(1.5, 64).unwrap();
        assert!((c.total_volume() - 2.0 * PI * 1.5).abs() < 1e-12);
        for s in 0..64 {
            let p = c.projector(s);
            // idempotent and symmetric
            for i in 0..2 {
                for j in 0..2 {
                    let pp: f64 = (0..2).map(|k| p[i * 2 + k] * p[k * 2 + j]).sum();
                    assert!((pp - p[i * 2 + j]).abs() < 1e-10);
                    assert_eq!(p[i * 2 + j], p[j * 2 + i]);
                }
            }
            let t = c.tangent(s, 0);
            for i in 0..2 {
                let pt: f64 = (0..2).map(|k| p[i * 2 + k] * t[k]).sum();
                assert!(pt.abs() < 1e-8);
            }
        }
        let a = catalog::radial_momentum(&c, |_| 1.0);
        assert!(c.normality_defect(&a) < 1e-14);
    }

    #[test]
    fn zero_momentum_is_stationary() {
        let m = SubmanifoldMetric::new(&bessel2()).unwrap();
        let c = catalog::circle(1.0, 16).unwrap();
        let z = vec![0.0; 32];
        assert_eq!(m.induced_pairing(&c, &z, &z).unwrap(), 0.0);
        let (xd, ad) = m.geodesic_step_system(&c, &z).unwrap();
        assert!(xd.iter().chain(&ad).all(|v| *v == 0.0));
        assert_eq!(m.horizontal_velocity(&c, &z, &[3.0, 1.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_sample_stress_vanishes() {
        let m = SubmanifoldMetric::new(&bessel2()).unwrap();
        let s = DiscreteSubmanifold::points(2, vec![0.3, 0.1]).unwrap();
        assert_eq!(m.stress_n(&s, &[1.0, 0.0], &[0.0, 1.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn force_is_symmetric() {
        let m = SubmanifoldMetric::new(&bessel2()).unwrap();
        let c = catalog::circle(1.0, 20).unwrap();
        let a = catalog::radial_momentum(&c, |t| 1.0 + 0.3 * t.sin());
        let b = catalog::radial_momentum(&c, |t| (2.0 * t).cos());
        assert_eq!(m.force_n(&c, &a, &b).unwrap(), m.force_n(&c, &b, &a).unwrap());
    }

    #[test]
    fn equal_momenta_have_zero_curvature() {
        let m = SubmanifoldMetric::new(&bessel2()).unwrap();
        let c = catalog::circle(1.0, 24).unwrap();
        let a = catalog::radial_momentum(&c, |t| 1.0 + 0.5 * (3.0 * t).sin());
        let br = m.curvature_terms(&c, &a, &a).unwrap();
        let scale = br.r11.abs() + br.r12.abs() + br.r2.abs() + br.r3.abs();
        assert!(br.total.abs() <= 1e-10 * (1.0 + scale));
    }

    #[test]
    fn far_field_decays() {
        let m = SubmanifoldMetric::new(&bessel2()).unwrap();
        let c = catalog::circle(1.0, 32).unwrap();
        let a = catalog::radial_momentum(&c, |t| 1.0 + t.cos());
        let y = [12.0, 5.0];
        let u = m.horizontal_velocity(&c, &a, &y).unwrap();
        let mass: f64 = (0..32).map(|s| dot(&a[2 * s..2 * s + 2], &a[2 * s..2 * s + 2]).sqrt() * c.weights()[s]).sum();
        let dist = 13.0 - 1.0;
        let bound = mass * m.kernel().radial(dist * dist).value;
        assert!(dot(&u, &u).sqrt() <= bound);
    }

    #[test]
    fn pairing_is_positive_definite_on_normal_momenta() {
        let m = SubmanifoldMetric::new(&bessel2()).unwrap();
        let c = catalog::circle(1.0, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let basis: Vec<Vec<f64>> = (0..6)
            .map(|_| {
                let raw: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
                c.project_normal(&raw)
            })
            .collect();
        let g = DMatrix::from_fn(6, 6, |i, j| m.induced_pairing(&c, &basis[i], &basis[j]).unwrap());
        assert!((&g - g.transpose()).amax() < 1e-14);
        assert!(eigen_range(&g).0 > 0.0);
    }

    #[test]
    fn rigid_motion_invariance() {
        let m = SubmanifoldMetric::new(&bessel2()).unwrap();
        let c = catalog::circle(1.0, 24).unwrap();
        let a = catalog::radial_momentum(&c, |t| 1.0 + 0.2 * t.sin());
        let b = catalog::radial_momentum(&c, |t| (2.0 * t).cos());
        let base = m.curvature_terms(&c, &a, &b).unwrap().total;
        let pa = m.induced_pairing(&c, &a, &b).unwrap();
        let (co, si) = (0.4_f64.cos(), 0.4_f64.sin());
        let rot = |v: &[f64], shift: [f64; 2]| -> Vec<f64> {
            v.chunks(2)
                .flat_map(|w| [co * w[0] - si * w[1] + shift[0], si * w[0] + co * w[1] + shift[1]])
                .collect()
        };
        let moved = c.with_samples(rot(c.samples(), [2.0, -1.0])).unwrap();
        let (ra, rb) = (rot(&a, [0.0, 0.0]), rot(&b, [0.0, 0.0]));
        let k = m.curvature_terms(&moved, &ra, &rb).unwrap().total;
        assert!((k - base).abs() < 1e-10 * (1.0 + base.abs()));
        assert!((m.induced_pairing(&moved, &ra, &rb).unwrap() - pa).abs() < 1e-10);
    }

    #[test]
    fn landmark_reduction() {
        let spec = bessel2();
        let m = SubmanifoldMetric::new(&spec).unwrap();
        let lm = LandmarkMetric::new(spec, 3, 2).unwrap();
        let q = vec![0.0, 0.0, 0.9, 0.2, -0.4, 0.7];
        let a = vec![0.5, -0.3, 0.2, 0.8, -0.6, 0.1];
        let b = vec![0.1, 0.7, -0.4, 0.3, 0.9, -0.2];
        let s = DiscreteSubmanifold::points(2, q.clone()).unwrap();
        let st = crate::landmark::LandmarkState::new(2, q.clone(), a.clone()).unwrap();
        assert_eq!(m.induced_pairing(&s, &a, &a).unwrap(), 2.0 * lm.hamiltonian(&st).unwrap());
        let (xd, ad) = m.geodesic_step_system(&s, &a).unwrap();
        let (qd, pd) = lm.geodesic_rhs(&q, &a).unwrap();
        assert_eq!(xd, qd);
        for (x, y) in ad.iter().zip(&pd) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
        // D_N carries the opposite sign to the landmark chart stress
        let dn = m.stress_n(&s, &a, &b).unwrap();
        let dl = lm.stress(&q, &a, &b).unwrap();
        for (x, y) in dn.iter().zip(&dl) {
            assert!((x + y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
        let lb = lm.curvature(&q, &a, &b).unwrap();
        let sb = m.curvature_terms(&s, &a, &b).unwrap();
        assert!((lb.total - sb.total).abs() <= 1e-12 * (1.0 + lb.total.abs()));
    }

    #[test]
    fn folded_curve_is_degraded() {
        let x = vec![0.0, 0.0, 1.0, 0.0, 0.0, 1e-3, 0.5, 1.0];
        assert!(matches!(
            DiscreteSubmanifold::closed_curve(2, x, vec![1.0; 4]),
            Err(Error::GeometryDegraded(_))
        ));
    }

    #[test]
    fn shape_file_round_trip() {
        let c = catalog::circle(1.0, 8).unwrap();
        let a = catalog::radial_momentum(&c, |_| 1.0);
        let f = c.to_file(&a, None);
        let text = serde_json::to_string(&f).unwrap();
        let back: ShapeFile = serde_json::from_str(&text).unwrap();
        let (c2, a2, b2) = DiscreteSubmanifold::from_file(&back).unwrap();
        assert_eq!(c2.samples(), c.samples());
        assert_eq!(a2, a);
        assert!(b2.is_none());
    }
}
