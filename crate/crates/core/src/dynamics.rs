//! Fixed-step integration of landmark and sampled-shape geodesics,
//! conservation monitoring, shooting and Gauss–Newton matching.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landmark::LandmarkMetric;
use crate::submanifold::{DiscreteSubmanifold, SubmanifoldMetric};

/// A Hamiltonian geodesic flow on positions `q` and covectors `p`, both
/// flattened point-major in `R^D`.
pub trait GeodesicSystem {
    /// Ambient dimension `D` of each point.
    fn ambient(&self) -> usize;

    /// Length of the flattened `q` and `p` vectors.
    fn state_len(&self) -> usize;

    fn rhs(&self, q: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)>;

    fn hamiltonian(&self, q: &[f64], p: &[f64]) -> Result<f64>;

    /// Matrix `M(q)` with `H = ½ p^T M p`.
    fn momentum_gram(&self, q: &[f64]) -> Result<DMatrix<f64>>;

    /// Point momenta entering the conserved translation and rotation maps.
    fn point_momenta(&self, p: &[f64]) -> Vec<f64> {
        p.to_vec()
    }

    /// Re-derive any geometry that depends on `q`.
    fn check_geometry(&self, _q: &[f64]) -> Result<()> {
        Ok(())
    }

    fn normality_defect(&self, _q: &[f64], _p: &[f64]) -> Result<Option<f64>> {
        Ok(None)
    }
}

impl GeodesicSystem for LandmarkMetric {
    fn ambient(&self) -> usize {
        LandmarkMetric::ambient(self)
    }

    fn state_len(&self) -> usize {
        self.chart_dim()
    }

    fn rhs(&self, q: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.geodesic_rhs(q, p)
    }

    fn hamiltonian(&self, q: &[f64], p: &[f64]) -> Result<f64> {
        let (qd, _) = self.geodesic_rhs(q, p)?;
        Ok(0.5 * qd.iter().zip(p).map(|(a, b)| a * b).sum::<f64>())
    }

    fn momentum_gram(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        let g = self.gram(q)?;
        let d = LandmarkMetric::ambient(self);
        let n = self.count() * d;
        Ok(DMatrix::from_fn(n, n, |r, c| {
            if r % d == c % d {
                g[(r / d, c / d)]
            } else {
                0.0
            }
        }))
    }
}

/// Geodesic flow of a sampled shape; weights stay attached to the samples.
#[derive(Debug, Clone)]
pub struct ShapeSystem {
    pub metric: SubmanifoldMetric,
    pub shape: DiscreteSubmanifold,
}

impl ShapeSystem {
    pub fn new(metric: SubmanifoldMetric, shape: DiscreteSubmanifold) -> Self {
        ShapeSystem { metric, shape }
    }
}

impl GeodesicSystem for ShapeSystem {
    fn ambient(&self) -> usize {
        self.shape.ambient()
    }

    fn state_len(&self) -> usize {
        self.shape.samples().len()
    }

    fn rhs(&self, q: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok(self.metric.rhs_at(&self.shape, q, p))
    }

    fn hamiltonian(&self, q: &[f64], p: &[f64]) -> Result<f64> {
        Ok(self.metric.hamiltonian_at(&self.shape, q, p))
    }

    fn momentum_gram(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.shape.ambient();
        let w = self.shape.weights();
        let len = q.len();
        let k = self.metric.kernel();
        Ok(DMatrix::from_fn(len, len, |r, c| {
            if r % n != c % n {
                return 0.0;
            }
            let (s, t) = (r / n, c / n);
            let r2: f64 = (0..n).map(|i| (q[s * n + i] - q[t * n + i]).powi(2)).sum();
            w[s] * w[t] * k.radial(r2).value
        }))
    }

    fn point_momenta(&self, p: &[f64]) -> Vec<f64> {
        let n = self.shape.ambient();
        let w = self.shape.weights();
        p.iter().enumerate().map(|(k, v)| w[k / n] * v).collect()
    }

    fn check_geometry(&self, q: &[f64]) -> Result<()> {
        self.shape.with_samples(q.to_vec()).map(|_| ())
    }

    fn normality_defect(&self, q: &[f64], p: &[f64]) -> Result<Option<f64>> {
        Ok(Some(self.shape.with_samples(q.to_vec())?.normality_defect(p)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Rk4,
    ImplicitMidpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub dt: f64,
    pub t_end: f64,
    /// Record a trajectory sample and report entry every this many steps.
    pub monitor_every: usize,
}

impl IntegratorConfig {
    pub fn rk4(dt: f64, t_end: f64) -> Self {
        IntegratorConfig {
            method: Method::Rk4,
            dt,
            t_end,
            monitor_every: 1,
        }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_monitor_every(mut self, every: usize) -> Self {
        self.monitor_every = every;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.monitor_every == 0 {
            return Err(Error::Config("monitor_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Step sizes covering `[0, t_end]`; the last one absorbs any remainder.
    fn steps(&self) -> Vec<f64> {
        let whole = (self.t_end / self.dt).round();
        if (whole * self.dt - self.t_end).abs() <= 1e-9 * self.t_end {
            return vec![self.t_end / whole; whole as usize];
        }
        let full = (self.t_end / self.dt).floor() as usize;
        let mut v = vec![self.dt; full];
        v.push(self.t_end - full as f64 * self.dt);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationEntry {
    pub t: f64,
    pub hamiltonian: f64,
    /// `Σ_a p_a`.
    pub linear_momentum: Vec<f64>,
    /// Components `i < j` of `Σ_a q_a ∧ p_a`.
    pub angular_momentum: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normality_defect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConservationReport {
    pub entries: Vec<ConservationEntry>,
}

impl ConservationReport {
    fn first(&self) -> &ConservationEntry {
        &self.entries[0]
    }

    /// `max_t |H(t) − H(0)| / |H(0)|` (absolute drift if `H(0) = 0`).
    pub fn max_relative_energy_drift(&self) -> f64 {
        let h0 = self.first().hamiltonian;
        let scale = if h0 != 0.0 { h0.abs() } else { 1.0 };
        self.entries
            .iter()
            .map(|e| (e.hamiltonian - h0).abs() / scale)
            .fold(0.0, f64::max)
    }

    fn max_vec_drift(&self, pick: impl Fn(&ConservationEntry) -> &[f64]) -> f64 {
        let v0 = pick(self.first()).to_vec();
        self.entries
            .iter()
            .map(|e| {
                pick(e)
                    .iter()
                    .zip(&v0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn max_linear_momentum_drift(&self) -> f64 {
        self.max_vec_drift(|e| &e.linear_momentum)
    }

    pub fn max_angular_momentum_drift(&self) -> f64 {
        self.max_vec_drift(|e| &e.angular_momentum)
    }

    pub fn max_normality_defect(&self) -> Option<f64> {
        self.entries
            .iter()
            .filter_map(|e| e.normality_defect)
            .reduce(f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Integration {
    pub trajectory: Vec<TrajectoryPoint>,
    pub report: ConservationReport,
}

impl Integration {
    pub fn final_point(&self) -> &TrajectoryPoint {
        self.trajectory.last().expect("trajectory is never empty")
    }
}

/// `(Σ p_a, Σ q_a ∧ p_a)` for point momenta `p`.
pub fn momentum_maps(ambient: usize, q: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = ambient;
    let mut lin = vec![0.0; d];
    let mut ang = vec![0.0; d * (d - 1) / 2];
    for (qa, pa) in q.chunks(d).zip(p.chunks(d)) {
        for i in 0..d {
            lin[i] += pa[i];
        }
        let mut k = 0;
        for i in 0..d {
            for j in (i + 1)..d {
                ang[k] += qa[i] * pa[j] - qa[j] * pa[i];
                k += 1;
            }
        }
    }
    (lin, ang)
}

fn entry<S: GeodesicSystem + ?Sized>(sys: &S, t: f64, q: &[f64], p: &[f64]) -> Result<ConservationEntry> {
    let (linear_momentum, angular_momentum) = momentum_maps(sys.ambient(), q, &sys.point_momenta(p));
    Ok(ConservationEntry {
        t,
        hamiltonian: sys.hamiltonian(q, p)?,
        linear_momentum,
        angular_momentum,
        normality_defect: sys.normality_defect(q, p)?,
    })
}

fn axpy(y: &[f64], a: f64, x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(u, v)| u + a * v).collect()
}

fn rk4_step<S: GeodesicSystem + ?Sized>(sys: &S, q: &[f64], p: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (k1q, k1p) = sys.rhs(q, p)?;
    let (k2q, k2p) = sys.rhs(&axpy(q, 0.5 * h, &k1q), &axpy(p, 0.5 * h, &k1p))?;
    let (k3q, k3p) = sys.rhs(&axpy(q, 0.5 * h, &k2q), &axpy(p, 0.5 * h, &k2p))?;
    let (k4q, k4p) = sys.rhs(&axpy(q, h, &k3q), &axpy(p, h, &k3p))?;
    let combine = |y: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        (0..y.len())
            .map(|i| y[i] + h / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
            .collect()
    };
    Ok((combine(q, &k1q, &k2q, &k3q, &k4q), combine(p, &k1p, &k2p, &k3p, &k4p)))
}

const MIDPOINT_MAX_ITER: usize = 200;

fn midpoint_step<S: GeodesicSystem + ?Sized>(
    sys: &S,
    q: &[f64],
    p: &[f64],
    h: f64,
    t: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    // fixed-point iteration on the midpoint stage
    let (mut kq, mut kp) = sys.rhs(q, p)?;
    for _ in 0..MIDPOINT_MAX_ITER {
        let (nq, np) = sys.rhs(&axpy(q, 0.5 * h, &kq), &axpy(p, 0.5 * h, &kp))?;
        let change = nq
            .iter()
            .zip(&kq)
            .chain(np.iter().zip(&kp))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = nq.iter().chain(&np).map(|v| v.abs()).fold(1.0, f64::max);
        kq = nq;
        kp = np;
        if change <= 1e-15 * scale {
            return Ok((axpy(q, h, &kq), axpy(p, h, &kp)));
        }
    }
    Err(Error::Divergence { last_good_time: t })
}

/// Integrate from `(q0, p0)` over `[0, t_end]` with fixed steps.
pub fn integrate<S: GeodesicSystem + ?Sized>(
    sys: &S,
    q0: &[f64],
    p0: &[f64],
    config: &IntegratorConfig,
) -> Result<Integration> {
    config.validate()?;
    let len = sys.state_len();
    for v in [q0, p0] {
        if v.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: v.len(),
            });
        }
    }
    sys.check_geometry(q0)?;
    let mut q = q0.to_vec();
    let mut p = p0.to_vec();
    let mut t = 0.0;
    let mut trajectory = vec![TrajectoryPoint {
        t,
        q: q.clone(),
        p: p.clone(),
    }];
    let mut report = ConservationReport {
        entries: vec![entry(sys, t, &q, &p)?],
    };
    let steps = config.steps();
    let last = steps.len();
    for (k, h) in steps.into_iter().enumerate() {
        let (nq, np) = match config.method {
            Method::Rk4 => rk4_step(sys, &q, &p, h)?,
            Method::ImplicitMidpoint => midpoint_step(sys, &q, &p, h, t)?,
        };
        if nq.iter().chain(&np).any(|v| !v.is_finite()) {
            return Err(Error::Divergence { last_good_time: t });
        }
        sys.check_geometry(&nq)?;
        q = nq;
        p = np;
        t = if k + 1 == last { config.t_end } else { t + h };
        if (k + 1) % config.monitor_every == 0 || k + 1 == last {
            trajectory.push(TrajectoryPoint {
                t,
                q: q.clone(),
                p: p.clone(),
            });
            report.entries.push(entry(sys, t, &q, &p)?);
        }
    }
    Ok(Integration { trajectory, report })
}

/// Endpoint and its sensitivity with respect to the initial momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootResult {
    pub q_end: Vec<f64>,
    pub p_end: Vec<f64>,
    /// `∂q(T)/∂p0`, one column per momentum coordinate.
    pub sensitivity: DMatrix<f64>,
}

fn endpoint<S: GeodesicSystem + ?Sized>(sys: &S, q0: &[f64], p0: &[f64], config: &IntegratorConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let cfg = IntegratorConfig {
        monitor_every: usize::MAX,
        ..*config
    };
    let run = integrate(sys, q0, p0, &cfg)?;
    let fp = run.final_point();
    Ok((fp.q.clone(), fp.p.clone()))
}

/// Relative momentum step of the sensitivity differences.
pub const SHOOT_STEP: f64 = 1e-6;

/// Integrate to `config.t_end` and differentiate the endpoint in `p0` by
/// central differences with step `1e-6 · max(1, |p0|_∞)`.
pub fn shoot<S: GeodesicSystem + ?Sized>(sys: &S, q0: &[f64], p0: &[f64], config: &IntegratorConfig) -> Result<ShootResult> {
    let (q_end, p_end) = endpoint(sys, q0, p0, config)?;
    let n = p0.len();
    let scale = p0.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let eps = SHOOT_STEP * scale;
    let mut sensitivity = DMatrix::zeros(q_end.len(), n);
    let mut pp = p0.to_vec();
    for k in 0..n {
        pp[k] = p0[k] + eps;
        let (qp, _) = endpoint(sys, q0, &pp, config)?;
        pp[k] = p0[k] - eps;
        let (qm, _) = endpoint(sys, q0, &pp, config)?;
        pp[k] = p0[k];
        for i in 0..q_end.len() {
            sensitivity[(i, k)] = (qp[i] - qm[i]) / (2.0 * eps);
        }
    }
    Ok(ShootResult {
        q_end,
        p_end,
        sensitivity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchOptions {
    /// Stop when `|q(T) − q_target|_∞ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Weight of the optional `λ H(q0, p0)` penalty.
    pub lambda: f64,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            tol: 1e-10,
            max_iter: 25,
            lambda: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub p0: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Max-norm endpoint residual before each iteration and at the end.
    pub residual_history: Vec<f64>,
}

impl MatchReport {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&f64::NAN)
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Find `p0` with `q(T) = q_target` by Gauss–Newton with Levenberg damping
/// on `½|q(T) − q_target|² + λ H(q0, p0)`, starting from `p0 = 0`.
/// Running out of iterations is reported, not raised.
pub fn match_momentum<S: GeodesicSystem + ?Sized>(
    sys: &S,
    q0: &[f64],
    q_target: &[f64],
    config: &IntegratorConfig,
    opts: &MatchOptions,
) -> Result<MatchReport> {
    if q_target.len() != q0.len() {
        return Err(Error::DimensionMismatch {
            expected: q0.len(),
            got: q_target.len(),
        });
    }
    if !(opts.tol > 0.0) || opts.lambda < 0.0 {
        return Err(Error::Config("match needs tol > 0 and lambda >= 0".into()));
    }
    let n = q0.len();
    let gram0 = if opts.lambda > 0.0 {
        Some(sys.momentum_gram(q0)?)
    } else {
        None
    };
    let objective = |r: &[f64], p: &[f64]| -> f64 {
        let mut c = 0.5 * r.iter().map(|v| v * v).sum::<f64>();
        if let Some(g) = &gram0 {
            let pv = DVector::from_column_slice(p);
            c += opts.lambda * 0.5 * pv.dot(&(g * &pv));
        }
        c
    };

    let mut p = vec![0.0; n];
    let (mut q_end, _) = endpoint(sys, q0, &p, config)?;
    let mut r: Vec<f64> = q_end.iter().zip(q_target).map(|(a, b)| a - b).collect();
    let mut history = vec![max_abs(&r)];
    if history[0] <= opts.tol {
        return Ok(MatchReport {
            p0: p,
            converged: true,
            iterations: 0,
            residual_history: history,
        });
    }
    let mut mu: Option<f64> = None;
    for iter in 1..=opts.max_iter {
        let shot = shoot(sys, q0, &p, config)?;
        let j = &shot.sensitivity;
        let rv = DVector::from_column_slice(&r);
        let mut jtj = j.transpose() * j;
        let mut grad = j.transpose() * &rv;
        if let Some(g) = &gram0 {
            jtj += g * opts.lambda;
            grad += g * DVector::from_column_slice(&p) * opts.lambda;
        }
        let diag_max = (0..n).map(|k| jtj[(k, k)]).fold(0.0, f64::max);
        let mut damping = mu.unwrap_or(1e-8 * diag_max.max(f64::MIN_POSITIVE));
        let current = objective(&r, &p);
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += damping;
            }
            let Some(chol) = a.cholesky() else {
                damping *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&grad));
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            let attempt = endpoint(sys, q0, &trial, config);
            if let Ok((qe, _)) = attempt {
                let rt: Vec<f64> = qe.iter().zip(q_target).map(|(a, b)| a - b).collect();
                if objective(&rt, &trial) < current {
                    p = trial;
                    q_end = qe;
                    r = rt;
                    accepted = true;
                    damping = (damping / 10.0).max(1e-12 * diag_max);
                    break;
                }
            }
            damping *= 10.0;
        }
        mu = Some(damping);
        history.push(max_abs(&r));
        if !accepted {
            return Ok(MatchReport {
                p0: p,
                converged: false,
                iterations: iter,
                residual_history: history,
            });
        }
        if max_abs(&r) <= opts.tol {
            return Ok(MatchReport {
                p0: p,
                converged: true,
                iterations: iter,
                residual_history: history,
            });
        }
    }
    let _ = q_end;
    Ok(MatchReport {
        p0: p,
        converged: false,
        iterations: opts.max_iter,
        residual_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::submanifold::catalog;

    fn pair_1d() -> LandmarkMetric {
        LandmarkMetric::new(KernelSpec::bessel(1, 2, 1.0), 2, 1).unwrap()
    }

    #[test]
    fn single_landmark_moves_linearly() {
        let m = LandmarkMetric::new(KernelSpec::gaussian(2, 0.5), 1, 2).unwrap();
        let run = integrate(&m, &[0.1, 0.2], &[1.0, -2.0], &IntegratorConfig::rk4(0.01, 1.0)).unwrap();
        let fp = run.final_point();
        let k0 = m.kernel().peak();
        assert!((fp.q[0] - (0.1 + k0)).abs() < 1e-12);
        assert!((fp.q[1] - (0.2 - 2.0 * k0)).abs() < 1e-12);
        assert_eq!(fp.t, 1.0);
    }

    #[test]
    fn collision_course_conserves_energy() {
        let m = pair_1d();
        let run = integrate(&m, &[-1.0, 1.0], &[1.0, -1.0], &IntegratorConfig::rk4(1e-3, 1.0)).unwrap();
        assert!(run.report.max_relative_energy_drift() <= 1e-8);
        assert!(run.report.max_linear_momentum_drift() <= 1e-10);
        // symmetric pair stays symmetric
        for pt in &run.trajectory {
            assert!((pt.q[0] + pt.q[1]).abs() < 1e-14);
            assert!((pt.p[0] + pt.p[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn time_reversal() {
        let m = LandmarkMetric::new(KernelSpec::bessel(2, 3, 1.0), 3, 2).unwrap();
        let q0 = [0.0, 0.0, 1.0, 0.3, -0.4, 0.9];
        let p0 = [0.5, 0.2, -0.3, 0.4, 0.1, -0.6];
        let cfg = IntegratorConfig::rk4(1e-3, 1.0);
        let fwd = integrate(&m, &q0, &p0, &cfg).unwrap();
        let fp = fwd.final_point();
        let back_p: Vec<f64> = fp.p.iter().map(|v| -v).collect();
        let back = integrate(&m, &fp.q, &back_p, &cfg).unwrap();
        let bp = back.final_point();
        for i in 0..6 {
            assert!((bp.q[i] - q0[i]).abs() < 1e-8);
            assert!((bp.p[i] + p0[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn midpoint_conserves_quadratic_scale() {
        let m = pair_1d();
        let cfg = IntegratorConfig::rk4(1e-2, 1.0).with_method(Method::ImplicitMidpoint);
        let run = integrate(&m, &[-1.0, 1.0], &[0.8, -0.5], &cfg).unwrap();
        assert!(run.report.max_relative_energy_drift() < 1e-4);
        let rk = integrate(&m, &[-1.0, 1.0], &[0.8, -0.5], &IntegratorConfig::rk4(1e-3, 1.0)).unwrap();
        for i in 0..2 {
            assert!((run.final_point().q[i] - rk.final_point().q[i]).abs() < 1e-3);
        }
    }

    #[test]
    fn monitor_every_thins_output() {
        let m = pair_1d();
        let cfg = IntegratorConfig::rk4(0.01, 1.0).with_monitor_every(10);
        let run = integrate(&m, &[-1.0, 1.0], &[0.3, 0.1], &cfg).unwrap();
        assert_eq!(run.trajectory.len(), 11);
        assert!(run.report.entries.windows(2).all(|w| w[0].t < w[1].t));
    }

    #[test]
    fn partial_last_step() {
        let m = pair_1d();
        let cfg = IntegratorConfig::rk4(0.3, 1.0);
        let run = integrate(&m, &[-1.0, 1.0], &[0.3, 0.1], &cfg).unwrap();
        assert_eq!(run.final_point().t, 1.0);
        assert_eq!(run.trajectory.len(), 5);
    }

    #[test]
    fn invalid_config() {
        let m = pair_1d();
        assert!(integrate(&m, &[-1.0, 1.0], &[0.0, 0.0], &IntegratorConfig::rk4(0.0, 1.0)).is_err());
        assert!(integrate(&m, &[-1.0, 1.0], &[0.0, 0.0], &IntegratorConfig::rk4(0.1, -1.0)).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        // a cometric that grows without bound blows up in finite time
        let m = LandmarkMetric::new(KernelSpec::gaussian(1, 1.0).with_amplitude(1e150), 2, 1).unwrap();
        let err = integrate(&m, &[0.0, 1.0], &[1e150, -1e150], &IntegratorConfig::rk4(0.1, 1.0)).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn shoot_at_zero_momentum_is_gram() {
        let m = LandmarkMetric::new(KernelSpec::bessel(2, 3, 1.0), 2, 2).unwrap();
        let q0 = [0.0, 0.0, 1.0, 0.5];
        let cfg = IntegratorConfig::rk4(0.05, 0.7);
        let s = shoot(&m, &q0, &[0.0; 4], &cfg).unwrap();
        assert_eq!(s.q_end, q0.to_vec());
        let g = m.momentum_gram(&q0).unwrap() * 0.7;
        assert!((&s.sensitivity - &g).amax() < 1e-9);
    }

    #[test]
    fn shoot_single_landmark_exact() {
        let m = LandmarkMetric::new(KernelSpec::bessel(2, 3, 1.0), 1, 2).unwrap();
        let s = shoot(&m, &[0.0, 0.0], &[0.3, -0.2], &IntegratorConfig::rk4(0.1, 2.0)).unwrap();
        let expect = DMatrix::identity(2, 2) * (2.0 * m.kernel().peak());
        assert!((&s.sensitivity - &expect).amax() < 1e-9);
    }

    #[test]
    fn shoot_sensitivity_matches_difference() {
        let m = LandmarkMetric::new(KernelSpec::bessel(2, 3, 1.0), 2, 2).unwrap();
        let q0 = [0.0, 0.0, 1.0, 0.5];
        let p0 = [0.4, 0.1, -0.2, 0.3];
        let cfg = IntegratorConfig::rk4(0.01, 1.0);
        let s = shoot(&m, &q0, &p0, &cfg).unwrap();
        let v = [0.3, -0.5, 0.2, 0.7];
        let e = 1e-5;
        let pp: Vec<f64> = p0.iter().zip(&v).map(|(a, b)| a + e * b).collect();
        let (qp, _) = endpoint(&m, &q0, &pp, &cfg).unwrap();
        let jv = &s.sensitivity * DVector::from_row_slice(&v);
        for i in 0..4 {
            assert!(((qp[i] - s.q_end[i]) / e - jv[i]).abs() < 1e-4);
        }
    }

    #[test]
    fn match_trivial_and_single() {
        let m = LandmarkMetric::new(KernelSpec::bessel(2, 3, 1.0), 1, 2).unwrap();
        let cfg = IntegratorConfig::rk4(0.1, 1.0);
        let same = match_momentum(&m, &[0.2, 0.1], &[0.2, 0.1], &cfg, &MatchOptions::default()).unwrap();
        assert_eq!(same.iterations, 0);
        assert_eq!(same.p0, vec![0.0, 0.0]);
        let rep = match_momentum(&m, &[0.0, 0.0], &[0.5, -0.25], &cfg, &MatchOptions::default()).unwrap();
        assert!(rep.converged);
        let k0 = m.kernel().peak();
        assert!((rep.p0[0] - 0.5 / k0).abs() < 1e-8);
        assert!((rep.p0[1] + 0.25 / k0).abs() < 1e-8);
    }

    #[test]
    fn match_translation_equivariant() {
        let m = LandmarkMetric::new(KernelSpec::bessel(2, 3, 1.0), 2, 2).unwrap();
        let cfg = IntegratorConfig::rk4(0.02, 1.0);
        let q0 = [0.0, 0.0, 1.0, 0.0];
        let qt = [0.1, 0.2, 1.1, -0.1];
        let a = match_momentum(&m, &q0, &qt, &cfg, &MatchOptions::default()).unwrap();
        let shift = |v: &[f64]| -> Vec<f64> { v.iter().enumerate().map(|(i, x)| x + if i % 2 == 0 { 2.0 } else { -1.0 }).collect() };
        let b = match_momentum(&m, &shift(&q0), &shift(&qt), &cfg, &MatchOptions::default()).unwrap();
        assert!(a.converged && b.converged);
        for i in 0..4 {
            assert!((a.p0[i] - b.p0[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn regularized_match_runs() {
        let m = LandmarkMetric::new(KernelSpec::bessel(2, 3, 1.0), 2, 2).unwrap();
        let cfg = IntegratorConfig::rk4(0.05, 1.0);
        let opts = MatchOptions {
            lambda: 0.1,
            tol: 1e-3,
            max_iter: 10,
        };
        let rep = match_momentum(&m, &[0.0, 0.0, 1.0, 0.0], &[0.0, 0.1, 1.0, -0.1], &cfg, &opts).unwrap();
        assert!(rep.residual_history[0] > rep.final_residual());
    }

    #[test]
    fn shape_translation_flow() {
        let metric = SubmanifoldMetric::new(&KernelSpec::gaussian(2, 0.5)).unwrap();
        let c = catalog::circle(1.0, 32).unwrap();
        // constant covector projected to the normal bundle
        let raw: Vec<f64> = (0..32).flat_map(|_| [1.0, 0.0]).collect();
        let a = c.project_normal(&raw);
        let sys = ShapeSystem::new(metric, c.clone());
        let run = integrate(&sys, c.samples(), &a, &IntegratorConfig::rk4(1e-2, 0.2)).unwrap();
        assert!(run.report.max_relative_energy_drift() < 1e-6);
        assert!(run.report.max_normality_defect().unwrap() < 1e-2);
    }
}
