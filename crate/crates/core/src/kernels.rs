//! Radial reproducing kernels and their jets.
//!
//! The Sobolev/Bessel kernel of order `l` on `R^n` with scale `A` is the
//! inverse Fourier transform of `(1 + A|xi|^2)^-l`. Writing `z = |r| / sqrt(A)`
//! and `nu = l - n/2` it equals
//!
//! ```text
//! K(r) = A^{-n/2} 2^{1-l} / ((2 pi)^{n/2} Gamma(l)) * z^nu K_nu(z)
//! ```
//!
//! with `K_nu` the modified Bessel function of the second kind. Both the
//! half-integer (odd `n`) and integer (even `n`) orders are supported. Jets use
//! the identity `d/dz [z^mu K_mu(z)] = -z * z^(mu-1) K_(mu-1)(z)`, which keeps
//! every expression regular at `r = 0`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    SobolevBessel,
    /// Test kernel only: the Gaussian does not come from a differential
    /// operator defined on all smooth vector fields.
    Gaussian,
}

/// User-facing kernel description, mirrored one-to-one by the JSON format
/// `{"family":"sobolev_bessel","n":2,"l":3,"A":1.0,"c":1.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Ambient dimension.
    pub n: usize,
    /// Sobolev order (Bessel family only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<u32>,
    /// Length scale squared.
    #[serde(rename = "A")]
    pub scale: f64,
    /// Peak value `K(0)`. Defaults to the Fourier normalization for the
    /// Bessel family and to 1 for the Gaussian.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

impl KernelSpec {
    pub fn bessel(n: usize, l: u32, scale: f64) -> Self {
        KernelSpec {
            family: KernelFamily::SobolevBessel,
            n,
            l: Some(l),
            scale,
            c: None,
        }
    }

    pub fn gaussian(n: usize, scale: f64) -> Self {
        KernelSpec {
            family: KernelFamily::Gaussian,
            n,
            l: None,
            scale,
            c: None,
        }
    }

    pub fn with_amplitude(mut self, c: f64) -> Self {
        self.c = Some(c);
        self
    }

    /// Smallest Bessel order with continuous second derivatives in dimension `n`.
    pub fn curvature_grade_bessel(n: usize, scale: f64) -> Self {
        let l = (n as u32 + 2) / 2 + 1;
        Self::bessel(n, l, scale)
    }

    /// True when the kernel is `C^2` at the origin.
    pub fn is_curvature_grade(&self) -> bool {
        match self.family {
            KernelFamily::Gaussian => true,
            KernelFamily::SobolevBessel => self
                .l
                .map(|l| 2 * l as usize > self.n + 2)
                .unwrap_or(false),
        }
    }

    pub fn require_curvature_grade(&self) -> Result<()> {
        if self.is_curvature_grade() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "kernel order l={:?} in dimension n={} is not C^2 (need 2l > n + 2)",
                self.l, self.n
            )))
        }
    }
}

/// Value, gradient and Hessian of the scalar kernel at one displacement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelJet {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major `n x n`.
    pub hessian: Vec<f64>,
}

/// Radial data from which the full jet is assembled:
/// `grad K = g1 * r`, `hess K = g1 * I + g2 * r r^T / |r|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialJet {
    pub value: f64,
    pub g1: f64,
    pub g2: f64,
}

impl RadialJet {
    #[inline]
    pub fn gradient_into(&self, r: &[f64], out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(r) {
            *o = self.g1 * x;
        }
    }

    /// `a^T (hess K) b` without materializing the Hessian.
    #[inline]
    pub fn hessian_form(&self, r: &[f64], r2: f64, a: &[f64], b: &[f64]) -> f64 {
        let mut ab = 0.0;
        let mut ra = 0.0;
        let mut rb = 0.0;
        for i in 0..r.len() {
            ab += a[i] * b[i];
            ra += r[i] * a[i];
            rb += r[i] * b[i];
        }
        let aniso = if r2 > 0.0 { self.g2 * ra * rb / r2 } else { 0.0 };
        self.g1 * ab + aniso
    }

    #[inline]
    pub fn hessian_entry(&self, r: &[f64], r2: f64, i: usize, j: usize) -> f64 {
        let iso = if i == j { self.g1 } else { 0.0 };
        let aniso = if r2 > 0.0 {
            self.g2 * (r[i] * r[j]) / r2
        } else {
            0.0
        };
        iso + aniso
    }
}

/// A validated kernel ready for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    spec: KernelSpec,
    profile: Profile,
    /// Overall constant multiplying the profile.
    amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Profile {
    Gaussian,
    /// Matérn smoothness `nu = l - n/2`, stored doubled to keep it exact.
    Bessel { twice_nu: i64 },
}

impl Kernel {
    pub fn new(spec: &KernelSpec) -> Result<Self> {
        if spec.n == 0 {
            return Err(Error::Config("ambient dimension must be positive".into()));
        }
        if !(spec.scale > 0.0) || !spec.scale.is_finite() {
            return Err(Error::Config(format!(
                "kernel scale A must be positive, got {}",
                spec.scale
            )));
        }
        if let Some(c) = spec.c {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::Config(format!(
                    "kernel amplitude c must be positive, got {c}"
                )));
            }
        }
        match spec.family {
            KernelFamily::Gaussian => Ok(Kernel {
                spec: spec.clone(),
                profile: Profile::Gaussian,
                amplitude: spec.c.unwrap_or(1.0),
            }),
            KernelFamily::SobolevBessel => {
                let l = spec
                    .l
                    .ok_or_else(|| Error::Config("Bessel kernel requires an order l".into()))?;
                if l == 0 {
                    return Err(Error::Config("Bessel order l must be positive".into()));
                }
                let twice_nu = 2 * l as i64 - spec.n as i64;
                if twice_nu <= 0 {
                    return Err(Error::Config(format!(
                        "Bessel kernel with l={l}, n={} is not continuous (need 2l > n)",
                        spec.n
                    )));
                }
                let nu = twice_nu as f64 / 2.0;
                let fourier = spec.scale.powf(-(spec.n as f64) / 2.0) * 2f64.powi(1 - l as i32)
                    / ((2.0 * PI).powf(spec.n as f64 / 2.0) * gamma_half(2 * l as i64));
                let amplitude = match spec.c {
                    Some(c) => c / h_zero(nu),
                    None => fourier,
                };
                Ok(Kernel {
                    spec: spec.clone(),
                    profile: Profile::Bessel { twice_nu },
                    amplitude,
                })
            }
        }
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.n
    }

    pub fn is_curvature_grade(&self) -> bool {
        self.spec.is_curvature_grade()
    }

    /// `K(0)`.
    pub fn peak(&self) -> f64 {
        self.radial(0.0).value
    }

    /// Radial jet at squared distance `r2`.
    pub fn radial(&self, r2: f64) -> RadialJet {
        let a = self.spec.scale;
        match self.profile {
            Profile::Gaussian => {
                let s = r2 / a;
                let e = self.amplitude * (-s).exp();
                RadialJet {
                    value: e,
                    g1: -2.0 * e / a,
                    g2: 4.0 * s * e / a,
                }
            }
            Profile::Bessel { twice_nu } => {
                let z = (r2 / a).sqrt();
                let c = self.amplitude;
                let value = c * h_mu(twice_nu, z);
                // Derivatives only exist for nu > 1/2 (g1) and nu > 1 (g2).
                let g1 = if twice_nu > 1 {
                    -c / a * h_mu(twice_nu - 2, z)
                } else {
                    f64::NAN
                };
                let g2 = if twice_nu > 2 {
                    c / a * w_mu(twice_nu, z)
                } else {
                    f64::NAN
                };
                RadialJet { value, g1, g2 }
            }
        }
    }

    pub fn jet(&self, r: &[f64]) -> Result<KernelJet> {
        let n = self.spec.n;
        if r.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: r.len(),
            });
        }
        let r2: f64 = r.iter().map(|x| x * x).sum();
        let rj = self.radial(r2);
        let mut gradient = vec![0.0; n];
        rj.gradient_into(r, &mut gradient);
        let mut hessian = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                hessian[i * n + j] = rj.hessian_entry(r, r2, i, j);
            }
        }
        Ok(KernelJet {
            value: rj.value,
            gradient,
            hessian,
        })
    }
}

/// `K(r)`, `grad K(r)`, `hess K(r)` for a kernel spec.
pub fn kernel_jet(spec: &KernelSpec, r: &[f64]) -> Result<KernelJet> {
    Kernel::new(spec)?.jet(r)
}

/// Gram matrix `G_ab = K(x_a - x_b)` of distinct points.
pub fn gram_matrix(spec: &KernelSpec, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let kernel = Kernel::new(spec)?;
    let n = kernel.dim();
    for p in points {
        if p.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: p.len(),
            });
        }
    }
    let m = points.len();
    let mut g = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let r2: f64 = points[a]
                .iter()
                .zip(&points[b])
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            if a != b && r2 == 0.0 {
                return Err(Error::DegenerateConfiguration(format!(
                    "points {a} and {b} coincide"
                )));
            }
            let v = kernel.radial(r2).value;
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    Ok(g)
}

/// Numerical quadrature of the Fourier integral defining the Bessel kernel.
///
/// The radial integral is mapped to `[0, pi/2]` with `rho = tan(theta)/sqrt(A)`
/// and integrated by composite Simpson with `quad_points` intervals. Supported
/// ambient dimensions are 1, 2 and 3.
pub fn kernel_fourier_oracle(spec: &KernelSpec, r: &[f64], quad_points: usize) -> Result<f64> {
    if spec.family != KernelFamily::SobolevBessel {
        return Err(Error::Unsupported(
            "the Fourier oracle exists only for the Bessel family".into(),
        ));
    }
    // Validates the spec (continuity, positive scale).
    Kernel::new(spec)?;
    if quad_points < 1000 {
        return Err(Error::Config(format!(
            "quad_points must be at least 1000, got {quad_points}"
        )));
    }
    if r.len() != spec.n {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            got: r.len(),
        });
    }
    let rad = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let fourier = fourier_radial(spec, rad, quad_points)?;
    Ok(match spec.c {
        Some(c) => c * fourier / fourier_radial(spec, 0.0, quad_points)?,
        None => fourier,
    })
}

fn fourier_radial(spec: &KernelSpec, rad: f64, quad_points: usize) -> Result<f64> {
    let l = spec.l.unwrap_or(0) as i32;
    let a = spec.scale;
    let sa = a.sqrt();
    let x = rad / sa;
    let integrand: Box<dyn Fn(f64) -> f64> = match spec.n {
        1 => Box::new(move |th: f64| (x * th.tan()).cos() * th.cos().powi(2 * l - 2)),
        2 => Box::new(move |th: f64| th.sin() * th.cos().powi(2 * l - 3) * bessel_j0(x * th.tan())),
        3 => Box::new(move |th: f64| {
            let t = x * th.tan();
            let sinc = if t == 0.0 { 1.0 } else { t.sin() / t };
            th.sin().powi(2) * th.cos().powi(2 * l - 4) * sinc
        }),
        n => {
            return Err(Error::Unsupported(format!(
                "Fourier oracle supports n in {{1, 2, 3}}, got {n}"
            )))
        }
    };
    let prefactor = match spec.n {
        1 => 1.0 / (PI * sa),
        2 => 1.0 / (2.0 * PI * a),
        _ => 1.0 / (2.0 * PI * PI * a * sa),
    };
    let m = quad_points + quad_points % 2;
    let h = (PI / 2.0) / m as f64;
    let mut sum = 0.0;
    for i in 0..=m {
        let th = i as f64 * h;
        // The integrand vanishes at pi/2 for every supported order except
        // l = 1, n = 1 where cos^0 = 1 and the oscillation has no limit;
        // the endpoint carries zero Simpson weight in that average.
        let f = if i == m {
            if spec.n == 1 && l == 1 && x == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            integrand(th)
        };
        let w = if i == 0 || i == m {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * f;
    }
    Ok(prefactor * sum * h / 3.0)
}

/// `J_0(x)`: periodic trapezoid on the Bessel integral for moderate
/// arguments, Hankel asymptotics beyond.
pub(crate) fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < 40.0 {
        let n = 64 + 2 * x.ceil() as usize;
        let h = PI / n as f64;
        let s: f64 = (0..n).map(|k| (x * (k as f64 * h).sin()).cos()).sum();
        s / n as f64
    } else {
        let chi = x - PI / 4.0;
        let inv = 1.0 / x;
        let p = 1.0 - 9.0 / 128.0 * inv * inv + 3675.0 / 32768.0 * inv.powi(4);
        let q = -0.125 * inv + 75.0 / 1024.0 * inv.powi(3);
        (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}

/// `Gamma(k/2)` for positive integer `k`.
fn gamma_half(k: i64) -> f64 {
    debug_assert!(k > 0);
    if k % 2 == 0 {
        (1..k / 2).map(|i| i as f64).product()
    } else {
        // Gamma(m + 1/2) = sqrt(pi) * prod_{i=1..m} (i - 1/2)
        let m = (k - 1) / 2;
        PI.sqrt() * (1..=m).map(|i| i as f64 - 0.5).product::<f64>()
    }
}

/// `lim_{z->0} z^nu K_nu(z) = 2^(nu-1) Gamma(nu)` for `nu > 0`.
fn h_zero(nu: f64) -> f64 {
    2f64.powf(nu - 1.0) * gamma_half((2.0 * nu).round() as i64)
}

/// `h_mu(z) = z^mu K_|mu|(z)` with `mu = twice_mu / 2`.
fn h_mu(twice_mu: i64, z: f64) -> f64 {
    let mu = twice_mu as f64 / 2.0;
    if twice_mu > 0 && twice_mu % 2 == 1 {
        // Positive half-integer order: exact polynomial times exponential.
        let k = (twice_mu - 1) / 2;
        return (PI / 2.0).sqrt() * (-z).exp() * half_integer_poly(k, z);
    }
    if z == 0.0 {
        return if twice_mu > 0 { h_zero(mu) } else { f64::INFINITY };
    }
    z.powf(mu) * bessel_k(twice_mu.abs(), z)
}

/// `w(z) = z^2 h_(nu-2)(z) = z^nu K_|nu-2|(z)`, which vanishes at zero for `nu > 1`.
fn w_mu(twice_nu: i64, z: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    let nu = twice_nu as f64 / 2.0;
    let order = (twice_nu - 4).abs();
    if order % 2 == 1 && twice_nu - 4 > 0 {
        return z * z * h_mu(twice_nu - 4, z);
    }
    z.powf(nu) * bessel_k(order, z)
}

/// `sum_{j=0..k} (k+j)! / (j! (k-j)! 2^j) z^(k-j)`.
fn half_integer_poly(k: i64, z: f64) -> f64 {
    let mut acc = 0.0;
    for j in 0..=k {
        let mut c = 1.0;
        for i in (k - j + 1)..=(k + j) {
            c *= i as f64;
        }
        for i in 1..=j {
            c /= i as f64 * 2.0;
        }
        acc += c * z.powi((k - j) as i32);
    }
    acc
}

/// `K_mu(z)` for `mu = twice_mu / 2 >= 0` and `z > 0`.
fn bessel_k(twice_mu: i64, z: f64) -> f64 {
    debug_assert!(z > 0.0);
    if twice_mu % 2 == 1 {
        let k = (twice_mu - 1) / 2;
        // K_(k+1/2)(z) = sqrt(pi/(2z)) e^-z sum_j c_j (2z)^-j
        let mut acc = 0.0;
        for j in 0..=k {
            let mut c = 1.0;
            for i in (k - j + 1)..=(k + j) {
                c *= i as f64;
            }
            for i in 1..=j {
                c /= i as f64;
            }
            acc += c / (2.0 * z).powi(j as i32);
        }
        return (PI / (2.0 * z)).sqrt() * (-z).exp() * acc;
    }
    // Integer order: K_m(z) = int_0^inf exp(-z cosh t) cosh(m t) dt, trapezoid
    // rule (exponentially convergent for this entire integrand).
    let m = (twice_mu / 2) as f64;
    let h: f64 = 0.02;
    let mut sum = 0.5 * (-z).exp();
    let mut t = h;
    loop {
        let term = (-z * t.cosh()).exp() * (m * t).cosh();
        sum += term;
        if term < 1e-18 * sum || t > 60.0 {
            break;
        }
        t += h;
    }
    sum * h
}
