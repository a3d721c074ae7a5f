//! Fixtures shared by the criterion benches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shapecurv::metric_dsl::random::{random_cometric, random_point};
use shapecurv::{CometricJet, Coform, KernelSpec, LandmarkMetric};

/// Cometric jet of a seeded random chart metric with two coforms.
pub fn random_chart(dim: usize, seed: u64) -> (CometricJet, Coform, Coform) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let def = random_cometric(&mut rng, dim, 4).expect("valid random cometric");
    let x = random_point(&mut rng, dim, 1.0);
    let a = Coform(random_point(&mut rng, dim, 1.0));
    let b = Coform(random_point(&mut rng, dim, 1.0));
    (def.jet(&x).expect("finite jet"), a, b)
}

/// `count` landmarks on a circle of radius 2 with two momentum fields.
pub fn landmark_ring(count: usize) -> (LandmarkMetric, Vec<f64>, Vec<f64>, Vec<f64>) {
    let m = LandmarkMetric::new(KernelSpec::bessel(2, 3, 1.0), count, 2).expect("valid kernel");
    let mut q = Vec::with_capacity(2 * count);
    let mut a = Vec::with_capacity(2 * count);
    let mut b = Vec::with_capacity(2 * count);
    for k in 0..count {
        let t = std::f64::consts::TAU * k as f64 / count as f64;
        q.extend([2.0 * t.cos(), 2.0 * t.sin()]);
        a.extend([t.cos(), t.sin()]);
        b.extend([-(2.0 * t).sin(), (3.0 * t).cos()]);
    }
    (m, q, a, b)
}
