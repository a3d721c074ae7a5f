//! Acceptance gate. Each criterion prints one PASS/FAIL line with the
//! measured value and its pinned tolerance; the test fails if any does.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shapecurv::chart_oracle::sectional_numerator_oracle;
use shapecurv::dynamics::{integrate, match_momentum, shoot, IntegratorConfig, MatchOptions, ShapeSystem};
use shapecurv::kernels::{kernel_fourier_oracle, Kernel};
use shapecurv::landmark::landmark_cometric_jet;
use shapecurv::mario_curvature::{mario_coordinate, mario_covariant, mario_force_stress};
use shapecurv::metric_dsl::catalog as metrics;
use shapecurv::metric_dsl::random::{random_cometric, random_point};
use shapecurv::submanifold::catalog as shapes;
use shapecurv::submersion::{catalog as submersions, oneill_check};
use shapecurv::{Coform, DiscreteSubmanifold, KernelSpec, LandmarkMetric, SubmanifoldMetric};

struct Gate {
    lines: Vec<(bool, String)>,
}

impl Gate {
    fn new() -> Self {
        Gate { lines: Vec::new() }
    }

    fn check(&mut self, id: &str, what: &str, value: f64, tol: f64) {
        self.record(id, value <= tol, format!("{what}: {value:.3e} (tol {tol:.0e})"));
    }

    fn time(&mut self, id: &str, what: &str, elapsed: Duration, limit_s: f64) {
        let s = elapsed.as_secs_f64();
        self.record(id, s <= limit_s, format!("{what}: {s:.2} s (limit {limit_s} s)"));
    }

    fn record(&mut self, id: &str, ok: bool, detail: String) {
        let line = format!("{} [{id}] {detail}", if ok { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push((ok, line));
    }

    fn finish(self) {
        let failed: Vec<&String> = self.lines.iter().filter(|(ok, _)| !ok).map(|(_, l)| l).collect();
        assert!(failed.is_empty(), "failed criteria:\n{}", failed.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("\n"));
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

fn spread_landmarks(rng: &mut ChaCha8Rng, count: usize, ambient: usize) -> Vec<f64> {
    loop {
        let q = random_point(rng, count * ambient, 1.5);
        let ok = (0..count).all(|a| {
            (0..a).all(|b| (0..ambient).map(|i| (q[a * ambient + i] - q[b * ambient + i]).powi(2)).sum::<f64>() > 0.25)
        });
        if ok {
            return q;
        }
    }
}

fn charts(g: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let start = Instant::now();
    let (mut oracle, mut three) = (0.0_f64, 0.0_f64);
    let mut failures = 0;
    for k in 0..100 {
        let d = 2 + k % 3;
        let run = (|| -> shapecurv::Result<(f64, f64)> {
            let def = random_cometric(&mut rng, d, 4)?;
            let x = random_point(&mut rng, d, 1.0);
            let cj = def.jet(&x)?;
            let a = Coform(random_point(&mut rng, d, 1.0));
            let b = Coform(random_point(&mut rng, d, 1.0));
            let coord = mario_coordinate(&cj, &a, &b)?.total;
            let cov = mario_covariant(&cj, &a, &b)?;
            let fs = mario_force_stress(&cj, &a, &b)?.total;
            let reference = sectional_numerator_oracle(&cj, cj.sharp(&a.0).as_slice(), cj.sharp(&b.0).as_slice())?;
            let three = rel(coord, cov).max(rel(coord, fs)).max(rel(cov, fs));
            Ok((rel(coord, reference), three))
        })();
        match run {
            Ok((o, t)) => {
                oracle = oracle.max(o);
                three = three.max(t);
            }
            Err(_) => failures += 1,
        }
    }
    let elapsed = start.elapsed();
    if failures > 0 {
        oracle = f64::INFINITY;
        three = f64::INFINITY;
    }
    g.check("1", "coordinate form vs Christoffel oracle, 100 random charts", oracle, 1e-7);
    g.time("1", "random chart suite runtime", elapsed, 60.0);
    g.check("2", "coordinate / covariant / force-stress pairwise", three, 1e-9);
}

fn constant_curvature(g: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sphere = metrics::sphere_stereographic(2).unwrap();
    let hyper = metrics::hyperbolic_half_plane().unwrap();
    let (a, b) = (Coform::basis(2, 0), Coform::basis(2, 1));
    let (mut ks, mut kh) = (0.0_f64, 0.0_f64);
    for _ in 0..10 {
        let x = random_point(&mut rng, 2, 2.0);
        let k = mario_coordinate(&sphere.jet(&x).unwrap(), &a, &b).unwrap().curvature().unwrap();
        ks = ks.max((k - 1.0).abs());
        let y = [rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0)];
        let k = mario_coordinate(&hyper.jet(&y).unwrap(), &a, &b).unwrap().curvature().unwrap();
        kh = kh.max((k + 1.0).abs());
    }
    g.check("3", "sphere chart |k - 1| at 10 points", ks, 1e-8);
    g.check("3", "hyperbolic chart |k + 1| at 10 points", kh, 1e-8);
}

fn oneill(g: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let start = Instant::now();
    let product = submersions::product_default().unwrap();
    let hopf = submersions::hopf().unwrap();
    let (mut prod, mut res, mut split) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..10 {
        let a = Coform(random_point(&mut rng, 2, 1.0));
        let b = Coform(random_point(&mut rng, 2, 1.0));
        let rec = oneill_check(&product, &product.random_point(&mut rng), &a, &b).unwrap();
        prod = prod.max(rec.residual.abs() / (1.0 + rec.base_numerator.abs()));

        let rec = oneill_check(&hopf, &hopf.random_point(&mut rng), &a, &b).unwrap();
        res = res.max(rec.residual.abs() / (1.0 + rec.base_numerator.abs()));
        split = split
            .max((rec.base_sectional() - 4.0).abs())
            .max((rec.total_sectional() - 1.0).abs())
            .max((rec.vertical_sectional() - 3.0).abs());
    }
    let elapsed = start.elapsed();
    g.check("4", "product submersion residual", prod, 1e-10);
    g.check("4", "Hopf residual at 10 points", res, 1e-6);
    g.check("4", "Hopf base 4 = total 1 + vertical 3", split, 1e-6);
    g.time("4", "submersion checks runtime", elapsed, 10.0);
}

fn landmark_identity(g: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut vs_mario, mut vs_oracle) = (0.0_f64, 0.0_f64);
    for count in [2, 3] {
        for ambient in [1, 2] {
            for l in [2u32, 3] {
                let spec = KernelSpec::bessel(ambient, l, 1.0);
                if !spec.is_curvature_grade() {
                    continue;
                }
                let m = LandmarkMetric::new(spec, count, ambient).unwrap();
                for _ in 0..4 {
                    let q = spread_landmarks(&mut rng, count, ambient);
                    let a = random_point(&mut rng, count * ambient, 1.0);
                    let b = random_point(&mut rng, count * ambient, 1.0);
                    let direct = m.curvature(&q, &a, &b).unwrap().total;
                    let cj = landmark_cometric_jet(&m, &q).unwrap();
                    let chart = mario_coordinate(&cj, &Coform(a.clone()), &Coform(b.clone())).unwrap().total;
                    let oracle =
                        sectional_numerator_oracle(&cj, cj.sharp(&a).as_slice(), cj.sharp(&b).as_slice()).unwrap();
                    vs_mario = vs_mario.max(rel(direct, chart));
                    vs_oracle = vs_oracle.max(rel(direct, oracle));
                }
            }
        }
    }
    g.check("5", "landmark curvature vs chart formula on its cometric", vs_mario, 1e-9);
    g.check("5", "landmark curvature vs Christoffel oracle", vs_oracle, 1e-7);

    let mut single = 0.0_f64;
    for ambient in [1, 2] {
        let m = LandmarkMetric::new(KernelSpec::curvature_grade_bessel(ambient, 1.0), 1, ambient).unwrap();
        for _ in 0..5 {
            let q = random_point(&mut rng, ambient, 2.0);
            let a = random_point(&mut rng, ambient, 1.0);
            let b = random_point(&mut rng, ambient, 1.0);
            single = single.max(m.curvature(&q, &a, &b).unwrap().total.abs());
        }
    }
    g.check("5", "single-landmark curvature", single, 0.0);
}

fn conservation(g: &mut Gate) {
    let cfg = IntegratorConfig::rk4(1e-3, 1.0);
    let m2 = LandmarkMetric::new(KernelSpec::bessel(2, 3, 1.0), 2, 2).unwrap();
    let m3 = LandmarkMetric::new(KernelSpec::bessel(2, 3, 1.0), 3, 2).unwrap();
    let runs = [
        integrate(&m2, &[-0.5, 0.0, 0.5, 0.2], &[0.8, 0.3, -0.6, 0.1], &cfg).unwrap(),
        integrate(&m3, &[0.0, 0.0, 1.0, 0.3, -0.4, 0.9], &[0.5, 0.2, -0.3, 0.4, 0.1, -0.6], &cfg).unwrap(),
    ];
    let worst = |f: &dyn Fn(&shapecurv::ConservationReport) -> f64| runs.iter().map(|r| f(&r.report)).fold(0.0, f64::max);
    g.check("6", "relative energy drift", worst(&|r| r.max_relative_energy_drift()), 1e-8);
    g.check("6", "linear momentum drift", worst(&|r| r.max_linear_momentum_drift()), 1e-10);
    g.check("6", "angular momentum drift", worst(&|r| r.max_angular_momentum_drift()), 1e-8);

    // a strongly nonlinear three-landmark flow, so the error is not at roundoff
    let m = LandmarkMetric::new(KernelSpec::bessel(2, 3, 0.5), 3, 2).unwrap();
    let q0 = [0.0, 0.0, 1.0, 0.3, -0.4, 0.9];
    let p0 = [2.0, 0.8, -1.2, 1.6, 0.4, -2.4];
    let end = |dt: f64| {
        let cfg = IntegratorConfig::rk4(dt, 1.0).with_monitor_every(usize::MAX);
        integrate(&m, &q0, &p0, &cfg).unwrap().final_point().q.clone()
    };
    let reference = end(1e-4);
    let err = |dt: f64| end(dt).iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let ratio = err(0.1) / err(0.05);
    let ok = (12.0..=20.0).contains(&ratio);
    g.record("6", ok, format!("RK4 step-halving error ratio: {ratio:.3} (band [12, 20])"));
}

fn kernel_fourier(g: &mut Gate) {
    let mut worst = 0.0_f64;
    for (n, l) in [(1, 2), (1, 3), (3, 3)] {
        let spec = KernelSpec::bessel(n, l, 1.0);
        let k = Kernel::new(&spec).unwrap();
        for i in 0..20 {
            let mut r = vec![0.0; n];
            r[0] = 4.0 * i as f64 / 19.0;
            let closed = k.jet(&r).unwrap().value;
            worst = worst.max((closed - kernel_fourier_oracle(&spec, &r, 100_000).unwrap()).abs());
        }
    }
    g.check("7", "closed-form Bessel kernels vs Fourier quadrature, 60 radii", worst, 1e-6);
}

fn m0_reduction(g: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    let mut diff = |x: &[f64], y: &[f64]| {
        assert_eq!(x.len(), y.len());
        for (u, v) in x.iter().zip(y) {
            worst = worst.max((u - v).abs());
        }
    };
    for ambient in [1, 2, 3] {
        let spec = KernelSpec::curvature_grade_bessel(ambient, 1.0);
        let lm = LandmarkMetric::new(spec.clone(), 3, ambient).unwrap();
        let sm = SubmanifoldMetric::new(&spec).unwrap();
        for _ in 0..4 {
            let q = spread_landmarks(&mut rng, 3, ambient);
            let a = random_point(&mut rng, 3 * ambient, 1.0);
            let b = random_point(&mut rng, 3 * ambient, 1.0);
            let shape = DiscreteSubmanifold::points(ambient, q.clone()).unwrap();
            let lc = lm.curvature(&q, &a, &b).unwrap();
            let sc = sm.curvature_terms(&shape, &a, &b).unwrap();
            diff(&[lc.r11, lc.r12, lc.r2, lc.r3, lc.total], &[sc.r11, sc.r12, sc.r2, sc.r3, sc.total]);
            let state = shapecurv::LandmarkState::new(ambient, q.clone(), a.clone()).unwrap();
            diff(&[lm.hamiltonian(&state).unwrap()], &[sm.hamiltonian(&shape, &a).unwrap()]);
            let (lq, lp) = lm.geodesic_rhs(&q, &a).unwrap();
            let (sq, sp) = sm.geodesic_step_system(&shape, &a).unwrap();
            diff(&lq, &sq);
            diff(&lp, &sp);
            diff(&lm.force(&q, &a, &b).unwrap(), &sm.force_n(&shape, &a, &b).unwrap());
            // the shape stress carries the opposite sign to the chart stress
            let chart_stress: Vec<f64> = lm.stress(&q, &a, &b).unwrap().iter().map(|v| -v).collect();
            diff(&chart_stress, &sm.stress_n(&shape, &a, &b).unwrap());
            let u: Vec<f64> =
                q.chunks(ambient).flat_map(|y| sm.horizontal_velocity(&shape, &a, y).unwrap()).collect();
            diff(&lm.sharp(&q, &a).unwrap(), &u);
        }
    }
    g.check("8", "point-shape operations vs landmark counterparts", worst, 1e-12);
}

fn refinement(g: &mut Gate) {
    let metric = SubmanifoldMetric::new(&KernelSpec::gaussian(2, 0.02)).unwrap();
    let totals: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&s| {
            let c = shapes::circle(1.0, s).unwrap();
            let a = shapes::radial_momentum(&c, |_| 1.0);
            let b = shapes::radial_momentum(&c, |t| (2.0 * t).cos());
            metric.curvature_terms(&c, &a, &b).unwrap().total
        })
        .collect();
    let (d1, d2) = ((totals[1] - totals[0]).abs(), (totals[2] - totals[1]).abs());
    g.record(
        "9",
        d2 < d1,
        format!("circle refinement deltas 32->64 {d1:.3e}, 64->128 {d2:.3e} (must decrease)"),
    );

    let c = shapes::circle(1.0, 128).unwrap();
    let p = shapes::radial_momentum(&c, |t| 1.0 + 0.5 * t.cos() + 0.3 * (2.0 * t).sin());
    let sys = ShapeSystem::new(metric, c.clone());
    let run = integrate(&sys, c.samples(), &p, &IntegratorConfig::rk4(1e-2, 1.0)).unwrap();
    let defect = run.report.max_normality_defect().unwrap_or(f64::INFINITY);
    g.check("9", "normality defect along a circle geodesic, S = 128", defect, 1e-4);
}

fn matching(g: &mut Gate) {
    let cfg = IntegratorConfig::rk4(0.05, 1.0);
    let opts = MatchOptions { tol: 1e-12, ..MatchOptions::default() };

    // one landmark moves in a straight line: q1 = q0 + K(0) p
    let single = LandmarkMetric::new(KernelSpec::bessel(2, 3, 1.0), 1, 2).unwrap();
    let rep = match_momentum(&single, &[0.2, -0.1], &[0.7, -0.35], &cfg, &opts).unwrap();
    let k0 = single.kernel().peak();
    let err = (rep.p0[0] - 0.5 / k0).abs().max((rep.p0[1] + 0.25 / k0).abs());
    g.check("10", "single-landmark momentum vs closed form", if rep.converged { err } else { f64::INFINITY }, 1e-8);

    let pair = LandmarkMetric::new(KernelSpec::bessel(2, 3, 1.0), 2, 2).unwrap();
    let q0 = [0.0, 0.0, 1.0, 0.0];
    let p_star = [0.3, 0.2, -0.2, 0.4];
    let target = shoot(&pair, &q0, &p_star, &cfg).unwrap().q_end;
    let rep = match_momentum(&pair, &q0, &target, &cfg, &opts).unwrap();
    let err = rep.p0.iter().zip(&p_star).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    g.check("10", "two-landmark round-trip momentum", if rep.converged { err } else { f64::INFINITY }, 1e-6);
    g.record(
        "10",
        rep.iterations <= 25,
        format!("Gauss-Newton iterations: {} (limit 25)", rep.iterations),
    );
}

#[test]
fn acceptance() {
    let mut g = Gate::new();
    charts(&mut g);
    constant_curvature(&mut g);
    oneill(&mut g);
    landmark_identity(&mut g);
    conservation(&mut g);
    kernel_fourier(&mut g);
    m0_reduction(&mut g);
    refinement(&mut g);
    matching(&mut g);
    g.finish();
}
