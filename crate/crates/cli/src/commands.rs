use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use shapecurv::chart_oracle::sectional_numerator_oracle;
use shapecurv::dynamics::{integrate, match_momentum, momentum_maps, GeodesicSystem, Integration};
use shapecurv::landmark::default_beta;
use shapecurv::mario_curvature::{mario_coordinate, mario_covariant, mario_force_stress};
use shapecurv::metric_dsl::{catalog as metrics, CometricFile};
use shapecurv::submanifold::catalog as shapes;
use shapecurv::submersion::{catalog as submersions, oneill_check};
use shapecurv::validate::{run_suite, SuiteOptions, SUITE_NAMES};
use shapecurv::{
    Cometric, CometricDef, Coform, CurvatureBreakdown, DiscreteSubmanifold, IntegratorConfig, KernelSpec,
    LandmarkFile, LandmarkMetric, MatchOptions, Method, OneillRecord, ShapeFile, ShapeSystem, SubmanifoldMetric,
};

use crate::{
    CaseArg, Cli, Command, CurvatureCmd, Failure, GeodesicCmd, KernelCmd, MatchArgs, MethodArg, OneillCmd,
    ShapeCmd, ShapeMake, ValidateArgs,
};

/// Tolerance names accepted by `--tol-override` besides the suite names.
const MATCH_TOL: &str = "match_tol";

struct Ctx {
    seed: u64,
    out: Option<PathBuf>,
    overrides: BTreeMap<String, f64>,
}

impl Ctx {
    fn emit(&self, text: &str) -> anyhow::Result<()> {
        match &self.out {
            Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn emit_json<T: Serialize>(&self, value: &T) -> anyhow::Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.emit(&s)
    }
}

fn thread_count(flag: Option<usize>) -> Result<usize, Failure> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var("GEO_THREADS") {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Failure::Usage(format!("GEO_THREADS=`{v}` is not a thread count")))?,
            Err(_) => 1,
        },
    };
    if n == 0 {
        return Err(Failure::Usage("thread count must be at least 1".into()));
    }
    Ok(n)
}

pub fn run(cli: Cli) -> Result<ExitCode, Failure> {
    let threads = thread_count(cli.threads)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Compute(e.into()))?;
    let mut overrides = BTreeMap::new();
    for (name, v) in cli.tol_override {
        if name != MATCH_TOL && !SUITE_NAMES.contains(&name.as_str()) {
            return Err(Failure::Usage(format!(
                "unknown tolerance `{name}` (known: {MATCH_TOL}, {})",
                SUITE_NAMES.join(", ")
            )));
        }
        overrides.insert(name, v);
    }
    let ctx = Ctx {
        seed: cli.seed,
        out: cli.out,
        overrides,
    };
    match cli.command {
        Command::Kernel(KernelCmd::Eval { spec, r }) => {
            let spec: KernelSpec = read_json(&spec)?;
            ctx.emit_json(&shapecurv::kernels::kernel_jet(&spec, &r.0)?)?;
        }
        Command::Curvature(c) => curvature(&ctx, c)?,
        Command::Geodesic(GeodesicCmd::Shoot {
            state,
            shape,
            kernel,
            dt,
            t_end,
            method,
            monitor_every,
        }) => {
            let config = IntegratorConfig {
                method: match method {
                    MethodArg::Rk4 => Method::Rk4,
                    MethodArg::ImplicitMidpoint => Method::ImplicitMidpoint,
                },
                dt,
                t_end,
                monitor_every,
            };
            geodesic(&ctx, state, shape, kernel, &config)?;
        }
        Command::Match(args) => match_cmd(&ctx, &args)?,
        Command::Oneill(OneillCmd::Check { case, trials }) => oneill(&ctx, case, trials)?,
        Command::Shape(ShapeCmd::Make(ShapeMake::Circle { radius, samples })) => {
            let c = shapes::circle(radius, samples)?;
            let a = shapes::radial_momentum(&c, |_| 1.0);
            let b = shapes::radial_momentum(&c, |t| (2.0 * t).cos());
            ctx.emit_json(&c.to_file(&a, Some(&b)))?;
        }
        Command::Validate(args) => return validate(&ctx, &args),
    }
    Ok(ExitCode::SUCCESS)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn kernel_or(path: &Option<PathBuf>, ambient: usize) -> anyhow::Result<KernelSpec> {
    match path {
        Some(p) => read_json(p),
        None => Ok(KernelSpec::curvature_grade_bessel(ambient, 1.0)),
    }
}

#[derive(Serialize)]
struct ChartReport {
    coordinate: CurvatureBreakdown,
    covariant: f64,
    force_stress: CurvatureBreakdown,
    oracle: f64,
    /// Largest deviation of the three formula paths from the oracle.
    discrepancy: f64,
}

fn load_cometric(spec: &str) -> anyhow::Result<Cometric> {
    if let Some(name) = spec.strip_prefix("catalog:") {
        return Ok(metrics::by_name(name)?);
    }
    let file: CometricFile = read_json(Path::new(spec))?;
    Ok(Cometric::Expr(CometricDef::from_file(&file)?))
}

fn curvature(ctx: &Ctx, cmd: CurvatureCmd) -> Result<(), Failure> {
    match cmd {
        CurvatureCmd::Chart {
            cometric,
            point,
            alpha,
            beta,
        } => {
            let metric = load_cometric(&cometric)?;
            let cj = metric.jet(&point.0)?;
            let (a, b) = (Coform(alpha.0), Coform(beta.0));
            let coordinate = mario_coordinate(&cj, &a, &b)?;
            let covariant = mario_covariant(&cj, &a, &b)?;
            let force_stress = mario_force_stress(&cj, &a, &b)?;
            let oracle = sectional_numerator_oracle(&cj, cj.sharp(&a.0).as_slice(), cj.sharp(&b.0).as_slice())?;
            let discrepancy = [coordinate.total, covariant, force_stress.total]
                .iter()
                .map(|v| (v - oracle).abs())
                .fold(0.0, f64::max);
            ctx.emit_json(&ChartReport {
                coordinate,
                covariant,
                force_stress,
                oracle,
                discrepancy,
            })?;
        }
        CurvatureCmd::Landmark { state, kernel } => {
            let file: LandmarkFile = read_json(&state)?;
            let st = file.state()?;
            let beta = match file.beta_flat()? {
                Some(b) => b,
                None => default_beta(st.ambient, &st.p)?,
            };
            let metric = LandmarkMetric::new(kernel_or(&kernel, st.ambient)?, st.count(), st.ambient)?;
            ctx.emit_json(&metric.curvature(&st.q, &st.p, &beta)?)?;
        }
        CurvatureCmd::Shape { shape, kernel } => {
            let file: ShapeFile = read_json(&shape)?;
            let (sh, momenta, beta) = DiscreteSubmanifold::from_file(&file)?;
            let beta = beta.ok_or_else(|| Failure::Usage("shape file has no `beta` field".into()))?;
            let metric = SubmanifoldMetric::new(&kernel_or(&kernel, sh.ambient())?)?;
            ctx.emit_json(&metric.curvature_terms(&sh, &momenta, &beta)?)?;
        }
    }
    Ok(())
}

fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

/// CSV: `t, q…, p…, H, P…, L…` and a trailing normality column for shapes.
fn trajectory_csv<S: GeodesicSystem>(sys: &S, run: &Integration) -> String {
    let d = sys.ambient();
    let n = sys.state_len() / d;
    let mut header = vec!["t".to_string()];
    for which in ["q", "p"] {
        for a in 0..n {
            for i in 0..d {
                header.push(format!("{which}{}_{}", a + 1, i + 1));
            }
        }
    }
    header.push("H".into());
    for i in 0..d {
        header.push(format!("P_{}", i + 1));
    }
    for i in 0..d {
        for j in (i + 1)..d {
            header.push(format!("L_{}{}", i + 1, j + 1));
        }
    }
    let shape = run.report.entries.first().and_then(|e| e.normality_defect).is_some();
    if shape {
        header.push("normality_defect".into());
    }
    let mut s = header.join(",");
    s.push('\n');
    for (pt, e) in run.trajectory.iter().zip(&run.report.entries) {
        let (lin, ang) = momentum_maps(d, &pt.q, &sys.point_momenta(&pt.p));
        let mut row = vec![fmt_f(pt.t)];
        row.extend(pt.q.iter().chain(&pt.p).map(|v| fmt_f(*v)));
        row.push(fmt_f(e.hamiltonian));
        row.extend(lin.iter().chain(&ang).map(|v| fmt_f(*v)));
        if let Some(nd) = e.normality_defect {
            row.push(fmt_f(nd));
        }
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

fn geodesic(
    ctx: &Ctx,
    state: Option<PathBuf>,
    shape: Option<PathBuf>,
    kernel: Option<PathBuf>,
    config: &IntegratorConfig,
) -> Result<(), Failure> {
    if let Some(path) = state {
        let file: LandmarkFile = read_json(&path)?;
        let st = file.state()?;
        let m = LandmarkMetric::new(kernel_or(&kernel, st.ambient)?, st.count(), st.ambient)?;
        let run = integrate(&m, &st.q, &st.p, config)?;
        ctx.emit(&trajectory_csv(&m, &run))?;
    } else if let Some(path) = shape {
        let file: ShapeFile = read_json(&path)?;
        let (sh, momenta, _) = DiscreteSubmanifold::from_file(&file)?;
        let metric = SubmanifoldMetric::new(&kernel_or(&kernel, sh.ambient())?)?;
        let q0 = sh.samples().to_vec();
        let sys = ShapeSystem::new(metric, sh);
        let run = integrate(&sys, &q0, &momenta, config)?;
        ctx.emit(&trajectory_csv(&sys, &run))?;
    } else {
        return Err(Failure::Usage("either --state or --shape is required".into()));
    }
    Ok(())
}

fn match_cmd(ctx: &Ctx, args: &MatchArgs) -> Result<(), Failure> {
    let src: LandmarkFile = read_json(&args.source)?;
    let tgt: LandmarkFile = read_json(&args.target)?;
    let (s, t) = (src.state()?, tgt.state()?);
    if s.ambient != t.ambient || s.count() != t.count() {
        return Err(Failure::Usage("source and target differ in landmark count or dimension".into()));
    }
    let m = LandmarkMetric::new(kernel_or(&args.kernel, s.ambient)?, s.count(), s.ambient)?;
    let cfg = IntegratorConfig::rk4(args.dt, args.t_end).with_monitor_every(usize::MAX);
    let opts = MatchOptions {
        tol: ctx.overrides.get(MATCH_TOL).copied().unwrap_or(args.tol),
        max_iter: args.max_iter,
        lambda: args.lambda,
    };
    ctx.emit_json(&match_momentum(&m, &s.q, &t.q, &cfg, &opts)?)?;
    Ok(())
}

#[derive(Serialize)]
struct OneillPoint {
    point: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    #[serde(flatten)]
    record: OneillRecord,
    base_sectional: f64,
    total_sectional: f64,
    vertical_sectional: f64,
}

#[derive(Serialize)]
struct OneillReport {
    case: String,
    trials: usize,
    seed: u64,
    records: Vec<OneillPoint>,
    max_residual: f64,
}

fn oneill(ctx: &Ctx, case: CaseArg, trials: usize) -> Result<(), Failure> {
    let case = match case {
        CaseArg::Product => submersions::product_default(),
        CaseArg::Hopf => submersions::hopf(),
        CaseArg::Flat => submersions::flat(),
    }?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let db = case.base_dim();
    let draws: Vec<_> = (0..trials)
        .map(|_| {
            let x = case.random_point(&mut rng);
            let a: Vec<f64> = (0..db).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..db).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (x, a, b)
        })
        .collect();
    let records = draws
        .into_par_iter()
        .map(|(x, a, b)| {
            let record = oneill_check(&case, &x, &Coform(a.clone()), &Coform(b.clone()))?;
            let norm = |v: f64| if record.denominator > 0.0 { v / record.denominator } else { 0.0 };
            Ok(OneillPoint {
                point: x,
                alpha: a,
                beta: b,
                base_sectional: norm(record.base_numerator),
                total_sectional: norm(record.total_numerator),
                vertical_sectional: norm(0.75 * record.vertical_term),
                record,
            })
        })
        .collect::<shapecurv::Result<Vec<_>>>()?;
    let max_residual = records.iter().map(|r| r.record.residual.abs()).fold(0.0, f64::max);
    ctx.emit_json(&OneillReport {
        case: case.name.clone(),
        trials,
        seed: ctx.seed,
        records,
        max_residual,
    })?;
    Ok(())
}

fn validate(ctx: &Ctx, args: &ValidateArgs) -> Result<ExitCode, Failure> {
    let results: Vec<_> = run_suite(&SuiteOptions {
        quick: args.quick,
        seed: ctx.seed,
    })
    .into_iter()
    .map(|r| match ctx.overrides.get(&r.name) {
        Some(&tol) => r.with_tolerance(tol),
        None => r,
    })
    .collect();
    let all = results.iter().all(|r| r.passed);
    if args.json {
        ctx.emit_json(&results)?;
    } else {
        let mut s = format!(
            "{:<26} {:>6} {:>12} {:>12}  {}\n",
            "suite", "cases", "max_residual", "tolerance", "result"
        );
        for r in &results {
            let verdict = match (&r.error, r.passed) {
                (Some(e), _) => format!("FAIL ({e})"),
                (None, true) => "PASS".into(),
                (None, false) => "FAIL".into(),
            };
            let _ = writeln!(
                s,
                "{:<26} {:>6} {:>12.3e} {:>12.1e}  {}",
                r.name, r.cases, r.max_residual, r.tolerance, verdict
            );
        }
        let _ = writeln!(s, "{}", if all { "all suites passed" } else { "some suites FAILED" });
        ctx.emit(&s)?;
    }
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
